#pragma once

/** \file corpus.hpp
 *  \brief Document collections, query sets and the corpus statistics used by BM25.
 *
 * Corpus files are JSON lines with string fields "doc_id" and "text"; query
 * files use "query_id" and "text". Unknown keys are ignored and blank lines
 * skipped. A CorpusStore is immutable once built and safe to share.
 */

#include "unitrank/analyzer.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace unitrank {

struct Document {
    std::string doc_id;
    std::string text;
    std::uint32_t length_tokens{0};
};

struct CorpusStats {
    std::size_t num_docs{0};
    double avgdl{0.0};
};

class CorpusStore {
public:
    /// Analyzes every document; throws InputError on an empty collection or
    /// a duplicate or empty doc_id.
    static CorpusStore build(std::vector<Document> docs, const AnalyzerConfig& config);

    /// Documents ordered by doc_id.
    const std::vector<Document>& docs() const noexcept { return docs_; }
    const Document* find(std::string_view doc_id) const;

    std::size_t num_docs() const noexcept { return docs_.size(); }
    double avgdl() const noexcept { return avgdl_; }
    std::uint64_t total_tokens() const noexcept { return total_tokens_; }
    const AnalyzerConfig& analyzer() const noexcept { return analyzer_; }

private:
    std::vector<Document> docs_;
    std::uint64_t total_tokens_{0};
    double avgdl_{0.0};
    AnalyzerConfig analyzer_;
};

CorpusStore ingest_corpus(const std::string& path, const AnalyzerConfig& config);

/// Stored (N, avgdl); throws Error on an empty store.
CorpusStats corpus_stats(const CorpusStore& store);

struct Query {
    std::string query_id;
    std::string text;
};

/// Queries in file order; duplicate ids are an error.
std::vector<Query> load_queries(const std::string& path);

}  // namespace unitrank
