#pragma once

/** \file sparse_index.hpp
 *  \brief Inverted index and BM25 scoring with query-side term saturation.
 *
 * A unit's score against document d sums, over terms t shared by both,
 *
 *   idf(t) * tf_d (k1 + 1) / (tf_d + k1 (1 - b + b |d| / avgdl))
 *          * tf_q (k3 + 1) / (tf_q + k3)
 *
 * with idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)). The index is immutable
 * after build() or load() and may be queried from several threads.
 */

#include "unitrank/analyzer.hpp"
#include "unitrank/corpus.hpp"
#include "unitrank/scored_list.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace unitrank {

struct RetrievalUnit;

struct SparseParams {
    double k1{0.9};
    double b{0.4};
    double k3{0.4};

    /// Throws InputError unless k1 >= 0, 0 <= b <= 1, k3 >= 0.
    void validate() const;
};

struct Posting {
    std::uint32_t doc{0};  ///< ordinal into doc_ids(), which is sorted by doc_id
    std::uint32_t tf{0};

    bool operator==(const Posting&) const = default;
};

class SparseIndex {
public:
    static SparseIndex build(const CorpusStore& store);
    static SparseIndex load(const std::string& path);
    void save(const std::string& path) const;

    std::size_t num_docs() const noexcept { return doc_ids_.size(); }
    double avgdl() const noexcept { return avgdl_; }
    std::size_t vocabulary_size() const noexcept { return postings_.size(); }
    const AnalyzerConfig& analyzer() const noexcept { return analyzer_; }

    const std::vector<std::string>& doc_ids() const noexcept { return doc_ids_; }
    std::uint32_t doc_length(std::uint32_t ordinal) const { return doc_lengths_[ordinal]; }
    /// Ordinal of doc_id, or -1 if absent.
    std::int64_t ordinal(std::string_view doc_id) const;

    /// Postings sorted by doc ordinal; empty for unseen terms.
    std::span<const Posting> postings(std::string_view term) const;
    std::uint32_t doc_freq(std::string_view term) const { return static_cast<std::uint32_t>(postings(term).size()); }

    /// Vocabulary in lexicographic order.
    std::vector<std::string> terms() const;

private:
    AnalyzerConfig analyzer_;
    std::vector<std::string> doc_ids_;
    std::vector<std::uint32_t> doc_lengths_;
    double avgdl_{0.0};
    std::uint64_t total_tokens_{0};
    std::unordered_map<std::string, std::vector<Posting>> postings_;
};

double idf(std::uint64_t num_docs, std::uint64_t doc_freq);
double idf(std::string_view term, const SparseIndex& index);

/// tf_q (k3 + 1) / (tf_q + k3); equals 1 when tf_q = 1.
double query_term_factor(double query_tf, double k3);

/// tf_d (k1 + 1) / (tf_d + k1 (1 - b + b |d| / avgdl)).
double doc_term_factor(double doc_tf, double doc_length, double avgdl, double k1, double b);

/// Score of an analyzed unit against one document; InputError if doc_id is unknown.
double bm25_score(const TokenSeq& unit, std::string_view doc_id, const SparseIndex& index, const SparseParams& params);

/// The text scored for a unit: sub-query and interpretation joined by a space.
std::string unit_text(const RetrievalUnit& unit);

/// Top-k documents sharing at least one term with the analyzed unit text.
ScoredList sparse_retrieve_topk(const RetrievalUnit& unit, const SparseIndex& index, const SparseParams& params,
                                std::size_t k);
ScoredList sparse_retrieve_topk(const TokenSeq& unit, const SparseIndex& index, const SparseParams& params,
                                std::size_t k);

}  // namespace unitrank
