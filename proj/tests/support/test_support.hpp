#pragma once

// Helpers shared by the unit and acceptance tests. The scorers here work on
// raw token counts and never touch the inverted index, so they can serve as
// oracles for it.

#include "unitrank/analyzer.hpp"
#include "unitrank/scored_list.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace unitrank::testing {

inline std::filesystem::path fixture(const std::string& rel) {
    return std::filesystem::path(UNITRANK_FIXTURE_DIR) / rel;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
}

/// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::mt19937_64 rng{std::random_device{}()};
        path_ = std::filesystem::temp_directory_path() / ("unitrank-test-" + std::to_string(rng()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

/// A document as a bag of already-analyzed terms.
struct BagDoc {
    std::string id;
    std::vector<std::string> terms;
};

/// Direct evaluation of the BM25 sum for one document, counting everything
/// from scratch.
inline double brute_bm25(const std::vector<std::string>& query, const BagDoc& doc, const std::vector<BagDoc>& corpus,
                         double k1, double b, double k3) {
    double total_len = 0;
    for (const auto& d : corpus) total_len += static_cast<double>(d.terms.size());
    const double n = static_cast<double>(corpus.size());
    const double avgdl = total_len / n;
    std::map<std::string, int> qtf;
    for (const auto& t : query) ++qtf[t];
    double score = 0.0;
    for (const auto& [term, fq] : qtf) {
        const double fd = static_cast<double>(std::count(doc.terms.begin(), doc.terms.end(), term));
        if (fd == 0) continue;
        double df = 0;
        for (const auto& d : corpus) {
            if (std::find(d.terms.begin(), d.terms.end(), term) != d.terms.end()) df += 1;
        }
        const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
        const double dl = static_cast<double>(doc.terms.size());
        score += idf * (fd * (k1 + 1)) / (fd + k1 * (1 - b + b * dl / avgdl)) * (fq * (k3 + 1)) / (fq + k3);
    }
    return score;
}

/// Scores every document, keeps positive scores, sorts by (-score, id).
inline ScoredList brute_ranking(const std::vector<std::string>& query, const std::vector<BagDoc>& corpus, double k1,
                                double b, double k3) {
    ScoredList out;
    for (const auto& d : corpus) {
        const double s = brute_bm25(query, d, corpus, k1, b, k3);
        if (s > 0) out.push_back({d.id, s});
    }
    std::sort(out.begin(), out.end(), [](const ScoredDoc& x, const ScoredDoc& y) {
        return x.score != y.score ? x.score > y.score : x.doc_id < y.doc_id;
    });
    return out;
}

/// Random corpus over a small vocabulary of plain words that the default
/// analyzer leaves untouched (no stopwords, stable under stemming).
inline std::vector<BagDoc> random_corpus(std::mt19937_64& rng, std::size_t max_docs, std::size_t vocab) {
    static const char* words[] = {"alpha", "bravo", "delta", "echo", "golf", "hotel", "kilo", "lima", "oscar", "tango"};
    std::uniform_int_distribution<std::size_t> ndocs(1, max_docs), nvocab(1, vocab), len(0, 12);
    const std::size_t v = nvocab(rng);
    std::uniform_int_distribution<std::size_t> pick(0, v - 1);
    std::vector<BagDoc> docs(ndocs(rng));
    for (std::size_t i = 0; i < docs.size(); ++i) {
        char id[16];
        std::snprintf(id, sizeof(id), "doc%03zu", i);
        docs[i].id = id;
        const std::size_t l = len(rng);
        for (std::size_t j = 0; j < l; ++j) docs[i].terms.push_back(words[pick(rng)]);
    }
    // Avoid an all-empty corpus (avgdl 0).
    if (std::all_of(docs.begin(), docs.end(), [](const BagDoc& d) { return d.terms.empty(); })) {
        docs[0].terms.push_back(words[0]);
    }
    return docs;
}

inline std::vector<std::string> random_query(std::mt19937_64& rng, std::size_t vocab) {
    static const char* words[] = {"alpha", "bravo", "delta", "echo", "golf", "hotel", "kilo", "lima", "oscar", "tango"};
    std::uniform_int_distribution<std::size_t> len(1, 6), pick(0, std::min<std::size_t>(vocab, 10) - 1);
    std::vector<std::string> q(len(rng));
    for (auto& t : q) t = words[pick(rng)];
    return q;
}

inline std::string join(const std::vector<std::string>& terms) {
    std::string out;
    for (const auto& t : terms) {
        if (!out.empty()) out += ' ';
        out += t;
    }
    return out;
}

}  // namespace unitrank::testing
