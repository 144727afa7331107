#include "unitrank/sparse_index.hpp"

#include "binary_io.hpp"
#include "unitrank/errors.hpp"
#include "unitrank/query_understanding.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace unitrank {

namespace {

constexpr char kIndexMagic[8] = {'U', 'T', 'R', 'S', 'P', 'A', 'R', 'S'};
constexpr std::uint32_t kIndexVersion = 1;

void write_string(std::ostream& out, std::string_view s) {
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    detail::write_bytes(out, s);
}

std::string read_string(detail::BinaryReader& in, const char* what) {
    const auto n = in.read<std::uint32_t>(what);
    return in.read_string(n, what);
}

// One term's contribution to a document score. Shared by the exhaustive and
// the inverted-index paths so both sum identical terms in identical order.
inline double contribution(double term_weight, double doc_tf, double doc_length, double avgdl,
                           const SparseParams& p) {
    return term_weight * doc_term_factor(doc_tf, doc_length, avgdl, p.k1, p.b);
}

}  // namespace

void SparseParams::validate() const {
    if (!(k1 >= 0.0) || !std::isfinite(k1)) throw InputError("k1 must be a finite value >= 0");
    if (!(b >= 0.0 && b <= 1.0)) throw InputError("b must lie in [0, 1]");
    if (!(k3 >= 0.0) || !std::isfinite(k3)) throw InputError("k3 must be a finite value >= 0");
}

SparseIndex SparseIndex::build(const CorpusStore& store) {
    SparseIndex index;
    index.analyzer_ = store.analyzer();
    index.doc_ids_.reserve(store.num_docs());
    index.doc_lengths_.reserve(store.num_docs());
    // Documents arrive sorted by doc_id, so appending in order keeps postings sorted.
    for (const auto& doc : store.docs()) {
        const auto ord = static_cast<std::uint32_t>(index.doc_ids_.size());
        const TokenSeq seq = analyze(doc.text, index.analyzer_);
        index.doc_ids_.push_back(doc.doc_id);
        index.doc_lengths_.push_back(static_cast<std::uint32_t>(seq.size()));
        index.total_tokens_ += seq.size();
        for (const auto& [term, count] : seq.tf) {
            index.postings_[term].push_back({ord, count});
        }
    }
    index.avgdl_ = store.avgdl();
    return index;
}

std::int64_t SparseIndex::ordinal(std::string_view doc_id) const {
    auto it = std::lower_bound(doc_ids_.begin(), doc_ids_.end(), doc_id);
    if (it == doc_ids_.end() || *it != doc_id) return -1;
    return it - doc_ids_.begin();
}

std::span<const Posting> SparseIndex::postings(std::string_view term) const {
    auto it = postings_.find(std::string(term));
    if (it == postings_.end()) return {};
    return it->second;
}

std::vector<std::string> SparseIndex::terms() const {
    std::vector<std::string> out;
    out.reserve(postings_.size());
    for (const auto& entry : postings_) out.push_back(entry.first);
    std::sort(out.begin(), out.end());
    return out;
}

void SparseIndex::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write index file: " + path);
    out.write(kIndexMagic, sizeof(kIndexMagic));
    detail::write_le<std::uint32_t>(out, kIndexVersion);

    detail::write_le<std::uint8_t>(out, analyzer_.lowercase ? 1 : 0);
    detail::write_le<std::uint8_t>(out, analyzer_.fold_ascii ? 1 : 0);
    detail::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(analyzer_.stemmer));
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(analyzer_.stopwords.size()));
    for (const auto& w : analyzer_.stopwords) write_string(out, w);

    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(doc_ids_.size()));
    for (std::size_t i = 0; i < doc_ids_.size(); ++i) {
        write_string(out, doc_ids_[i]);
        detail::write_le<std::uint32_t>(out, doc_lengths_[i]);
    }
    detail::write_le<std::uint64_t>(out, total_tokens_);

    const auto vocab = terms();
    detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(vocab.size()));
    for (const auto& term : vocab) {
        const auto& list = postings_.at(term);
        write_string(out, term);
        detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(list.size()));
        for (const auto& p : list) {
            detail::write_le<std::uint32_t>(out, p.doc);
            detail::write_le<std::uint32_t>(out, p.tf);
        }
    }
    if (!out) throw Error("failed writing index file: " + path);
}

SparseIndex SparseIndex::load(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw InputError("cannot open index file: " + path);
    detail::BinaryReader in(file, path);

    char magic[sizeof(kIndexMagic)];
    in.read_exact(magic, sizeof(magic), "magic");
    if (!std::equal(std::begin(magic), std::end(magic), std::begin(kIndexMagic))) {
        throw InputError(path + ": not a sparse index file");
    }
    const auto version = in.read<std::uint32_t>("version");
    if (version != kIndexVersion) {
        throw InputError(path + ": unsupported index version " + std::to_string(version));
    }

    SparseIndex index;
    index.analyzer_.lowercase = in.read<std::uint8_t>("analyzer") != 0;
    index.analyzer_.fold_ascii = in.read<std::uint8_t>("analyzer") != 0;
    const auto stemmer = in.read<std::uint8_t>("analyzer");
    if (stemmer > static_cast<std::uint8_t>(Stemmer::porter)) throw InputError(path + ": bad stemmer code");
    index.analyzer_.stemmer = static_cast<Stemmer>(stemmer);
    const auto n_stop = in.read<std::uint32_t>("stopword count");
    for (std::uint32_t i = 0; i < n_stop; ++i) index.analyzer_.stopwords.insert(read_string(in, "stopword"));

    const auto n_docs = in.read<std::uint32_t>("document count");
    if (n_docs == 0) throw InputError(path + ": index has no documents");
    std::uint64_t length_sum = 0;
    for (std::uint32_t i = 0; i < n_docs; ++i) {
        index.doc_ids_.push_back(read_string(in, "doc_id"));
        index.doc_lengths_.push_back(in.read<std::uint32_t>("doc length"));
        length_sum += index.doc_lengths_.back();
        if (i > 0 && !(index.doc_ids_[i - 1] < index.doc_ids_[i])) {
            throw InputError(path + ": doc ids not strictly sorted");
        }
    }
    index.total_tokens_ = in.read<std::uint64_t>("token total");
    if (index.total_tokens_ != length_sum) throw InputError(path + ": token total does not match doc lengths");
    index.avgdl_ = static_cast<double>(index.total_tokens_) / static_cast<double>(n_docs);

    const auto vocab = in.read<std::uint32_t>("vocabulary size");
    for (std::uint32_t t = 0; t < vocab; ++t) {
        std::string term = read_string(in, "term");
        const auto df = in.read<std::uint32_t>("doc freq");
        if (df == 0) throw InputError(path + ": empty postings for term '" + term + "'");
        std::vector<Posting> list(df);
        for (std::uint32_t i = 0; i < df; ++i) {
            list[i].doc = in.read<std::uint32_t>("posting");
            list[i].tf = in.read<std::uint32_t>("posting");
            if (list[i].doc >= n_docs || list[i].tf == 0 || (i > 0 && list[i].doc <= list[i - 1].doc)) {
                throw InputError(path + ": corrupt postings for term '" + term + "'");
            }
        }
        index.postings_.emplace(std::move(term), std::move(list));
    }
    if (!in.at_eof()) throw InputError(path + ": trailing bytes after postings");
    return index;
}

double idf(std::uint64_t num_docs, std::uint64_t doc_freq) {
    const double n = static_cast<double>(num_docs);
    const double df = static_cast<double>(doc_freq);
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

double idf(std::string_view term, const SparseIndex& index) {
    return idf(index.num_docs(), index.doc_freq(term));
}

double query_term_factor(double query_tf, double k3) {
    return query_tf * (k3 + 1.0) / (query_tf + k3);
}

double doc_term_factor(double doc_tf, double doc_length, double avgdl, double k1, double b) {
    return doc_tf * (k1 + 1.0) / (doc_tf + k1 * (1.0 - b + b * doc_length / avgdl));
}

double bm25_score(const TokenSeq& unit, std::string_view doc_id, const SparseIndex& index,
                  const SparseParams& params) {
    const auto ord = index.ordinal(doc_id);
    if (ord < 0) throw InputError("unknown doc_id \"" + std::string(doc_id) + "\"");
    const auto doc = static_cast<std::uint32_t>(ord);
    const double length = index.doc_length(doc);
    double score = 0.0;
    for (const auto& [term, qtf] : unit.tf) {
        const auto list = index.postings(term);
        auto it = std::lower_bound(list.begin(), list.end(), doc,
                                   [](const Posting& p, std::uint32_t d) { return p.doc < d; });
        if (it == list.end() || it->doc != doc) continue;
        const double weight = idf(index.num_docs(), list.size()) * query_term_factor(qtf, params.k3);
        score += contribution(weight, it->tf, length, index.avgdl(), params);
    }
    return score;
}

std::string unit_text(const RetrievalUnit& unit) {
    if (unit.interpretation.empty()) return unit.sub_query;
    return unit.sub_query + " " + unit.interpretation;
}

ScoredList sparse_retrieve_topk(const TokenSeq& unit, const SparseIndex& index, const SparseParams& params,
                                std::size_t k) {
    if (k == 0) throw InputError("top-k must be >= 1");
    std::vector<double> acc(index.num_docs(), 0.0);
    std::vector<char> seen(index.num_docs(), 0);
    std::vector<std::uint32_t> touched;
    for (const auto& [term, qtf] : unit.tf) {
        const auto list = index.postings(term);
        if (list.empty()) continue;
        const double weight = idf(index.num_docs(), list.size()) * query_term_factor(qtf, params.k3);
        for (const auto& p : list) {
            if (!seen[p.doc]) {
                seen[p.doc] = 1;
                touched.push_back(p.doc);
            }
            acc[p.doc] += contribution(weight, p.tf, index.doc_length(p.doc), index.avgdl(), params);
        }
    }
    ScoredList out;
    out.reserve(touched.size());
    for (auto doc : touched) {
        if (acc[doc] > 0.0) out.push_back({index.doc_ids()[doc], acc[doc]});
    }
    sort_and_truncate(out, k);
    return out;
}

ScoredList sparse_retrieve_topk(const RetrievalUnit& unit, const SparseIndex& index, const SparseParams& params,
                                std::size_t k) {
    return sparse_retrieve_topk(analyze(unit_text(unit), index.analyzer()), index, params, k);
}

}  // namespace unitrank
