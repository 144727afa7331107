#pragma once

/** \file dense_index.hpp
 *  \brief Exhaustive inner-product retrieval over precomputed embeddings.
 *
 * A unit's query vector is lambda * subq + (1 - lambda) * interp. Documents
 * are scored by inner product against that fused vector. With normalize on,
 * stored document rows and both query-side vectors are L2-normalized when
 * loaded, so the inner product of a document with either query-side vector
 * is its cosine. The fused vector itself is not re-normalized.
 *
 * Embedding files come in two formats sharing one id scheme:
 *   binary: "REDIEMB1", u32 dim, then records of
 *           (u16 id byte length, id bytes, dim x float32), little-endian,
 *           until end of file;
 *   jsonl:  {"id": "...", "vector": [...]} per line.
 * Query-side ids are "subq:<unit_id>" and "interp:<unit_id>".
 */

#include "unitrank/scored_list.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace unitrank {

class EmbeddingFile {
public:
    EmbeddingFile() = default;
    explicit EmbeddingFile(std::size_t dim);

    /// Appends a record; InputError on a duplicate id or wrong length.
    void add(std::string id, std::span<const float> vector);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return ids_.size(); }
    const std::vector<std::string>& ids() const noexcept { return ids_; }
    std::span<const float> row(std::size_t i) const { return {values_.data() + i * dim_, dim_}; }
    /// Row index of id, if present.
    std::optional<std::size_t> find(std::string_view id) const;

private:
    std::size_t dim_{0};
    std::vector<std::string> ids_;
    std::vector<float> values_;
    std::unordered_map<std::string, std::size_t> lookup_;
};

enum class EmbeddingFormat { binary, jsonl };

/// Detects the format from the leading bytes.
EmbeddingFile load_embeddings(const std::string& path);
void save_embeddings(const std::string& path, const EmbeddingFile& file, EmbeddingFormat format);

struct DenseParams {
    double lambda{0.5};
    bool normalize{true};

    void validate() const;
};

class DenseIndex {
public:
    /// Copies the rows of `embeddings`, L2-normalizing them when `normalize`
    /// is set. A "doc:" prefix shared by every id is stripped. Rows are kept
    /// in doc_id order.
    static DenseIndex build(const EmbeddingFile& embeddings, bool normalize);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return doc_ids_.size(); }
    bool normalized() const noexcept { return normalized_; }
    const std::vector<std::string>& doc_ids() const noexcept { return doc_ids_; }
    std::span<const float> row(std::size_t i) const { return {matrix_.data() + i * dim_, dim_}; }

private:
    std::size_t dim_{0};
    bool normalized_{false};
    std::vector<std::string> doc_ids_;
    std::vector<float> matrix_;
};

/// lambda * subq + (1 - lambda) * interp, componentwise.
std::vector<double> fuse_query_embedding(std::span<const double> subq, std::span<const double> interp,
                                         double lambda);

double dense_score(std::span<const double> query, std::span<const float> doc);
double dense_score(std::span<const double> a, std::span<const double> b);

std::vector<double> l2_normalized(std::span<const float> v);
double l2_norm(std::span<const double> v);

/// Looks up the query-side vectors (interp_id may be absent, in which case the
/// sub-query vector is used alone), fuses them and ranks every document.
ScoredList dense_retrieve_topk(std::string_view subq_id, std::optional<std::string_view> interp_id,
                               const EmbeddingFile& query_embs, const DenseIndex& index, const DenseParams& params,
                               std::size_t k);

/// Ranks every document against an already fused query vector.
ScoredList dense_retrieve_topk(std::span<const double> fused, const DenseIndex& index, std::size_t k);

std::string subq_embedding_id(std::string_view unit_id);
std::string interp_embedding_id(std::string_view unit_id);

}  // namespace unitrank
