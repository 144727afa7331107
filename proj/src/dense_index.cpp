#include "unitrank/dense_index.hpp"

#include "binary_io.hpp"
#include "unitrank/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace unitrank {

namespace {

constexpr char kEmbeddingMagic[8] = {'R', 'E', 'D', 'I', 'E', 'M', 'B', '1'};

EmbeddingFile load_binary(std::ifstream& file, const std::string& path) {
    detail::BinaryReader in(file, path);
    char magic[sizeof(kEmbeddingMagic)];
    in.read_exact(magic, sizeof(magic), "magic");
    const auto dim = in.read<std::uint32_t>("dimension");
    if (dim == 0) throw InputError(path + ": dimension must be >= 1");
    EmbeddingFile out(dim);
    std::vector<float> values(dim);
    std::string last_id;
    while (!in.at_eof()) {
        try {
            const auto id_len = in.read<std::uint16_t>("record id length");
            std::string id = in.read_string(id_len, "record id");
            in.read_exact(reinterpret_cast<char*>(values.data()), dim * sizeof(float), "record vector");
            for (float v : values) {
                if (!std::isfinite(v)) throw InputError(path + ": non-finite value in record \"" + id + "\"");
            }
            out.add(std::move(id), values);
            last_id = out.ids().back();
        } catch (const InputError& e) {
            if (last_id.empty()) throw;
            throw InputError(std::string(e.what()) + " (last complete record \"" + last_id + "\")");
        }
    }
    return out;
}

EmbeddingFile load_jsonl(std::ifstream& in, const std::string& path) {
    using nlohmann::json;
    EmbeddingFile out;
    bool have_dim = false;
    std::string line;
    std::size_t line_no = 0;
    std::vector<float> values;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw InputError(at_line(path, line_no, std::string("malformed JSON: ") + e.what()));
        }
        if (!obj.is_object() || !obj.contains("id") || !obj["id"].is_string() || !obj.contains("vector") ||
            !obj["vector"].is_array()) {
            throw InputError(at_line(path, line_no, "expected {\"id\": string, \"vector\": [numbers]}"));
        }
        const auto id = obj["id"].get<std::string>();
        values.clear();
        for (const auto& v : obj["vector"]) {
            if (!v.is_number()) throw InputError(at_line(path, line_no, "non-numeric component in \"" + id + "\""));
            values.push_back(v.get<float>());
        }
        if (!have_dim) {
            if (values.empty()) throw InputError(at_line(path, line_no, "empty vector for \"" + id + "\""));
            out = EmbeddingFile(values.size());
            have_dim = true;
        }
        if (values.size() != out.dim()) {
            throw InputError(at_line(path, line_no,
                                     "record \"" + id + "\" has " + std::to_string(values.size()) +
                                         " components, expected " + std::to_string(out.dim())));
        }
        try {
            out.add(id, values);
        } catch (const InputError& e) {
            throw InputError(at_line(path, line_no, e.what()));
        }
    }
    return out;
}

}  // namespace

EmbeddingFile::EmbeddingFile(std::size_t dim) : dim_(dim) {}

void EmbeddingFile::add(std::string id, std::span<const float> vector) {
    if (vector.size() != dim_) {
        throw InputError("record \"" + id + "\" has " + std::to_string(vector.size()) + " components, expected " +
                         std::to_string(dim_));
    }
    if (lookup_.contains(id)) throw InputError("duplicate embedding id \"" + id + "\"");
    lookup_.emplace(id, ids_.size());
    ids_.push_back(std::move(id));
    values_.insert(values_.end(), vector.begin(), vector.end());
}

std::optional<std::size_t> EmbeddingFile::find(std::string_view id) const {
    auto it = lookup_.find(std::string(id));
    if (it == lookup_.end()) return std::nullopt;
    return it->second;
}

EmbeddingFile load_embeddings(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open embedding file: " + path);
    char head[sizeof(kEmbeddingMagic)] = {};
    in.read(head, sizeof(head));
    const bool binary = in.gcount() == sizeof(head) && std::equal(std::begin(head), std::end(head), kEmbeddingMagic);
    in.clear();
    in.seekg(0);
    EmbeddingFile out = binary ? load_binary(in, path) : load_jsonl(in, path);
    if (out.size() == 0) throw InputError("embedding file has no records: " + path);
    return out;
}

void save_embeddings(const std::string& path, const EmbeddingFile& file, EmbeddingFormat format) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write embedding file: " + path);
    if (format == EmbeddingFormat::binary) {
        out.write(kEmbeddingMagic, sizeof(kEmbeddingMagic));
        detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(file.dim()));
        for (std::size_t i = 0; i < file.size(); ++i) {
            const auto& id = file.ids()[i];
            if (id.size() > 0xFFFF) throw InputError("embedding id too long: " + id.substr(0, 32) + "...");
            detail::write_le<std::uint16_t>(out, static_cast<std::uint16_t>(id.size()));
            detail::write_bytes(out, id);
            for (float v : file.row(i)) detail::write_le<float>(out, v);
        }
    } else {
        for (std::size_t i = 0; i < file.size(); ++i) {
            nlohmann::json obj;
            obj["id"] = file.ids()[i];
            const auto row = file.row(i);
            obj["vector"] = std::vector<float>(row.begin(), row.end());
            out << obj.dump() << '\n';
        }
    }
    if (!out) throw Error("failed writing embedding file: " + path);
}

void DenseParams::validate() const {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw InputError("lambda must lie in [0, 1]");
}

DenseIndex DenseIndex::build(const EmbeddingFile& embeddings, bool normalize) {
    DenseIndex index;
    index.dim_ = embeddings.dim();
    index.normalized_ = normalize;

    const bool strip = std::all_of(embeddings.ids().begin(), embeddings.ids().end(),
                                   [](const std::string& id) { return id.starts_with("doc:"); });
    std::vector<std::size_t> order(embeddings.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return embeddings.ids()[a] < embeddings.ids()[b]; });

    index.doc_ids_.reserve(order.size());
    index.matrix_.reserve(order.size() * index.dim_);
    for (auto i : order) {
        const auto& id = embeddings.ids()[i];
        index.doc_ids_.push_back(strip ? id.substr(4) : id);
        const auto row = embeddings.row(i);
        if (normalize) {
            for (double v : l2_normalized(row)) index.matrix_.push_back(static_cast<float>(v));
        } else {
            index.matrix_.insert(index.matrix_.end(), row.begin(), row.end());
        }
    }
    return index;
}

std::vector<double> fuse_query_embedding(std::span<const double> subq, std::span<const double> interp,
                                         double lambda) {
    if (subq.size() != interp.size()) {
        throw InputError("embedding dimension mismatch: " + std::to_string(subq.size()) + " vs " +
                         std::to_string(interp.size()));
    }
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw InputError("lambda must lie in [0, 1]");
    std::vector<double> out(subq.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = lambda * subq[i] + (1.0 - lambda) * interp[i];
    }
    return out;
}

double dense_score(std::span<const double> query, std::span<const float> doc) {
    if (query.size() != doc.size()) {
        throw InputError("embedding dimension mismatch: " + std::to_string(query.size()) + " vs " +
                         std::to_string(doc.size()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < query.size(); ++i) s += query[i] * static_cast<double>(doc[i]);
    return s;
}

double dense_score(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw InputError("embedding dimension mismatch: " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double l2_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

std::vector<double> l2_normalized(std::span<const float> v) {
    std::vector<double> out(v.begin(), v.end());
    const double norm = l2_norm(out);
    // A zero vector stays zero: it has no direction to preserve.
    if (norm > 0.0) {
        for (double& x : out) x /= norm;
    }
    return out;
}

ScoredList dense_retrieve_topk(std::span<const double> fused, const DenseIndex& index, std::size_t k) {
    if (k == 0) throw InputError("top-k must be >= 1");
    if (fused.size() != index.dim()) {
        throw InputError("query dimension " + std::to_string(fused.size()) + " does not match index dimension " +
                         std::to_string(index.dim()));
    }
    ScoredList out;
    out.reserve(index.size());
    for (std::size_t i = 0; i < index.size(); ++i) {
        out.push_back({index.doc_ids()[i], dense_score(fused, index.row(i))});
    }
    sort_and_truncate(out, k);
    return out;
}

ScoredList dense_retrieve_topk(std::string_view subq_id, std::optional<std::string_view> interp_id,
                               const EmbeddingFile& query_embs, const DenseIndex& index, const DenseParams& params,
                               std::size_t k) {
    auto lookup = [&](std::string_view id) {
        const auto row = query_embs.find(id);
        if (!row) throw InputError("no query embedding with id \"" + std::string(id) + "\"");
        const auto raw = query_embs.row(*row);
        return params.normalize ? l2_normalized(raw) : std::vector<double>(raw.begin(), raw.end());
    };
    const std::vector<double> subq = lookup(subq_id);
    if (!interp_id) return dense_retrieve_topk(subq, index, k);
    const std::vector<double> interp = lookup(*interp_id);
    return dense_retrieve_topk(fuse_query_embedding(subq, interp, params.lambda), index, k);
}

std::string subq_embedding_id(std::string_view unit_id) {
    return "subq:" + std::string(unit_id);
}

std::string interp_embedding_id(std::string_view unit_id) {
    return "interp:" + std::string(unit_id);
}

}  // namespace unitrank
