#include "unitrank/fusion.hpp"

#include "unitrank/errors.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace unitrank {

namespace {

using Contributions = std::unordered_map<std::string, std::vector<double>>;

template <typename ScoreOf>
Contributions collect(std::span<const ScoredList> lists, ScoreOf&& score_of) {
    Contributions out;
    for (const auto& list : lists) {
        for (std::size_t i = 0; i < list.size(); ++i) {
            out[list[i].doc_id].push_back(score_of(list[i], i + 1));
        }
    }
    return out;
}

template <typename Reduce>
ScoredList reduce(Contributions&& contributions, std::size_t depth, Reduce&& reduce_fn) {
    ScoredList out;
    out.reserve(contributions.size());
    for (auto& [doc, values] : contributions) {
        std::sort(values.begin(), values.end());
        out.push_back({doc, reduce_fn(values)});
    }
    sort_and_truncate(out, depth);
    return out;
}

double sorted_sum(const std::vector<double>& values) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
}

}  // namespace

std::string_view to_string(FusionMethod m) {
    switch (m) {
        case FusionMethod::sum: return "sum";
        case FusionMethod::max: return "max";
        case FusionMethod::rrf: return "rrf";
        case FusionMethod::concat: return "concat";
    }
    return "sum";
}

FusionMethod fusion_method_from_string(std::string_view name) {
    if (name == "sum") return FusionMethod::sum;
    if (name == "max") return FusionMethod::max;
    if (name == "rrf") return FusionMethod::rrf;
    if (name == "concat") return FusionMethod::concat;
    throw InputError("unknown fusion method '" + std::string(name) + "' (expected sum, max, rrf or concat)");
}

void FusionConfig::validate() const {
    if (!(rrf_k > 0.0) || !std::isfinite(rrf_k)) throw InputError("rrf_k must be > 0");
    if (final_depth == 0) throw InputError("final_depth must be >= 1");
}

ScoredList fuse_sum(std::span<const ScoredList> lists, std::size_t depth) {
    auto c = collect(lists, [](const ScoredDoc& d, std::size_t) { return d.score; });
    return reduce(std::move(c), depth, sorted_sum);
}

ScoredList fuse_max(std::span<const ScoredList> lists, std::size_t depth) {
    auto c = collect(lists, [](const ScoredDoc& d, std::size_t) { return d.score; });
    return reduce(std::move(c), depth, [](const std::vector<double>& v) { return v.back(); });
}

ScoredList fuse_rrf(std::span<const ScoredList> lists, double rrf_k, std::size_t depth) {
    if (!(rrf_k > 0.0)) throw InputError("rrf_k must be > 0");
    auto c = collect(lists, [rrf_k](const ScoredDoc&, std::size_t rank) {
        return 1.0 / (rrf_k + static_cast<double>(rank));
    });
    return reduce(std::move(c), depth, sorted_sum);
}

ScoredList fuse(std::span<const ScoredList> lists, const FusionConfig& config, std::size_t depth) {
    switch (config.method) {
        case FusionMethod::max: return fuse_max(lists, depth);
        case FusionMethod::rrf: return fuse_rrf(lists, config.rrf_k, depth);
        case FusionMethod::sum:
        case FusionMethod::concat: return fuse_sum(lists, depth);
    }
    return fuse_sum(lists, depth);
}

ScoredList fuse(std::span<const ScoredList> lists, const FusionConfig& config) {
    return fuse(lists, config, config.final_depth);
}

RetrievalUnit concat_units(const UnitSet& units) {
    if (units.units.empty()) throw InputError("cannot concatenate an empty unit set");
    if (units.units.size() == 1) return units.units.front();
    RetrievalUnit merged;
    merged.unit_id = "q" + units.query_id + "#concat";
    for (const auto& u : units.units) {
        if (!merged.sub_query.empty()) merged.sub_query += ' ';
        merged.sub_query += u.sub_query;
        if (u.interpretation.empty()) continue;
        if (!merged.interpretation.empty()) merged.interpretation += ' ';
        merged.interpretation += u.interpretation;
    }
    return merged;
}

void check_depths(std::size_t per_unit_k, std::size_t final_depth) {
    if (per_unit_k < final_depth) {
        throw InputError("per-unit depth top_k=" + std::to_string(per_unit_k) + " is smaller than final_depth=" +
                         std::to_string(final_depth));
    }
}

}  // namespace unitrank
