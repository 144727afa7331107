#pragma once

/** \file fusion.hpp
 *  \brief Combining per-unit rankings into one ranking per query.
 *
 * sum: a document's score is the sum of its scores over the unit lists that
 *      contain it (absent from a list contributes 0).
 * max: the largest of those scores.
 * rrf: sum over lists of 1 / (rrf_k + rank), ranks counted from 1.
 * concat: all units are merged into one before retrieval, so only a single
 *      list reaches fusion, which then passes it through.
 *
 * Each document's contributions are combined in sorted order, which makes the
 * result independent of the order of the input lists, bit for bit.
 */

#include "unitrank/query_understanding.hpp"
#include "unitrank/scored_list.hpp"

#include <span>
#include <string_view>

namespace unitrank {

enum class FusionMethod { sum, max, rrf, concat };

std::string_view to_string(FusionMethod m);
FusionMethod fusion_method_from_string(std::string_view name);

struct FusionConfig {
    FusionMethod method{FusionMethod::sum};
    double rrf_k{60.0};
    std::size_t final_depth{100};

    void validate() const;
};

ScoredList fuse_sum(std::span<const ScoredList> lists, std::size_t depth);
ScoredList fuse_max(std::span<const ScoredList> lists, std::size_t depth);
ScoredList fuse_rrf(std::span<const ScoredList> lists, double rrf_k, std::size_t depth);

/// Dispatches on config.method; concat behaves as sum over its single list.
ScoredList fuse(std::span<const ScoredList> lists, const FusionConfig& config);
ScoredList fuse(std::span<const ScoredList> lists, const FusionConfig& config, std::size_t depth);

/// One unit holding every sub-query joined by spaces and every non-empty
/// interpretation joined by spaces. A single-unit set yields its unit as is.
RetrievalUnit concat_units(const UnitSet& units);

/// Rejects per-unit depths shallower than the fused depth.
void check_depths(std::size_t per_unit_k, std::size_t final_depth);

}  // namespace unitrank
