#pragma once

#include <string>
#include <vector>

namespace unitrank {

struct ScoredDoc {
    std::string doc_id;
    double score{0.0};

    bool operator==(const ScoredDoc&) const = default;
};

/// Ranked results, ordered by (-score, doc_id) with no repeated doc_id.
using ScoredList = std::vector<ScoredDoc>;

/// The ranking order used everywhere: higher score first, then doc_id ascending.
inline bool ranks_before(const ScoredDoc& a, const ScoredDoc& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.doc_id < b.doc_id;
}

/// Sorts into ranking order and keeps the first k entries.
void sort_and_truncate(ScoredList& list, std::size_t k);

/// True if the list is strictly ordered under ranks_before.
bool is_ranked(const ScoredList& list);

}  // namespace unitrank
