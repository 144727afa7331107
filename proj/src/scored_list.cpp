#include "unitrank/scored_list.hpp"

#include <algorithm>

namespace unitrank {

void sort_and_truncate(ScoredList& list, std::size_t k) {
    if (k < list.size()) {
        std::partial_sort(list.begin(), list.begin() + static_cast<std::ptrdiff_t>(k), list.end(), ranks_before);
        list.resize(k);
    } else {
        std::sort(list.begin(), list.end(), ranks_before);
    }
}

bool is_ranked(const ScoredList& list) {
    for (std::size_t i = 1; i < list.size(); ++i) {
        if (!ranks_before(list[i - 1], list[i])) return false;
    }
    return true;
}

}  // namespace unitrank
