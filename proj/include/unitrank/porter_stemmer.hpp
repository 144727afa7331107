#pragma once

#include <string>
#include <string_view>

namespace unitrank {

/// Porter (1980) suffix stripping, following the author's reference C
/// implementation including its two departures from the published rules
/// ("bli" -> "ble", "logi" -> "log"). Expects a lowercase ASCII word; words of
/// length <= 2 are returned unchanged.
std::string porter_stem(std::string_view word);

}  // namespace unitrank
