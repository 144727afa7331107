#include "unitrank/errors.hpp"

namespace unitrank {

std::string at_line(const std::string& path, std::size_t line, const std::string& message) {
    return path + ":" + std::to_string(line) + ": " + message;
}

}  // namespace unitrank
