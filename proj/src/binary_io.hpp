#pragma once

// Little-endian fixed-width I/O shared by the index and embedding formats.

#include "unitrank/errors.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

namespace unitrank::detail {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

template <typename T>
    requires std::is_arithmetic_v<T>
void write_le(std::ostream& out, T value) {
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out.write(buf, sizeof(T));
}

inline void write_bytes(std::ostream& out, std::string_view bytes) {
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

class BinaryReader {
public:
    BinaryReader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}

    template <typename T>
        requires std::is_arithmetic_v<T>
    T read(const char* what) {
        char buf[sizeof(T)];
        read_exact(buf, sizeof(T), what);
        T value;
        std::memcpy(&value, buf, sizeof(T));
        return value;
    }

    std::string read_string(std::size_t n, const char* what) {
        std::string s(n, '\0');
        if (n > 0) read_exact(s.data(), n, what);
        return s;
    }

    void read_exact(char* dst, std::size_t n, const char* what) {
        in_.read(dst, static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) {
            throw InputError(path_ + ": truncated file while reading " + what);
        }
        offset_ += n;
    }

    bool at_eof() { return in_.peek() == std::char_traits<char>::eof(); }
    std::uint64_t offset() const noexcept { return offset_; }
    const std::string& path() const noexcept { return path_; }

private:
    std::istream& in_;
    std::string path_;
    std::uint64_t offset_{0};
};

}  // namespace unitrank::detail
