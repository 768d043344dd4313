// Little-endian POD stream helpers shared by the binary containers.
#pragma once

#include <bit>
#include <istream>
#include <ostream>

#include "uasim/common.hpp"

namespace uasim::detail {

static_assert(std::endian::native == std::endian::little,
              "binary containers assume a little-endian host");

template <typename T>
void write_pod(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw IoError("binary read: truncated stream");
    return v;
}

}  // namespace uasim::detail
