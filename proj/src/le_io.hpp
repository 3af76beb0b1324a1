#pragma once

#include <algorithm>
#include <bit>
#include <cstring>
#include <istream>
#include <ostream>
#include <vector>

#include "connectome/error.hpp"

namespace connectome::detail {

template <typename T>
void write_le(std::ostream& os, const std::vector<T>& data) {
  if constexpr (std::endian::native == std::endian::little || sizeof(T) == 1) {
    os.write(reinterpret_cast<const char*>(data.data()),
             static_cast<std::streamsize>(data.size() * sizeof(T)));
  } else {
    for (const T& v : data) {
      unsigned char bytes[sizeof(T)];
      std::memcpy(bytes, &v, sizeof(T));
      for (std::size_t b = sizeof(T); b-- > 0;) os.put(static_cast<char>(bytes[b]));
    }
  }
}

template <typename T>
void read_le(std::istream& is, std::vector<T>& data, std::size_t count) {
  data.resize(count);
  is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(count * sizeof(T)));
  require(static_cast<std::size_t>(is.gcount()) == count * sizeof(T), Errc::format,
          "payload shorter than the header implies");
  if constexpr (std::endian::native != std::endian::little && sizeof(T) > 1) {
    for (T& v : data) {
      unsigned char bytes[sizeof(T)];
      std::memcpy(bytes, &v, sizeof(T));
      std::reverse(bytes, bytes + sizeof(T));
      std::memcpy(&v, bytes, sizeof(T));
    }
  }
}

}  // namespace connectome::detail
