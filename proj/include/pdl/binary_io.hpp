#pragma once

#include "pdl/errors.hpp"

#include <bit>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace pdl::binary {

/// Little-endian append of an integer or 64-bit float.
template <typename T>
void put(std::string& out, T value) {
  static_assert(sizeof(T) <= 8);
  std::uint64_t bits = 0;
  if constexpr (std::is_floating_point_v<T>) bits = std::bit_cast<std::uint64_t>(value);
  else bits = static_cast<std::uint64_t>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFU));
}

class Reader {
 public:
  Reader(std::string_view bytes, std::string label) : bytes_(bytes), label_(std::move(label)) {}

  template <typename T>
  T get(const char* what) {
    if (bytes_.size() - pos_ < sizeof(T)) throw ParseError(label_ + " truncated reading " + what, pos_);
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    if constexpr (std::is_floating_point_v<T>) return std::bit_cast<T>(bits);
    else return static_cast<T>(bits);
  }

  std::string_view take(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) throw ParseError(label_ + " truncated reading " + what, pos_);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::string_view bytes_;
  std::string label_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace pdl::binary
