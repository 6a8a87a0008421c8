#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <utility>

#include "rgt/error.hpp"

namespace rgt::io {

// Little-endian scalar append.
template <class V>
void put(std::string& out, V v) {
  char bytes[sizeof(V)];
  std::memcpy(bytes, &v, sizeof(V));
  if constexpr (std::endian::native == std::endian::big)
    for (std::size_t i = 0; i < sizeof(V) / 2; ++i) std::swap(bytes[i], bytes[sizeof(V) - 1 - i]);
  out.append(bytes, sizeof(V));
}

inline void put_string(std::string& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

class Reader {
 public:
  Reader(const std::string& data, std::string what) : data_(data), what_(std::move(what)) {}

  template <class V>
  V get() {
    need(sizeof(V));
    V v;
    char bytes[sizeof(V)];
    std::memcpy(bytes, data_.data() + pos_, sizeof(V));
    if constexpr (std::endian::native == std::endian::big)
      for (std::size_t i = 0; i < sizeof(V) / 2; ++i) std::swap(bytes[i], bytes[sizeof(V) - 1 - i]);
    std::memcpy(&v, bytes, sizeof(V));
    pos_ += sizeof(V);
    return v;
  }

  std::string get_string() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  void need(std::size_t n) const {
    if (n > data_.size() - pos_) throw ParseError(pos_, "truncated " + what_);
  }
  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }
  std::size_t position() const { return pos_; }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  const std::string& data_;
  std::string what_;
  std::size_t pos_ = 0;
};

}  // namespace rgt::io
