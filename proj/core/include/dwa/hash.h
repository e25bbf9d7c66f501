// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <string_view>

namespace dwa {

// Incremental 64-bit FNV-1a. Multi-byte values are fed little-endian so the
// digest is platform independent.
class Fnv1a {
 public:
  Fnv1a& bytes(std::span<const unsigned char> data) {
    for (unsigned char b : data) {
      state_ ^= b;
      state_ *= 0x100000001B3ULL;
    }
    return *this;
  }
  Fnv1a& text(std::string_view s) {
    return bytes({reinterpret_cast<const unsigned char*>(s.data()), s.size()});
  }
  Fnv1a& u64(std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    return bytes(buf);
  }
  Fnv1a& f64(double v) { return u64(std::bit_cast<std::uint64_t>(v)); }
  Fnv1a& f64s(std::span<const double> vs) {
    for (double v : vs) f64(v);
    return *this;
  }
  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = 0xCBF29CE484222325ULL;
};

inline std::uint64_t fnv1a64(std::string_view s) { return Fnv1a().text(s).digest(); }

}  // namespace dwa
