// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0
//
// Fixed-endianness encoding helpers and whole-file I/O.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace dwa {

class ByteWriter {
 public:
  void bytes(std::string_view data) { out_.append(data); }
  void u32_le(std::uint32_t v);
  void u64_le(std::uint64_t v);
  void i32_le(std::int32_t v) { u32_le(static_cast<std::uint32_t>(v)); }
  void f64_le(double v);
  void f64s_le(std::span<const double> vs);

  const std::string& str() const noexcept { return out_; }
  std::size_t size() const noexcept { return out_.size(); }

 private:
  std::string out_;
};

// Bounds-checked reader. Every failure throws DataError naming `origin` and
// the byte offset.
class ByteReader {
 public:
  ByteReader(std::string_view data, std::string origin)
      : data_(data), origin_(std::move(origin)) {}

  std::string_view bytes(std::size_t n, const char* what);
  std::uint8_t u8(const char* what);
  std::uint32_t u32_le(const char* what);
  std::uint32_t u32_be(const char* what);
  std::uint64_t u64_le(const char* what);
  std::int32_t i32_le(const char* what) { return static_cast<std::int32_t>(u32_le(what)); }
  double f64_le(const char* what);
  void f64s_le(std::span<double> out, const char* what);

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  [[noreturn]] void fail(std::size_t offset, const std::string& what) const;

 private:
  void need(std::size_t n, const char* what) const;

  std::string_view data_;
  std::string origin_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::string& path);
// Writes via a temporary sibling and rename. Throws Error when the path is
// not writable.
void write_file(const std::string& path, std::string_view contents);

}  // namespace dwa
