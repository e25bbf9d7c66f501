// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0

#include "dwa/binary_io.h"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dwa/errors.h"

namespace dwa {

void ByteWriter::u32_le(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void ByteWriter::u64_le(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void ByteWriter::f64_le(double v) { u64_le(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::f64s_le(std::span<const double> vs) {
  for (double v : vs) f64_le(v);
}

void ByteReader::fail(std::size_t offset, const std::string& what) const {
  throw DataError(origin_ + ": byte offset " + std::to_string(offset) + ": " + what);
}

void ByteReader::need(std::size_t n, const char* what) const {
  if (remaining() < n) {
    fail(pos_, std::string("truncated while reading ") + what + " (need " + std::to_string(n) +
                   " bytes, " + std::to_string(remaining()) + " left)");
  }
}

std::string_view ByteReader::bytes(std::size_t n, const char* what) {
  need(n, what);
  std::string_view out = data_.substr(pos_, n);
  pos_ += n;
  return out;
}

std::uint8_t ByteReader::u8(const char* what) {
  need(1, what);
  return static_cast<std::uint8_t>(data_[pos_++]);
}

std::uint32_t ByteReader::u32_le(const char* what) {
  need(4, what);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(data_[pos_ + i])) << (8 * i);
  }
  pos_ += 4;
  return v;
}

std::uint32_t ByteReader::u32_be(const char* what) {
  need(4, what);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v = (v << 8) | static_cast<std::uint8_t>(data_[pos_ + i]);
  }
  pos_ += 4;
  return v;
}

std::uint64_t ByteReader::u64_le(const char* what) {
  need(8, what);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(data_[pos_ + i])) << (8 * i);
  }
  pos_ += 8;
  return v;
}

double ByteReader::f64_le(const char* what) { return std::bit_cast<double>(u64_le(what)); }

void ByteReader::f64s_le(std::span<double> out, const char* what) {
  need(out.size() * 8, what);
  for (double& v : out) v = f64_le(what);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path + ": cannot open for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, std::string_view contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(path + ": cannot open for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(path + ": write failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(path + ": " + ec.message());
}

}  // namespace dwa
