// Copyright 2026 The DWA Distill Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dwa {

// Base for every error raised by the library. The CLI maps the concrete
// subclasses onto exit codes (usage 1, data 2, numeric 3).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid argument or configuration supplied by a caller.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Incompatible tensor shapes. `op()` names the primitive that rejected them.
class ShapeError : public Error {
 public:
  ShapeError(std::string op, const std::string& what)
      : Error(op + ": " + what), op_(std::move(op)) {}
  const std::string& op() const noexcept { return op_; }

 private:
  std::string op_;
};

// Malformed or inconsistent data on disk (bad magic, ragged rows, checksum).
class DataError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf appeared during an iterative procedure. `step()` is the epoch,
// iteration or ascent-step index at which it was detected.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, std::size_t step)
      : Error(what + " (step " + std::to_string(step) + ")"), detail_(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }
  // The message without the step suffix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string detail_;
  std::size_t step_;
};

}  // namespace dwa
