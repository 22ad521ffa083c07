// Copyright 2026 The lsapcvae Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace lsap {

// Base of everything the library throws on bad input or bad files.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInputError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class InfeasibleAssignmentError : public Error {
 public:
  enum class Axis { kRow, kColumn };

  InfeasibleAssignmentError(Axis axis, std::size_t index, double sum)
      : Error(std::string(axis == Axis::kRow ? "row " : "column ") + std::to_string(index) +
              " sums to " + std::to_string(sum) + ", expected 1"),
        axis_(axis),
        index_(index) {}

  Axis axis() const noexcept { return axis_; }
  std::size_t index() const noexcept { return index_; }

 private:
  Axis axis_;
  std::size_t index_;
};

class SizeLimitError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class TruncatedFileError : public FormatError {
 public:
  using FormatError::FormatError;
};

class TrainingDivergedError : public Error {
 public:
  using Error::Error;
};

}  // namespace lsap
