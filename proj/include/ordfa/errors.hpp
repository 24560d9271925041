#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ordfa {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Threshold vector not strictly increasing.
class OrderingError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

/// Raised by Cholesky when a pivot is not positive.
class NotPositiveDefinite : public Error {
 public:
  NotPositiveDefinite(std::size_t index, double pivot)
      : Error("matrix is not positive definite: pivot " + std::to_string(index) +
              " is " + std::to_string(pivot)),
        index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or out-of-range input data.
class DataError : public Error {
 public:
  using Error::Error;
};

class SamplerError : public Error {
 public:
  using Error::Error;
};

}  // namespace ordfa
