#pragma once

#include <stdexcept>
#include <string>

namespace hodmd {

// Bad or inconsistent input data: files, schemas, shapes, preconditions on data.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// A numerical procedure failed: non-convergence, instability, degenerate factorization.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace hodmd
