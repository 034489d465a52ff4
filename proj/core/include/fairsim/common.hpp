#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace fairsim {

inline constexpr const char* kVersion = "0.1.0";

// Bad arguments, malformed files, violated preconditions.  CLI exit code 2.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

// State spaces or work sizes beyond what exact enumeration supports.  CLI exit code 3.
class CapacityError : public std::runtime_error {
 public:
  explicit CapacityError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite loss during training.  CLI exit code 4.
class TrainingDivergenceError : public std::runtime_error {
 public:
  TrainingDivergenceError(int epoch, double loss, const std::string& what)
      : std::runtime_error(what), epoch(epoch), loss(loss) {}
  int epoch;
  double loss;
};

// Dense row-major matrix of doubles.  Minimal on purpose: the models in this
// project are small enough that hand-rolled loops beat pulling in a linear
// algebra dependency.
struct Matrix {
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows(rows), cols(cols), v(rows * cols, fill) {}

  double& at(std::size_t r, std::size_t c) { return v[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
  double* row(std::size_t r) { return v.data() + r * cols; }
  const double* row(std::size_t r) const { return v.data() + r * cols; }

  bool operator==(const Matrix&) const = default;

  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> v;
};

}  // namespace fairsim
