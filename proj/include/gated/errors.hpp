#pragma once

#include <stdexcept>
#include <string>

namespace gated {

/// Base class for every recoverable failure raised by the library.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (negative time, z > 1, ...).
class domain_error : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A moment integral whose tail does not decay.
class divergent_moment_error : public error {
 public:
  using error::error;
};

/// Model parameters outside the regime where the analytic system is defined.
class out_of_regime_error : public error {
 public:
  using error::error;
};

class assembly_error : public error {
 public:
  assembly_error(int row, int col, const std::string& what)
      : error("non-finite coefficient at (" + std::to_string(row) + "," + std::to_string(col) +
              "): " + what),
        row_(row),
        col_(col) {}
  int row() const noexcept { return row_; }
  int col() const noexcept { return col_; }

 private:
  int row_;
  int col_;
};

class singular_system_error : public error {
 public:
  singular_system_error(int step, double pivot)
      : error("numerically singular pivot at step " + std::to_string(step) +
              " (|pivot| = " + std::to_string(pivot) + ")"),
        step_(step),
        pivot_(pivot) {}
  int step() const noexcept { return step_; }
  double pivot() const noexcept { return pivot_; }

 private:
  int step_;
  double pivot_;
};

class zero_diagonal_error : public error {
 public:
  explicit zero_diagonal_error(int row)
      : error("zero diagonal entry in row " + std::to_string(row)), row_(row) {}
  int row() const noexcept { return row_; }

 private:
  int row_;
};

class insufficient_data_error : public error {
 public:
  using error::error;
};

/// Raised when an operation needs a converged solution and is handed an unconverged one.
class unconverged_error : public error {
 public:
  using error::error;
};

class invalid_config_error : public error {
 public:
  using error::error;
};

}  // namespace gated
