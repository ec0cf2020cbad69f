#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctxlm {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

/// Raised when operand shapes are incompatible. The message names both shapes.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised by debug-check mode when an op produces NaN or Inf.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense row-major array of doubles.
///
/// Every op in the engine views a tensor as a matrix: a rank-1 tensor of
/// length k is a 1 x k row, and higher ranks fold trailing axes into the
/// columns (a {f, e, r} tensor is an f x (e*r) matrix).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return Tensor({rows, cols}, fill);
  }
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor vector(std::initializer_list<double> values);
  static Tensor scalar(double value) { return Tensor({1, 1}, value); }
  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_, 0.0); }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  std::size_t rows() const;
  std::size_t cols() const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double item() const;

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols(), cols()}; }

  void fill(double value);
  /// Same data, new shape with equal element count.
  Tensor reshaped(Shape shape) const;
  bool all_finite() const;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Process-wide switch for NaN/Inf scanning after every tape op.
void set_debug_checks(bool enabled);
bool debug_checks_enabled();

namespace kernels {

// Each output element accumulates over the shared axis in index order, so a
// row's result never depends on how many other rows are in the operand.

/// c[p x s] += a[p x q] * b[q x s]
void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t p, std::size_t q, std::size_t s);
/// c[p x s] += a[p x q] * b[s x q]^T
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t p, std::size_t q, std::size_t s);
/// c[q x s] += a[p x q]^T * b[p x s]
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t p, std::size_t q, std::size_t s);

/// In-place numerically stable softmax of one row.
void softmax_inplace(std::span<double> row);
/// log(sum(exp(row))) with max-subtraction.
double log_sum_exp(std::span<const double> row);
/// Same in extended precision, for accumulating log-probabilities.
long double log_sum_exp_extended(std::span<const double> row);

}  // namespace kernels

/// Plain (untracked) matrix product, used by tests and analysis code.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

}  // namespace ctxlm
