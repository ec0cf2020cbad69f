#include "ctxlm/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>

namespace ctxlm {

namespace {

std::atomic<bool> g_debug_checks{false};

std::size_t shape_product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void validate_shape(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one axis");
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape));
  }
}

}  // namespace

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

void set_debug_checks(bool enabled) { g_debug_checks.store(enabled); }
bool debug_checks_enabled() { return g_debug_checks.load(std::memory_order_relaxed); }

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  validate_shape(shape_);
  data_.assign(shape_product(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  validate_shape(shape_);
  if (shape_product(shape_) != data_.size()) {
    throw DimensionError("shape " + shape_string(shape_) + " does not match " +
                         std::to_string(data_.size()) + " values");
  }
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

std::size_t Tensor::rows() const {
  if (shape_.size() <= 1) return 1;
  return shape_[0];
}

std::size_t Tensor::cols() const {
  const std::size_t r = rows();
  return r ? data_.size() / r : 0;
}

double Tensor::item() const {
  if (data_.size() != 1) throw DimensionError("item() on tensor of shape " + shape_string(shape_));
  return data_[0];
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Tensor Tensor::reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

namespace kernels {

namespace {

constexpr std::size_t kColTile = 64;
constexpr std::size_t kRowTile = 4;

// c[p x s] += a[p x q] * b[q x s]; every element sums over k in index order.
void axpy_gemm(const double* a, const double* b, double* c, std::size_t p, std::size_t q, std::size_t s,
               bool skip_zero) {
  for (std::size_t j0 = 0; j0 < s; j0 += kColTile) {
    const std::size_t jn = std::min(kColTile, s - j0);
    std::size_t i = 0;
    for (; i + kRowTile <= p; i += kRowTile) {
      double* c0 = c + i * s + j0;
      double* c1 = c0 + s;
      double* c2 = c1 + s;
      double* c3 = c2 + s;
      const double* a0 = a + i * q;
      const double* a1 = a0 + q;
      const double* a2 = a1 + q;
      const double* a3 = a2 + q;
      for (std::size_t k = 0; k < q; ++k) {
        const double* bk = b + k * s + j0;
        const double x0 = a0[k], x1 = a1[k], x2 = a2[k], x3 = a3[k];
        if (skip_zero && (x0 == 0.0 || x1 == 0.0 || x2 == 0.0 || x3 == 0.0)) {
          if (x0 != 0.0)
            for (std::size_t j = 0; j < jn; ++j) c0[j] += x0 * bk[j];
          if (x1 != 0.0)
            for (std::size_t j = 0; j < jn; ++j) c1[j] += x1 * bk[j];
          if (x2 != 0.0)
            for (std::size_t j = 0; j < jn; ++j) c2[j] += x2 * bk[j];
          if (x3 != 0.0)
            for (std::size_t j = 0; j < jn; ++j) c3[j] += x3 * bk[j];
          continue;
        }
        for (std::size_t j = 0; j < jn; ++j) {
          const double bj = bk[j];
          c0[j] += x0 * bj;
          c1[j] += x1 * bj;
          c2[j] += x2 * bj;
          c3[j] += x3 * bj;
        }
      }
    }
    for (; i < p; ++i) {
      double* ci = c + i * s + j0;
      const double* ai = a + i * q;
      for (std::size_t k = 0; k < q; ++k) {
        const double x = ai[k];
        if (skip_zero && x == 0.0) continue;
        const double* bk = b + k * s + j0;
        for (std::size_t j = 0; j < jn; ++j) ci[j] += x * bk[j];
      }
    }
  }
}

}  // namespace

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t p, std::size_t q, std::size_t s) {
  axpy_gemm(a.data(), b.data(), c.data(), p, q, s, true);
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t p, std::size_t q, std::size_t s) {
  // acc = sum_k a[i,k] * b[j,k] in k order, then c[i,j] += acc; b is
  // transposed so the inner loop runs over j.
  std::vector<double> bt(q * s);
  for (std::size_t j = 0; j < s; ++j)
    for (std::size_t k = 0; k < q; ++k) bt[k * s + j] = b[j * q + k];
  std::vector<double> acc(p * s, 0.0);
  axpy_gemm(a.data(), bt.data(), acc.data(), p, q, s, false);
  for (std::size_t i = 0; i < p * s; ++i) c[i] += acc[i];
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t p, std::size_t q, std::size_t s) {
  // c[k, j] accumulates over i in index order.
  for (std::size_t j0 = 0; j0 < s; j0 += kColTile) {
    const std::size_t jn = std::min(kColTile, s - j0);
    for (std::size_t i = 0; i < p; ++i) {
      const double* ai = a.data() + i * q;
      const double* bi = b.data() + i * s + j0;
      for (std::size_t k = 0; k < q; ++k) {
        const double aik = ai[k];
        if (aik == 0.0) continue;
        double* ck = c.data() + k * s + j0;
        for (std::size_t j = 0; j < jn; ++j) ck[j] += aik * bi[j];
      }
    }
  }
}

void softmax_inplace(std::span<double> row) {
  if (row.empty()) throw std::invalid_argument("softmax of an empty row");
  const double mx = *std::max_element(row.begin(), row.end());
  double total = 0.0;
  for (auto& v : row) {
    v = std::exp(v - mx);
    total += v;
  }
  for (auto& v : row) v /= total;
}

double log_sum_exp(std::span<const double> row) {
  if (row.empty()) throw std::invalid_argument("log_sum_exp of an empty row");
  const double mx = *std::max_element(row.begin(), row.end());
  double total = 0.0;
  for (double v : row) total += std::exp(v - mx);
  return mx + std::log(total);
}

long double log_sum_exp_extended(std::span<const double> row) {
  if (row.empty()) throw std::invalid_argument("log_sum_exp of an empty row");
  const long double mx = *std::max_element(row.begin(), row.end());
  long double total = 0.0L;
  for (double v : row) total += std::exp(static_cast<long double>(v) - mx);
  return mx + std::log(total);
}

}  // namespace kernels

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul shape mismatch: " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  Tensor out = Tensor::matrix(a.rows(), b.cols());
  kernels::gemm_nn(a.values(), b.values(), out.values(), a.rows(), a.cols(), b.cols());
  return out;
}

Tensor transpose(const Tensor& a) {
  Tensor out = Tensor::matrix(a.cols(), a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) out.at(c, r) = a.at(r, c);
  return out;
}

}  // namespace ctxlm
