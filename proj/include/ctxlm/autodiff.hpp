#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ctxlm/tensor.hpp"

namespace ctxlm {

/// A trainable tensor together with its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros_like(value)) {}

  void zero_grad() { grad = Tensor::zeros_like(value); }
};

/// Handle to a node on a Tape. Only meaningful for the tape that produced it.
struct Var {
  std::size_t index = static_cast<std::size_t>(-1);
  bool valid() const { return index != static_cast<std::size_t>(-1); }
};

/// Append-only record of tensor operations for reverse-mode differentiation.
///
/// Build one tape per forward/backward step and drop it afterwards. Parameter
/// leaves read their value from the Parameter in place and backward()
/// accumulates straight into Parameter::grad, so the parameters must outlive
/// the tape.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var parameter(Parameter& p);
  /// Read-only leaf over a parameter value; no gradient flows into it.
  Var frozen(const Parameter& p);

  const Tensor& value(Var v) const;
  /// Gradient of the last backward() target with respect to v. Parameters
  /// report their Parameter::grad.
  const Tensor& grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.index].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Seeds d(target)/d(target) = 1 for a 1x1 target and propagates.
  void backward(Var target);

  // --- ops; all operate on the matrix view of their operands ---
  Var matmul(Var a, Var b);
  /// a * b^T
  Var matmul_nt(Var a, Var b);
  Var add(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double factor);
  /// Same values under a new shape with equal element count.
  Var reshape(Var a, Shape shape);
  /// a[B x n] + bias[1 x n] broadcast over rows.
  Var add_row(Var a, Var bias);
  /// a[B x n] scaled row-wise by c[B x 1].
  Var mul_col(Var a, Var c);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var slice_cols(Var a, std::size_t begin, std::size_t count);
  Var slice_rows(Var a, std::size_t begin, std::size_t count);
  Var concat_cols(std::span<const Var> parts);
  Var concat_rows(std::span<const Var> parts);
  /// Rows of a table selected by ids; backward scatter-adds.
  Var gather_rows(Var table, std::span<const std::size_t> ids);
  /// Row-wise dot product: [B x n], [B x n] -> [B x 1].
  Var row_dot(Var a, Var b);
  /// Per-row vector-matrix product: x[B x n] with mats[B x (n*k)] holding a
  /// row-major n x k matrix per row -> [B x k].
  Var batched_vecmat(Var x, Var mats, std::size_t k);
  /// Row-wise softmax.
  Var softmax_rows(Var a);
  /// Sum of all elements -> [1 x 1].
  Var sum(Var a);
  /// Weighted negative log-likelihood of target columns under row
  /// distributions: sum_b w_b * -ln(probs[b, t_b]) -> [1 x 1].
  Var cross_entropy(Var probs, std::span<const std::size_t> targets, std::span<const double> weights);
  /// Fused log-softmax + weighted NLL from logits -> [1 x 1].
  Var softmax_cross_entropy(Var logits, std::span<const std::size_t> targets, std::span<const double> weights);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    Parameter* param = nullptr;
    const Tensor* external = nullptr;
    bool requires_grad = false;
    std::function<void(Tape&)> backward;
  };

  Var push(Tensor value, bool requires_grad, std::function<void(Tape&)> backward);
  Tensor& grad_buffer(std::size_t index);
  const Tensor& upstream(std::size_t index) const { return nodes_[index].grad; }
  void check(const Node& node, const char* op) const;

  std::vector<Node> nodes_;
};

}  // namespace ctxlm
