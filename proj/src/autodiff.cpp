#include "ctxlm/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace ctxlm {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + " shape mismatch: " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

Tensor matrix_like(std::size_t rows, std::size_t cols) { return Tensor::matrix(rows, cols); }

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double z = std::exp(x);
  return z / (1.0 + z);
}

}  // namespace

Var Tape::push(Tensor value, bool requires_grad, std::function<void(Tape&)> backward) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  if (requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

void Tape::check(const Node& node, const char* op) const {
  if (!node.value.all_finite()) throw NonFiniteError(std::string("non-finite value produced by ") + op);
}

Var Tape::constant(Tensor value) {
  if (debug_checks_enabled() && !value.all_finite()) throw NonFiniteError("non-finite constant");
  return push(std::move(value), false, nullptr);
}

Var Tape::parameter(Parameter& p) {
  if (p.grad.shape() != p.value.shape()) p.zero_grad();
  Node node;
  node.param = &p;
  node.requires_grad = true;
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

Var Tape::frozen(const Parameter& p) {
  Node node;
  node.external = &p.value;
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

const Tensor& Tape::value(Var v) const {
  const Node& n = nodes_.at(v.index);
  if (n.param) return n.param->value;
  if (n.external) return *n.external;
  return n.value;
}

const Tensor& Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.index);
  return n.param ? n.param->grad : n.grad;
}

Tensor& Tape::grad_buffer(std::size_t index) {
  Node& n = nodes_[index];
  if (n.param) return n.param->grad;
  if (n.grad.empty()) {
    const Tensor& v = n.value;
    n.grad = Tensor::zeros_like(v);
  }
  return n.grad;
}

void Tape::backward(Var target) {
  const Tensor& tv = value(target);
  if (tv.size() != 1) throw DimensionError("backward target must be 1x1, got " + shape_string(tv.shape()));
  if (!nodes_[target.index].requires_grad) return;
  grad_buffer(target.index)[0] += 1.0;
  for (std::size_t i = target.index + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.empty()) continue;
    n.backward(*this);
  }
}

// The closures below capture node indices, never references: nodes_ may
// reallocate as the tape grows.

Var Tape::matmul(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (av.cols() != bv.rows()) {
    throw DimensionError("matmul shape mismatch: " + shape_string(av.shape()) + " x " + shape_string(bv.shape()));
  }
  const std::size_t p = av.rows(), q = av.cols(), s = bv.cols();
  Tensor out = matrix_like(p, s);
  kernels::gemm_nn(av.values(), bv.values(), out.values(), p, q, s);
  const std::size_t self = nodes_.size();
  const bool rg = requires_grad(a) || requires_grad(b);
  Var r = push(std::move(out), rg, [a, b, self, p, q, s](Tape& t) {
    const Tensor& g = t.upstream(self);
    if (t.requires_grad(a)) kernels::gemm_nt(g.values(), t.value(b).values(), t.grad_buffer(a.index).values(), p, s, q);
    if (t.requires_grad(b)) kernels::gemm_tn(t.value(a).values(), g.values(), t.grad_buffer(b.index).values(), p, q, s);
  });
  if (debug_checks_enabled()) check(nodes_[r.index], "matmul");
  return r;
}

Var Tape::matmul_nt(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (av.cols() != bv.cols()) {
    throw DimensionError("matmul_nt shape mismatch: " + shape_string(av.shape()) + " x " +
                         shape_string(bv.shape()) + "^T");
  }
  const std::size_t p = av.rows(), q = av.cols(), s = bv.rows();
  Tensor out = matrix_like(p, s);
  kernels::gemm_nt(av.values(), bv.values(), out.values(), p, q, s);
  const std::size_t self = nodes_.size();
  const bool rg = requires_grad(a) || requires_grad(b);
  Var r = push(std::move(out), rg, [a, b, self, p, q, s](Tape& t) {
    const Tensor& g = t.upstream(self);  // p x s
    if (t.requires_grad(a)) kernels::gemm_nn(g.values(), t.value(b).values(), t.grad_buffer(a.index).values(), p, s, q);
    if (t.requires_grad(b)) kernels::gemm_tn(g.values(), t.value(a).values(), t.grad_buffer(b.index).values(), p, s, q);
  });
  if (debug_checks_enabled()) check(nodes_[r.index], "matmul_nt");
  return r;
}

Var Tape::add(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  require_same_shape(av, bv, "add");
  Tensor out = Tensor::matrix(av.rows(), av.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  const std::size_t self = nodes_.size();
  Var r = push(std::move(out), requires_grad(a) || requires_grad(b), [a, b, self](Tape& t) {
    const Tensor& g = t.upstream(self);
    for (Var in : {a, b}) {
      if (!t.requires_grad(in)) continue;
      Tensor& ga = t.grad_buffer(in.index);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
  });
  if (debug_checks_enabled()) check(nodes_[r.index], "add");
  return r;
}

Var Tape::mul(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  require_same_shape(av, bv, "mul");
  Tensor out = Tensor::matrix(av.rows(), av.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  const std::size_t self = nodes_.size();
  Var r = push(std::move(out), requires_grad(a) || requires_grad(b), [a, b, self](Tape& t) {
    const Tensor& g = t.upstream(self);
    if (t.requires_grad(a)) {
      const Tensor& bv = t.value(b);
      Tensor& ga = t.grad_buffer(a.index);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.requires_grad(b)) {
      const Tensor& av = t.value(a);
      Tensor& gb = t.grad_buffer(b.index);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
  if (debug_checks_enabled()) check(nodes_[r.index], "mul");
  return r;
}

Var Tape::scale(Var a, double factor) {
  const Tensor& av = value(a);
  Tensor out = Tensor::matrix(av.rows(), av.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * factor;
  const std::size_t self = nodes_.size();
  Var r = push(std::move(out), requires_grad(a), [a, self, factor](Tape& t) {
    const Tensor& g = t.upstream(self);
    Tensor& ga = t.grad_buffer(a.index);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
  });
  if (debug_checks_enabled()) check(nodes_[r.index], "scale");
  return r;
}

Var Tape::reshape(Var a, Shape shape) {
  Tensor out = value(a).reshaped(std::move(shape));
  const std::size_t self = nodes_.size();
  return push(std::move(out), requires_grad(a), [a, self](Tape& t) {
    const Tensor& g = t.upstream(self);
    Tensor& ga = t.grad_buffer(a.index);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Var Tape::add_row(Var a, Var bias) {
  const Tensor& av = value(a);
  const Tensor& bv = value(bias);
  if (bv.size() != av.cols()) {
    throw DimensionError("add_row shape mismatch: " + shape_string(av.shape()) + " + " + shape_string(bv.shape()));
  }
  const std::size_t rows = av.rows(), cols = av.cols();
  Tensor out = Tensor::matrix(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = av[r * cols + c] + bv[c];
  const std::size_t self = nodes_.size();
  Var r = push(std::move(out), requires_grad(a) || requires_grad(bias), [a, bias, self, rows, cols](Tape& t) {
    const Tensor& g = t.upstream(self);
    if (t.requires_grad(a)) {
      Tensor& ga = t.grad_buffer(a.index);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (t.requires_grad(bias)) {
      Tensor& gb = t.grad_buffer(bias.index);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) gb[c] += g[r * cols + c];
    }
  });
  if (debug_checks_enabled()) check(nodes_[r.index], "add_row");
  return r;
}

Var Tape::mul_col(Var a, Var c) {
  const Tensor& av = value(a);
  const Tensor& cv = value(c);
  if (cv.size() != av.rows()) {
    throw DimensionError("mul_col shape mismatch: " + shape_string(av.shape()) + " * " + shape_string(cv.shape()));
  }
  const std::size_t rows = av.rows(), cols = av.cols();
  Tensor out = Tensor::matrix(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t k = 0; k < cols; ++k) out[r * cols + k] = av[r * cols + k] * cv[r];
  const std::size_t self = nodes_.size();
  Var r = push(std::move(out), requires_grad(a) || requires_grad(c), [a, c, self, rows, cols](Tape& t) {
    const Tensor& g = t.upstream(self);
    if (t.requires_grad(a)) {
      const Tensor& cv = t.value(c);
      Tensor& ga = t.grad_buffer(a.index);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t k = 0; k < cols; ++k) ga[r * cols + k] += g[r * cols + k] * cv[r];
    }
    if (t.requires_grad(c)) {
      const Tensor& av = t.value(a);
      Tensor& gc = t.grad_buffer(c.index);
      for (std::size_t r = 0; r < rows; ++r) {
        double acc = 0.0;
        for (std::size_t k = 0; k < cols; ++k) acc += g[r * cols + k] * av[r * cols + k];
        gc[r] += acc;
      }
    }
  });
  if (debug_checks_enabled()) check(nodes_[r.index], "mul_col");
  return r;
}

Var Tape::sigmoid(Var a) {
  const Tensor& av = value(a);
  Tensor out = Tensor::matrix(av.rows(), av.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = stable_sigmoid(av[i]);
  const std::size_t self = nodes_.size();
  Var r = push(std::move(out), requires_grad(a), [a, self](Tape& t) {
    const Tensor& g = t.upstream(self);
    const Tensor& y = t.nodes_[self].value;
    Tensor& ga = t.grad_buffer(a.index);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
  });
  if (debug_checks_enabled()) check(nodes_[r.index], "sigmoid");
  return r;
}

Var Tape::tanh(Var a) {
  const Tensor& av = value(a);
  Tensor out = Tensor::matrix(av.rows(), av.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(av[i]);
  const std::size_t self = nodes_.size();
  Var r = push(std::move(out), requires_grad(a), [a, self](Tape& t) {
    const Tensor& g = t.upstream(self);
    const Tensor& y = t.nodes_[self].value;
    Tensor& ga = t.grad_buffer(a.index);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
  });
  if (debug_checks_enabled()) check(nodes_[r.index], "tanh");
  return r;
}

Var Tape::slice_cols(Var a, std::size_t begin, std::size_t count) {
  const Tensor& av = value(a);
  const std::size_t rows = av.rows(), cols = av.cols();
  if (count == 0 || begin + count > cols) {
    throw DimensionError("slice_cols [" + std::to_string(begin) + ", +" + std::to_string(count) + ") out of " +
                         shape_string(av.shape()));
  }
  Tensor out = Tensor::matrix(rows, count);
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(av.data() + r * cols + begin, count, out.data() + r * count);
  const std::size_t self = nodes_.size();
  return push(std::move(out), requires_grad(a), [a, self, rows, cols, begin, count](Tape& t) {
    const Tensor& g = t.upstream(self);
    Tensor& ga = t.grad_buffer(a.index);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t k = 0; k < count; ++k) ga[r * cols + begin + k] += g[r * count + k];
  });
}

Var Tape::slice_rows(Var a, std::size_t begin, std::size_t count) {
  const Tensor& av = value(a);
  const std::size_t rows = av.rows(), cols = av.cols();
  if (count == 0 || begin + count > rows) {
    throw DimensionError("slice_rows [" + std::to_string(begin) + ", +" + std::to_string(count) + ") out of " +
                         shape_string(av.shape()));
  }
  Tensor out = Tensor::matrix(count, cols);
  std::copy_n(av.data() + begin * cols, count * cols, out.data());
  const std::size_t self = nodes_.size();
  return push(std::move(out), requires_grad(a), [a, self, cols, begin](Tape& t) {
    const Tensor& g = t.upstream(self);
    Tensor& ga = t.grad_buffer(a.index);
    double* dst = ga.data() + begin * cols;
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
  });
}

Var Tape::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols of zero tensors");
  const std::size_t rows = value(parts[0]).rows();
  std::size_t total = 0;
  bool rg = false;
  for (Var p : parts) {
    const Tensor& pv = value(p);
    if (pv.rows() != rows) {
      throw DimensionError("concat_cols row mismatch: " + shape_string(value(parts[0]).shape()) + " vs " +
                           shape_string(pv.shape()));
    }
    total += pv.cols();
    rg = rg || requires_grad(p);
  }
  Tensor out = Tensor::matrix(rows, total);
  std::size_t offset = 0;
  for (Var p : parts) {
    const Tensor& pv = value(p);
    const std::size_t c = pv.cols();
    for (std::size_t r = 0; r < rows; ++r) std::copy_n(pv.data() + r * c, c, out.data() + r * total + offset);
    offset += c;
  }
  const std::size_t self = nodes_.size();
  std::vector<Var> inputs(parts.begin(), parts.end());
  return push(std::move(out), rg, [inputs, self, rows, total](Tape& t) {
    const Tensor& g = t.upstream(self);
    std::size_t offset = 0;
    for (Var p : inputs) {
      const std::size_t c = t.value(p).cols();
      if (t.requires_grad(p)) {
        Tensor& gp = t.grad_buffer(p.index);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t k = 0; k < c; ++k) gp[r * c + k] += g[r * total + offset + k];
      }
      offset += c;
    }
  });
}

Var Tape::concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_rows of zero tensors");
  const std::size_t cols = value(parts[0]).cols();
  std::size_t rows = 0;
  bool rg = false;
  for (Var p : parts) {
    const Tensor& pv = value(p);
    if (pv.cols() != cols) {
      throw DimensionError("concat_rows column mismatch: " + shape_string(value(parts[0]).shape()) + " vs " +
                           shape_string(pv.shape()));
    }
    rows += pv.rows();
    rg = rg || requires_grad(p);
  }
  Tensor out = Tensor::matrix(rows, cols);
  std::size_t offset = 0;
  for (Var p : parts) {
    const Tensor& pv = value(p);
    std::copy_n(pv.data(), pv.size(), out.data() + offset);
    offset += pv.size();
  }
  const std::size_t self = nodes_.size();
  std::vector<Var> inputs(parts.begin(), parts.end());
  return push(std::move(out), rg, [inputs, self](Tape& t) {
    const Tensor& g = t.upstream(self);
    std::size_t offset = 0;
    for (Var p : inputs) {
      const std::size_t n = t.value(p).size();
      if (t.requires_grad(p)) {
        Tensor& gp = t.grad_buffer(p.index);
        for (std::size_t i = 0; i < n; ++i) gp[i] += g[offset + i];
      }
      offset += n;
    }
  });
}

Var Tape::gather_rows(Var table, std::span<const std::size_t> ids) {
  const Tensor& tv = value(table);
  const std::size_t rows = tv.rows(), cols = tv.cols();
  if (ids.empty()) throw DimensionError("gather_rows with no ids");
  Tensor out = Tensor::matrix(ids.size(), cols);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= rows) {
      throw DimensionError("gather_rows id " + std::to_string(ids[i]) + " out of table " + shape_string(tv.shape()));
    }
    std::copy_n(tv.data() + ids[i] * cols, cols, out.data() + i * cols);
  }
  const std::size_t self = nodes_.size();
  std::vector<std::size_t> idx(ids.begin(), ids.end());
  return push(std::move(out), requires_grad(table), [table, self, cols, idx = std::move(idx)](Tape& t) {
    const Tensor& g = t.upstream(self);
    Tensor& gt = t.grad_buffer(table.index);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      double* dst = gt.data() + idx[i] * cols;
      const double* src = g.data() + i * cols;
      for (std::size_t k = 0; k < cols; ++k) dst[k] += src[k];
    }
  });
}

Var Tape::row_dot(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  require_same_shape(av, bv, "row_dot");
  const std::size_t rows = av.rows(), cols = av.cols();
  Tensor out = Tensor::matrix(rows, 1);
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t k = 0; k < cols; ++k) acc += av[r * cols + k] * bv[r * cols + k];
    out[r] = acc;
  }
  const std::size_t self = nodes_.size();
  Var r = push(std::move(out), requires_grad(a) || requires_grad(b), [a, b, self, rows, cols](Tape& t) {
    const Tensor& g = t.upstream(self);
    if (t.requires_grad(a)) {
      const Tensor& bv = t.value(b);
      Tensor& ga = t.grad_buffer(a.index);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t k = 0; k < cols; ++k) ga[r * cols + k] += g[r] * bv[r * cols + k];
    }
    if (t.requires_grad(b)) {
      const Tensor& av = t.value(a);
      Tensor& gb = t.grad_buffer(b.index);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t k = 0; k < cols; ++k) gb[r * cols + k] += g[r] * av[r * cols + k];
    }
  });
  if (debug_checks_enabled()) check(nodes_[r.index], "row_dot");
  return r;
}

Var Tape::batched_vecmat(Var x, Var mats, std::size_t k) {
  const Tensor& xv = value(x);
  const Tensor& mv = value(mats);
  const std::size_t rows = xv.rows(), n = xv.cols();
  if (mv.rows() != rows || mv.cols() != n * k) {
    throw DimensionError("batched_vecmat shape mismatch: " + shape_string(xv.shape()) + " with " +
                         shape_string(mv.shape()) + " as " + std::to_string(n) + "x" + std::to_string(k) +
                         " matrices");
  }
  Tensor out = Tensor::matrix(rows, k);
  for (std::size_t r = 0; r < rows; ++r) {
    kernels::gemm_nn(xv.values().subspan(r * n, n), mv.values().subspan(r * n * k, n * k),
                     out.values().subspan(r * k, k), 1, n, k);
  }
  const std::size_t self = nodes_.size();
  Var r = push(std::move(out), requires_grad(x) || requires_grad(mats), [x, mats, self, rows, n, k](Tape& t) {
    const Tensor& g = t.upstream(self);
    if (t.requires_grad(x)) {
      const Tensor& mv = t.value(mats);
      Tensor& gx = t.grad_buffer(x.index);
      for (std::size_t r = 0; r < rows; ++r) {
        kernels::gemm_nt(g.values().subspan(r * k, k), mv.values().subspan(r * n * k, n * k),
                         gx.values().subspan(r * n, n), 1, k, n);
      }
    }
    if (t.requires_grad(mats)) {
      const Tensor& xv = t.value(x);
      Tensor& gm = t.grad_buffer(mats.index);
      for (std::size_t r = 0; r < rows; ++r) {
        kernels::gemm_tn(xv.values().subspan(r * n, n), g.values().subspan(r * k, k),
                         gm.values().subspan(r * n * k, n * k), 1, n, k);
      }
    }
  });
  if (debug_checks_enabled()) check(nodes_[r.index], "batched_vecmat");
  return r;
}

Var Tape::softmax_rows(Var a) {
  const Tensor& av = value(a);
  const std::size_t rows = av.rows(), cols = av.cols();
  Tensor out(Shape{rows, cols}, std::vector<double>(av.storage()));
  for (std::size_t r = 0; r < rows; ++r) kernels::softmax_inplace(out.row(r));
  const std::size_t self = nodes_.size();
  Var r = push(std::move(out), requires_grad(a), [a, self, rows, cols](Tape& t) {
    const Tensor& g = t.upstream(self);
    const Tensor& y = t.nodes_[self].value;
    Tensor& ga = t.grad_buffer(a.index);
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t k = 0; k < cols; ++k) dot += g[r * cols + k] * y[r * cols + k];
      for (std::size_t k = 0; k < cols; ++k) ga[r * cols + k] += y[r * cols + k] * (g[r * cols + k] - dot);
    }
  });
  if (debug_checks_enabled()) check(nodes_[r.index], "softmax_rows");
  return r;
}

Var Tape::sum(Var a) {
  const Tensor& av = value(a);
  double total = 0.0;
  for (double v : av.values()) total += v;
  const std::size_t self = nodes_.size();
  return push(Tensor::scalar(total), requires_grad(a), [a, self](Tape& t) {
    const double g = t.upstream(self)[0];
    Tensor& ga = t.grad_buffer(a.index);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
  });
}

Var Tape::cross_entropy(Var probs, std::span<const std::size_t> targets, std::span<const double> weights) {
  const Tensor& pv = value(probs);
  const std::size_t rows = pv.rows(), cols = pv.cols();
  if (targets.size() != rows || weights.size() != rows) {
    throw DimensionError("cross_entropy expects one target and weight per row of " + shape_string(pv.shape()));
  }
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] >= cols) {
      throw std::out_of_range("cross_entropy target " + std::to_string(targets[r]) + " out of range for " +
                              std::to_string(cols) + " classes");
    }
    if (weights[r] != 0.0) total += -weights[r] * std::log(pv[r * cols + targets[r]]);
  }
  const std::size_t self = nodes_.size();
  std::vector<std::size_t> tg(targets.begin(), targets.end());
  std::vector<double> wt(weights.begin(), weights.end());
  Var r = push(Tensor::scalar(total), requires_grad(probs), [probs, self, cols, tg = std::move(tg), wt = std::move(wt)](Tape& t) {
    const double g = t.upstream(self)[0];
    const Tensor& pv = t.value(probs);
    Tensor& gp = t.grad_buffer(probs.index);
    for (std::size_t r = 0; r < tg.size(); ++r) {
      if (wt[r] == 0.0) continue;
      gp[r * cols + tg[r]] += -g * wt[r] / pv[r * cols + tg[r]];
    }
  });
  if (debug_checks_enabled()) check(nodes_[r.index], "cross_entropy");
  return r;
}

Var Tape::softmax_cross_entropy(Var logits, std::span<const std::size_t> targets, std::span<const double> weights) {
  const Tensor& lv = value(logits);
  const std::size_t rows = lv.rows(), cols = lv.cols();
  if (targets.size() != rows || weights.size() != rows) {
    throw DimensionError("softmax_cross_entropy expects one target and weight per row of " + shape_string(lv.shape()));
  }
  double total = 0.0;
  std::vector<double> lse(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] >= cols) {
      throw std::out_of_range("softmax_cross_entropy target " + std::to_string(targets[r]) + " out of range for " +
                              std::to_string(cols) + " classes");
    }
    if (weights[r] == 0.0) continue;
    lse[r] = kernels::log_sum_exp(lv.row(r));
    total += weights[r] * (lse[r] - lv[r * cols + targets[r]]);
  }
  const std::size_t self = nodes_.size();
  std::vector<std::size_t> tg(targets.begin(), targets.end());
  std::vector<double> wt(weights.begin(), weights.end());
  Var r = push(Tensor::scalar(total), requires_grad(logits),
               [logits, self, cols, tg = std::move(tg), wt = std::move(wt), lse = std::move(lse)](Tape& t) {
                 const double g = t.upstream(self)[0];
                 const Tensor& lv = t.value(logits);
                 Tensor& gl = t.grad_buffer(logits.index);
                 for (std::size_t r = 0; r < tg.size(); ++r) {
                   if (wt[r] == 0.0) continue;
                   const double scale = g * wt[r];
                   const double* row = lv.data() + r * cols;
                   double* grow = gl.data() + r * cols;
                   for (std::size_t k = 0; k < cols; ++k) grow[k] += scale * std::exp(row[k] - lse[r]);
                   grow[tg[r]] -= scale;
                 }
               });
  if (debug_checks_enabled()) check(nodes_[r.index], "softmax_cross_entropy");
  return r;
}

}  // namespace ctxlm
