#include "dafa/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dafa/kernels.hpp"

namespace dafa::ops {

namespace {

using detail::TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

std::string shape_str(const std::vector<int>& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shapes " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()) + " differ");
}

bool track(const Tensor& t) { return t.requires_grad(); }

Tensor make_out(std::vector<int> shape, std::vector<double> values,
                Tape* tape, bool any_grad) {
  return make_tensor(std::move(shape), std::move(values),
                     tape != nullptr && any_grad);
}

// adj(out) is guaranteed non-empty when a pull closure runs.
std::vector<double>& out_adj(const NodePtr& out) { return out->adj; }

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b, Tape* tape) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows())
    throw DimensionError("matmul: incompatible shapes " +
                         shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const int m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(static_cast<std::size_t>(m) * n);
  kernels::matmul_nn(a.data().data(), b.data().data(), out.data(), m, k, n,
                     false);
  Tensor o = make_out({m, n}, std::move(out), tape, track(a) || track(b));
  if (o.requires_grad()) {
    NodePtr an = a.node_ptr(), bn = b.node_ptr(), on = o.node_ptr();
    tape->record({on,
                  {an, bn},
                  [an, bn, on, m, k, n] {
                    const double* g = out_adj(on).data();
                    if (an->requires_grad) {
                      detail::ensure_adj(*an);
                      kernels::matmul_nt(g, bn->values.data(), an->adj.data(),
                                         m, n, k, true);
                    }
                    if (bn->requires_grad) {
                      detail::ensure_adj(*bn);
                      kernels::matmul_tn(an->values.data(), g, bn->adj.data(),
                                         m, k, n, true);
                    }
                  }});
  }
  return o;
}

Tensor transpose(const Tensor& a, Tape* tape) {
  const int m = a.rows(), n = a.cols();
  std::vector<double> out(a.size());
  const auto src = a.data();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      out[static_cast<std::size_t>(j) * m + i] =
          src[static_cast<std::size_t>(i) * n + j];
  Tensor o = make_out({n, m}, std::move(out), tape, track(a));
  if (o.requires_grad()) {
    NodePtr an = a.node_ptr(), on = o.node_ptr();
    tape->record({on,
                  {an},
                  [an, on, m, n] {
                    detail::ensure_adj(*an);
                    const auto& g = out_adj(on);
                    for (int i = 0; i < m; ++i)
                      for (int j = 0; j < n; ++j)
                        an->adj[static_cast<std::size_t>(i) * n + j] +=
                            g[static_cast<std::size_t>(j) * m + i];
                  }});
  }
  return o;
}

namespace {

template <typename Fwd, typename Pull>
Tensor binary_op(const Tensor& a, const Tensor& b, Tape* tape, const char* nm,
                 Fwd fwd, Pull pull) {
  require_same_shape(a, b, nm);
  std::vector<double> out(a.size());
  fwd(a.data().data(), b.data().data(), out.data(),
      static_cast<std::ptrdiff_t>(a.size()));
  Tensor o = make_out(a.shape(), std::move(out), tape, track(a) || track(b));
  if (o.requires_grad()) {
    NodePtr an = a.node_ptr(), bn = b.node_ptr(), on = o.node_ptr();
    tape->record({on, {an, bn}, [an, bn, on, pull] { pull(*an, *bn, *on); }});
  }
  return o;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b, Tape* tape) {
  return binary_op(a, b, tape, "add", kernels::add,
                   [](TensorNode& an, TensorNode& bn, TensorNode& on) {
                     const auto n = static_cast<std::ptrdiff_t>(on.adj.size());
                     if (an.requires_grad) {
                       detail::ensure_adj(an);
                       kernels::axpy(1.0, on.adj.data(), an.adj.data(), n);
                     }
                     if (bn.requires_grad) {
                       detail::ensure_adj(bn);
                       kernels::axpy(1.0, on.adj.data(), bn.adj.data(), n);
                     }
                   });
}

Tensor sub(const Tensor& a, const Tensor& b, Tape* tape) {
  return binary_op(a, b, tape, "sub", kernels::sub,
                   [](TensorNode& an, TensorNode& bn, TensorNode& on) {
                     const auto n = static_cast<std::ptrdiff_t>(on.adj.size());
                     if (an.requires_grad) {
                       detail::ensure_adj(an);
                       kernels::axpy(1.0, on.adj.data(), an.adj.data(), n);
                     }
                     if (bn.requires_grad) {
                       detail::ensure_adj(bn);
                       kernels::axpy(-1.0, on.adj.data(), bn.adj.data(), n);
                     }
                   });
}

Tensor mul(const Tensor& a, const Tensor& b, Tape* tape) {
  return binary_op(a, b, tape, "mul", kernels::mul,
                   [](TensorNode& an, TensorNode& bn, TensorNode& on) {
                     const auto n = static_cast<std::ptrdiff_t>(on.adj.size());
                     if (an.requires_grad) {
                       detail::ensure_adj(an);
                       kernels::mul_acc(on.adj.data(), bn.values.data(),
                                        an.adj.data(), n);
                     }
                     if (bn.requires_grad) {
                       detail::ensure_adj(bn);
                       kernels::mul_acc(on.adj.data(), an.values.data(),
                                        bn.adj.data(), n);
                     }
                   });
}

Tensor div(const Tensor& a, const Tensor& b, Tape* tape) {
  return binary_op(a, b, tape, "div", kernels::div,
                   [](TensorNode& an, TensorNode& bn, TensorNode& on) {
                     const std::size_t n = on.adj.size();
                     if (an.requires_grad) {
                       detail::ensure_adj(an);
                       for (std::size_t i = 0; i < n; ++i)
                         an.adj[i] += on.adj[i] / bn.values[i];
                     }
                     if (bn.requires_grad) {
                       detail::ensure_adj(bn);
                       for (std::size_t i = 0; i < n; ++i)
                         bn.adj[i] -= on.adj[i] * an.values[i] /
                                      (bn.values[i] * bn.values[i]);
                     }
                   });
}

namespace {

template <typename Fwd, typename Pull>
Tensor unary_op(const Tensor& a, Tape* tape, Fwd fwd, Pull pull) {
  std::vector<double> out(a.size());
  fwd(a.data().data(), out.data(), static_cast<std::ptrdiff_t>(a.size()));
  Tensor o = make_out(a.shape(), std::move(out), tape, track(a));
  if (o.requires_grad()) {
    NodePtr an = a.node_ptr(), on = o.node_ptr();
    tape->record({on, {an}, [an, on, pull] {
                    detail::ensure_adj(*an);
                    pull(*an, *on);
                  }});
  }
  return o;
}

}  // namespace

Tensor add_scalar(const Tensor& a, double s, Tape* tape) {
  return unary_op(
      a, tape,
      [s](const double* x, double* o, std::ptrdiff_t n) {
        kernels::add_const(x, s, o, n);
      },
      [](TensorNode& an, TensorNode& on) {
        kernels::axpy(1.0, on.adj.data(), an.adj.data(),
                      static_cast<std::ptrdiff_t>(on.adj.size()));
      });
}

Tensor mul_scalar(const Tensor& a, double s, Tape* tape) {
  return unary_op(
      a, tape,
      [s](const double* x, double* o, std::ptrdiff_t n) {
        kernels::scale(x, s, o, n);
      },
      [s](TensorNode& an, TensorNode& on) {
        kernels::axpy(s, on.adj.data(), an.adj.data(),
                      static_cast<std::ptrdiff_t>(on.adj.size()));
      });
}

Tensor relu(const Tensor& a, Tape* tape) {
  return unary_op(a, tape, kernels::relu,
                  [](TensorNode& an, TensorNode& on) {
                    // subgradient 0 at the kink
                    for (std::size_t i = 0; i < on.adj.size(); ++i)
                      if (an.values[i] > 0.0) an.adj[i] += on.adj[i];
                  });
}

Tensor log(const Tensor& a, Tape* tape) {
  for (double v : a.data())
    if (!(v > 0.0))
      throw ValidationError("log: inputs must be strictly positive");
  return unary_op(a, tape, kernels::log,
                  [](TensorNode& an, TensorNode& on) {
                    for (std::size_t i = 0; i < on.adj.size(); ++i)
                      an.adj[i] += on.adj[i] / an.values[i];
                  });
}

Tensor exp(const Tensor& a, Tape* tape) {
  return unary_op(a, tape, kernels::exp,
                  [](TensorNode& an, TensorNode& on) {
                    kernels::mul_acc(on.adj.data(), on.values.data(),
                                     an.adj.data(),
                                     static_cast<std::ptrdiff_t>(on.adj.size()));
                  });
}

Tensor sum_all(const Tensor& a, Tape* tape) {
  const double s =
      kernels::sum(a.data().data(), static_cast<std::ptrdiff_t>(a.size()));
  Tensor o = make_out({1}, {s}, tape, track(a));
  if (o.requires_grad()) {
    NodePtr an = a.node_ptr(), on = o.node_ptr();
    tape->record({on, {an}, [an, on] {
                    detail::ensure_adj(*an);
                    const double g = on->adj[0];
                    for (double& v : an->adj) v += g;
                  }});
  }
  return o;
}

Tensor mean_all(const Tensor& a, Tape* tape) {
  return mul_scalar(sum_all(a, tape), 1.0 / static_cast<double>(a.size()),
                    tape);
}

namespace {

Tensor axis_reduce(const Tensor& a, int axis, bool mean, Tape* tape) {
  const int m = a.rows(), n = a.cols();
  if (axis != 0 && axis != 1)
    throw DimensionError("axis reduction: axis must be 0 or 1");
  const int out_dim = axis == 0 ? n : m;
  std::vector<double> out(static_cast<std::size_t>(out_dim), 0.0);
  const auto src = a.data();
  if (axis == 0) {
    kernels::colsum(src.data(), m, n, out.data(), false);
  } else {
    for (int i = 0; i < m; ++i) {
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += src[static_cast<std::size_t>(i) * n + j];
      out[static_cast<std::size_t>(i)] = s;
    }
  }
  const double w = mean ? 1.0 / static_cast<double>(axis == 0 ? m : n) : 1.0;
  if (mean)
    for (double& v : out) v *= w;
  Tensor o = make_out({out_dim}, std::move(out), tape, track(a));
  if (o.requires_grad()) {
    NodePtr an = a.node_ptr(), on = o.node_ptr();
    tape->record({on, {an}, [an, on, m, n, axis, w] {
                    detail::ensure_adj(*an);
                    const auto& g = on->adj;
                    for (int i = 0; i < m; ++i)
                      for (int j = 0; j < n; ++j)
                        an->adj[static_cast<std::size_t>(i) * n + j] +=
                            w * (axis == 0 ? g[static_cast<std::size_t>(j)]
                                           : g[static_cast<std::size_t>(i)]);
                  }});
  }
  return o;
}

}  // namespace

Tensor sum_axis(const Tensor& a, int axis, Tape* tape) {
  return axis_reduce(a, axis, false, tape);
}

Tensor mean_axis(const Tensor& a, int axis, Tape* tape) {
  return axis_reduce(a, axis, true, tape);
}

namespace {

Tensor rowvec_op(const Tensor& a, const Tensor& v, double sign, Tape* tape) {
  const int m = a.rows(), n = a.cols();
  if (v.rank() != 1 || v.dim() != n)
    throw DimensionError("rowvec op: vector length " + shape_str(v.shape()) +
                         " does not match row width " + std::to_string(n));
  std::vector<double> out(a.size());
  const auto src = a.data();
  const auto vec = v.data();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      const std::size_t idx = static_cast<std::size_t>(i) * n + j;
      out[idx] = src[idx] + sign * vec[static_cast<std::size_t>(j)];
    }
  Tensor o = make_out(a.shape(), std::move(out), tape, track(a) || track(v));
  if (o.requires_grad()) {
    NodePtr an = a.node_ptr(), vn = v.node_ptr(), on = o.node_ptr();
    tape->record({on,
                  {an, vn},
                  [an, vn, on, m, n, sign] {
                    if (an->requires_grad) {
                      detail::ensure_adj(*an);
                      kernels::axpy(1.0, on->adj.data(), an->adj.data(),
                                    static_cast<std::ptrdiff_t>(on->adj.size()));
                    }
                    if (vn->requires_grad) {
                      detail::ensure_adj(*vn);
                      std::vector<double> cs(static_cast<std::size_t>(n), 0.0);
                      kernels::colsum(on->adj.data(), m, n, cs.data(), false);
                      kernels::axpy(sign, cs.data(), vn->adj.data(), n);
                    }
                  }});
  }
  return o;
}

}  // namespace

Tensor add_rowvec(const Tensor& a, const Tensor& v, Tape* tape) {
  return rowvec_op(a, v, 1.0, tape);
}

Tensor sub_rowvec(const Tensor& a, const Tensor& v, Tape* tape) {
  return rowvec_op(a, v, -1.0, tape);
}

Tensor gather_rows(const Tensor& a, const std::vector<int>& indices,
                   Tape* tape) {
  const int m = a.rows(), n = a.cols();
  for (int idx : indices)
    if (idx < 0 || idx >= m)
      throw DimensionError("gather_rows: index " + std::to_string(idx) +
                           " out of range for " + std::to_string(m) + " rows");
  const int k = static_cast<int>(indices.size());
  std::vector<double> out(static_cast<std::size_t>(k) * n);
  const auto src = a.data();
  for (int i = 0; i < k; ++i)
    std::copy_n(src.data() + static_cast<std::size_t>(indices[i]) * n, n,
                out.data() + static_cast<std::size_t>(i) * n);
  Tensor o = make_out({k, n}, std::move(out), tape, track(a));
  if (o.requires_grad()) {
    NodePtr an = a.node_ptr(), on = o.node_ptr();
    tape->record({on, {an}, [an, on, indices, n] {
                    detail::ensure_adj(*an);
                    // serial scatter-add: indices may repeat
                    for (std::size_t i = 0; i < indices.size(); ++i)
                      kernels::ref::axpy(
                          1.0, on->adj.data() + i * n,
                          an->adj.data() +
                              static_cast<std::size_t>(indices[i]) * n,
                          n);
                  }});
  }
  return o;
}

Tensor softmax_temp(const Tensor& z, double tau, Tape* tape) {
  if (!(tau > 0.0)) throw ParameterError("softmax temperature must be > 0");
  const int m = z.rows(), n = z.cols();
  std::vector<double> out(z.size());
  kernels::softmax_rows(z.data().data(), out.data(), m, n, tau);
  Tensor o = make_out(z.shape(), std::move(out), tape, track(z));
  if (o.requires_grad()) {
    NodePtr zn = z.node_ptr(), on = o.node_ptr();
    tape->record({on, {zn}, [zn, on, m, n, tau] {
                    detail::ensure_adj(*zn);
                    kernels::softmax_backward_rows(on->values.data(),
                                                   on->adj.data(), tau,
                                                   zn->adj.data(), m, n);
                  }});
  }
  return o;
}

Tensor log_softmax(const Tensor& z, Tape* tape) {
  const int m = z.rows(), n = z.cols();
  std::vector<double> out(z.size());
  kernels::log_softmax_rows(z.data().data(), out.data(), m, n);
  Tensor o = make_out(z.shape(), std::move(out), tape, track(z));
  if (o.requires_grad()) {
    NodePtr zn = z.node_ptr(), on = o.node_ptr();
    tape->record({on, {zn}, [zn, on, m, n] {
                    detail::ensure_adj(*zn);
                    kernels::log_softmax_backward_rows(on->values.data(),
                                                       on->adj.data(),
                                                       zn->adj.data(), m, n);
                  }});
  }
  return o;
}

}  // namespace dafa::ops
