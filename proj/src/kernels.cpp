#include "dafa/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace dafa::kernels {

namespace ref {

void matmul_nn(const double* a, const double* b, double* c, int m, int k,
               int n, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    double* crow = c + static_cast<std::ptrdiff_t>(i) * n;
    if (!accumulate) std::fill(crow, crow + n, 0.0);
    const double* arow = a + static_cast<std::ptrdiff_t>(i) * k;
    for (int kk = 0; kk < k; ++kk) {
      const double aik = arow[kk];
      const double* brow = b + static_cast<std::ptrdiff_t>(kk) * n;
      for (int j = 0; j < n; ++j) crow[j] += aik * brow[j];
    }
  }
}

void matmul_nt(const double* g, const double* b, double* c, int m, int n,
               int k, bool accumulate) {
  for (int i = 0; i < m; ++i) {
    const double* grow = g + static_cast<std::ptrdiff_t>(i) * n;
    double* crow = c + static_cast<std::ptrdiff_t>(i) * k;
    for (int j = 0; j < k; ++j) {
      const double* brow = b + static_cast<std::ptrdiff_t>(j) * n;
      double s = 0.0;
      for (int l = 0; l < n; ++l) s += grow[l] * brow[l];
      crow[j] = accumulate ? crow[j] + s : s;
    }
  }
}

void matmul_tn(const double* a, const double* g, double* c, int m, int k,
               int n, bool accumulate) {
  for (int i = 0; i < k; ++i) {
    double* crow = c + static_cast<std::ptrdiff_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int l = 0; l < m; ++l)
        s += a[static_cast<std::ptrdiff_t>(l) * k + i] *
             g[static_cast<std::ptrdiff_t>(l) * n + j];
      crow[j] = accumulate ? crow[j] + s : s;
    }
  }
}

void add(const double* a, const double* b, double* o, std::ptrdiff_t n) {
  for (std::ptrdiff_t i = 0; i < n; ++i) o[i] = a[i] + b[i];
}
void sub(const double* a, const double* b, double* o, std::ptrdiff_t n) {
  for (std::ptrdiff_t i = 0; i < n; ++i) o[i] = a[i] - b[i];
}
void mul(const double* a, const double* b, double* o, std::ptrdiff_t n) {
  for (std::ptrdiff_t i = 0; i < n; ++i) o[i] = a[i] * b[i];
}
void div(const double* a, const double* b, double* o, std::ptrdiff_t n) {
  for (std::ptrdiff_t i = 0; i < n; ++i) o[i] = a[i] / b[i];
}
void scale(const double* a, double s, double* o, std::ptrdiff_t n) {
  for (std::ptrdiff_t i = 0; i < n; ++i) o[i] = a[i] * s;
}
void add_const(const double* a, double s, double* o, std::ptrdiff_t n) {
  for (std::ptrdiff_t i = 0; i < n; ++i) o[i] = a[i] + s;
}
void relu(const double* a, double* o, std::ptrdiff_t n) {
  for (std::ptrdiff_t i = 0; i < n; ++i) o[i] = a[i] > 0.0 ? a[i] : 0.0;
}
void exp(const double* a, double* o, std::ptrdiff_t n) {
  for (std::ptrdiff_t i = 0; i < n; ++i) o[i] = std::exp(a[i]);
}
void log(const double* a, double* o, std::ptrdiff_t n) {
  for (std::ptrdiff_t i = 0; i < n; ++i) o[i] = std::log(a[i]);
}
void axpy(double s, const double* a, double* o, std::ptrdiff_t n) {
  for (std::ptrdiff_t i = 0; i < n; ++i) o[i] += s * a[i];
}
void mul_acc(const double* a, const double* b, double* o, std::ptrdiff_t n) {
  for (std::ptrdiff_t i = 0; i < n; ++i) o[i] += a[i] * b[i];
}

double sum(const double* a, std::ptrdiff_t n) {
  const std::ptrdiff_t nblocks = (n + kReduceBlock - 1) / kReduceBlock;
  double total = 0.0;
  for (std::ptrdiff_t bi = 0; bi < nblocks; ++bi) {
    const std::ptrdiff_t lo = bi * kReduceBlock;
    const std::ptrdiff_t hi = std::min(n, lo + kReduceBlock);
    double s = 0.0;
    for (std::ptrdiff_t i = lo; i < hi; ++i) s += a[i];
    total += s;
  }
  return total;
}

void colsum(const double* a, int m, int n, double* out, bool accumulate) {
  for (int j = 0; j < n; ++j) {
    double s = 0.0;
    for (int i = 0; i < m; ++i) s += a[static_cast<std::ptrdiff_t>(i) * n + j];
    out[j] = accumulate ? out[j] + s : s;
  }
}

static inline void softmax_one_row(const double* z, double* p, int cols,
                                   double tau) {
  double mx = z[0];
  for (int j = 1; j < cols; ++j) mx = std::max(mx, z[j]);
  double denom = 0.0;
  for (int j = 0; j < cols; ++j) {
    p[j] = std::exp((z[j] - mx) / tau);
    denom += p[j];
  }
  const double inv = 1.0 / denom;
  for (int j = 0; j < cols; ++j) p[j] *= inv;
}

static inline void log_softmax_one_row(const double* z, double* ls, int cols) {
  double mx = z[0];
  for (int j = 1; j < cols; ++j) mx = std::max(mx, z[j]);
  double denom = 0.0;
  for (int j = 0; j < cols; ++j) denom += std::exp(z[j] - mx);
  const double lse = std::log(denom);
  for (int j = 0; j < cols; ++j) ls[j] = z[j] - mx - lse;
}

void softmax_rows(const double* z, double* p, int rows, int cols, double tau) {
  for (int i = 0; i < rows; ++i)
    softmax_one_row(z + static_cast<std::ptrdiff_t>(i) * cols,
                    p + static_cast<std::ptrdiff_t>(i) * cols, cols, tau);
}

void log_softmax_rows(const double* z, double* ls, int rows, int cols) {
  for (int i = 0; i < rows; ++i)
    log_softmax_one_row(z + static_cast<std::ptrdiff_t>(i) * cols,
                        ls + static_cast<std::ptrdiff_t>(i) * cols, cols);
}

static inline void softmax_backward_one_row(const double* p, const double* g,
                                            double tau, double* dz, int cols) {
  double dot = 0.0;
  for (int j = 0; j < cols; ++j) dot += g[j] * p[j];
  for (int j = 0; j < cols; ++j) dz[j] += p[j] * (g[j] - dot) / tau;
}

static inline void log_softmax_backward_one_row(const double* ls,
                                                const double* g, double* dz,
                                                int cols) {
  double gsum = 0.0;
  for (int j = 0; j < cols; ++j) gsum += g[j];
  for (int j = 0; j < cols; ++j) dz[j] += g[j] - std::exp(ls[j]) * gsum;
}

void softmax_backward_rows(const double* p, const double* g, double tau,
                           double* dz, int rows, int cols) {
  for (int i = 0; i < rows; ++i) {
    const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(i) * cols;
    softmax_backward_one_row(p + off, g + off, tau, dz + off, cols);
  }
}

void log_softmax_backward_rows(const double* ls, const double* g, double* dz,
                               int rows, int cols) {
  for (int i = 0; i < rows; ++i) {
    const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(i) * cols;
    log_softmax_backward_one_row(ls + off, g + off, dz + off, cols);
  }
}

}  // namespace ref

// --------------------------------------------------------------------------
// OpenMP path. Each pragma partitions independent output rows/elements; the
// per-element arithmetic order is identical to ref::, so results match the
// reference bit for bit at any thread count.
// --------------------------------------------------------------------------

void matmul_nn(const double* a, const double* b, double* c, int m, int k,
               int n, bool accumulate) {
  const std::ptrdiff_t work =
      static_cast<std::ptrdiff_t>(m) * k * n;
#pragma omp parallel for schedule(static) if (work >= kParallelCutoff)
  for (int i = 0; i < m; ++i) {
    double* crow = c + static_cast<std::ptrdiff_t>(i) * n;
    if (!accumulate) std::fill(crow, crow + n, 0.0);
    const double* arow = a + static_cast<std::ptrdiff_t>(i) * k;
    for (int kk = 0; kk < k; ++kk) {
      const double aik = arow[kk];
      const double* brow = b + static_cast<std::ptrdiff_t>(kk) * n;
      for (int j = 0; j < n; ++j) crow[j] += aik * brow[j];
    }
  }
}

void matmul_nt(const double* g, const double* b, double* c, int m, int n,
               int k, bool accumulate) {
  const std::ptrdiff_t work =
      static_cast<std::ptrdiff_t>(m) * n * k;
#pragma omp parallel for schedule(static) if (work >= kParallelCutoff)
  for (int i = 0; i < m; ++i) {
    const double* grow = g + static_cast<std::ptrdiff_t>(i) * n;
    double* crow = c + static_cast<std::ptrdiff_t>(i) * k;
    for (int j = 0; j < k; ++j) {
      const double* brow = b + static_cast<std::ptrdiff_t>(j) * n;
      double s = 0.0;
      for (int l = 0; l < n; ++l) s += grow[l] * brow[l];
      crow[j] = accumulate ? crow[j] + s : s;
    }
  }
}

void matmul_tn(const double* a, const double* g, double* c, int m, int k,
               int n, bool accumulate) {
  const std::ptrdiff_t work =
      static_cast<std::ptrdiff_t>(m) * k * n;
#pragma omp parallel for schedule(static) if (work >= kParallelCutoff)
  for (int i = 0; i < k; ++i) {
    double* crow = c + static_cast<std::ptrdiff_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int l = 0; l < m; ++l)
        s += a[static_cast<std::ptrdiff_t>(l) * k + i] *
             g[static_cast<std::ptrdiff_t>(l) * n + j];
      crow[j] = accumulate ? crow[j] + s : s;
    }
  }
}

#define DAFA_EW_BINARY(NAME, EXPR)                                          \
  void NAME(const double* a, const double* b, double* o, std::ptrdiff_t n) { \
    _Pragma("omp parallel for schedule(static) if (n >= kParallelCutoff)")   \
    for (std::ptrdiff_t i = 0; i < n; ++i) o[i] = (EXPR);                    \
  }

DAFA_EW_BINARY(add, a[i] + b[i])
DAFA_EW_BINARY(sub, a[i] - b[i])
DAFA_EW_BINARY(mul, a[i] * b[i])
DAFA_EW_BINARY(div, a[i] / b[i])
#undef DAFA_EW_BINARY

void scale(const double* a, double s, double* o, std::ptrdiff_t n) {
#pragma omp parallel for schedule(static) if (n >= kParallelCutoff)
  for (std::ptrdiff_t i = 0; i < n; ++i) o[i] = a[i] * s;
}
void add_const(const double* a, double s, double* o, std::ptrdiff_t n) {
#pragma omp parallel for schedule(static) if (n >= kParallelCutoff)
  for (std::ptrdiff_t i = 0; i < n; ++i) o[i] = a[i] + s;
}
void relu(const double* a, double* o, std::ptrdiff_t n) {
#pragma omp parallel for schedule(static) if (n >= kParallelCutoff)
  for (std::ptrdiff_t i = 0; i < n; ++i) o[i] = a[i] > 0.0 ? a[i] : 0.0;
}
void exp(const double* a, double* o, std::ptrdiff_t n) {
#pragma omp parallel for schedule(static) if (n >= kParallelCutoff)
  for (std::ptrdiff_t i = 0; i < n; ++i) o[i] = std::exp(a[i]);
}
void log(const double* a, double* o, std::ptrdiff_t n) {
#pragma omp parallel for schedule(static) if (n >= kParallelCutoff)
  for (std::ptrdiff_t i = 0; i < n; ++i) o[i] = std::log(a[i]);
}
void axpy(double s, const double* a, double* o, std::ptrdiff_t n) {
#pragma omp parallel for schedule(static) if (n >= kParallelCutoff)
  for (std::ptrdiff_t i = 0; i < n; ++i) o[i] += s * a[i];
}
void mul_acc(const double* a, const double* b, double* o, std::ptrdiff_t n) {
#pragma omp parallel for schedule(static) if (n >= kParallelCutoff)
  for (std::ptrdiff_t i = 0; i < n; ++i) o[i] += a[i] * b[i];
}

double sum(const double* a, std::ptrdiff_t n) {
  const std::ptrdiff_t nblocks = (n + kReduceBlock - 1) / kReduceBlock;
  if (nblocks <= 1) return ref::sum(a, n);
  std::vector<double> partial(static_cast<std::size_t>(nblocks), 0.0);
#pragma omp parallel for schedule(static) if (n >= kParallelCutoff)
  for (std::ptrdiff_t bi = 0; bi < nblocks; ++bi) {
    const std::ptrdiff_t lo = bi * kReduceBlock;
    const std::ptrdiff_t hi = std::min(n, lo + kReduceBlock);
    double s = 0.0;
    for (std::ptrdiff_t i = lo; i < hi; ++i) s += a[i];
    partial[static_cast<std::size_t>(bi)] = s;
  }
  double total = 0.0;
  for (std::ptrdiff_t bi = 0; bi < nblocks; ++bi)
    total += partial[static_cast<std::size_t>(bi)];
  return total;
}

void colsum(const double* a, int m, int n, double* out, bool accumulate) {
  const std::ptrdiff_t work = static_cast<std::ptrdiff_t>(m) * n;
#pragma omp parallel for schedule(static) if (work >= kParallelCutoff)
  for (int j = 0; j < n; ++j) {
    double s = 0.0;
    for (int i = 0; i < m; ++i) s += a[static_cast<std::ptrdiff_t>(i) * n + j];
    out[j] = accumulate ? out[j] + s : s;
  }
}

void softmax_rows(const double* z, double* p, int rows, int cols, double tau) {
  const std::ptrdiff_t work = static_cast<std::ptrdiff_t>(rows) * cols;
#pragma omp parallel for schedule(static) if (work >= kParallelCutoff)
  for (int i = 0; i < rows; ++i)
    ref::softmax_rows(z + static_cast<std::ptrdiff_t>(i) * cols,
                      p + static_cast<std::ptrdiff_t>(i) * cols, 1, cols, tau);
}

void log_softmax_rows(const double* z, double* ls, int rows, int cols) {
  const std::ptrdiff_t work = static_cast<std::ptrdiff_t>(rows) * cols;
#pragma omp parallel for schedule(static) if (work >= kParallelCutoff)
  for (int i = 0; i < rows; ++i)
    ref::log_softmax_rows(z + static_cast<std::ptrdiff_t>(i) * cols,
                          ls + static_cast<std::ptrdiff_t>(i) * cols, 1, cols);
}

void softmax_backward_rows(const double* p, const double* g, double tau,
                           double* dz, int rows, int cols) {
  const std::ptrdiff_t work = static_cast<std::ptrdiff_t>(rows) * cols;
#pragma omp parallel for schedule(static) if (work >= kParallelCutoff)
  for (int i = 0; i < rows; ++i) {
    const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(i) * cols;
    ref::softmax_backward_rows(p + off, g + off, tau, dz + off, 1, cols);
  }
}

void log_softmax_backward_rows(const double* ls, const double* g, double* dz,
                               int rows, int cols) {
  const std::ptrdiff_t work = static_cast<std::ptrdiff_t>(rows) * cols;
#pragma omp parallel for schedule(static) if (work >= kParallelCutoff)
  for (int i = 0; i < rows; ++i) {
    const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(i) * cols;
    ref::log_softmax_backward_rows(ls + off, g + off, dz + off, 1, cols);
  }
}

double exact_sum(std::span<const double> values) {
  // Grows an expansion of non-overlapping partials; the final left-to-right
  // collapse returns the correctly rounded total.
  std::vector<double> partials;
  for (double x : values) {
    std::size_t used = 0;
    for (double y : partials) {
      if (std::abs(x) < std::abs(y)) std::swap(x, y);
      const double hi = x + y;
      const double lo = y - (hi - x);
      if (lo != 0.0) partials[used++] = lo;
      x = hi;
    }
    partials.resize(used);
    partials.push_back(x);
  }
  double total = 0.0;
  for (double p : partials) total += p;
  return total;
}

}  // namespace dafa::kernels
