#pragma once

#include <cstddef>
#include <span>

// Dense inner loops behind the tensor layer. Every kernel exists twice:
// kernels::ref::* is the plain serial implementation used as the test
// reference, kernels::* is the OpenMP path used in production. The two are
// bit-identical by construction: parallelism only partitions independent
// output elements, never reorders a floating-point accumulation. Reductions
// use a fixed block decomposition combined in block order, so their result
// does not depend on the thread count either.

namespace dafa::kernels {

// Work-size guard below which the OpenMP path stays serial.
inline constexpr std::ptrdiff_t kParallelCutoff = 1 << 14;

// Block width for order-fixed reductions (same in ref and parallel paths).
inline constexpr std::ptrdiff_t kReduceBlock = 4096;

namespace ref {

// c[m x n] (+)= a[m x k] * b[k x n]
void matmul_nn(const double* a, const double* b, double* c, int m, int k,
               int n, bool accumulate);
// c[m x k] (+)= g[m x n] * b^T, b stored [k x n]
void matmul_nt(const double* g, const double* b, double* c, int m, int n,
               int k, bool accumulate);
// c[k x n] (+)= a^T * g, a stored [m x k], g stored [m x n]
void matmul_tn(const double* a, const double* g, double* c, int m, int k,
               int n, bool accumulate);

void add(const double* a, const double* b, double* o, std::ptrdiff_t n);
void sub(const double* a, const double* b, double* o, std::ptrdiff_t n);
void mul(const double* a, const double* b, double* o, std::ptrdiff_t n);
void div(const double* a, const double* b, double* o, std::ptrdiff_t n);
void scale(const double* a, double s, double* o, std::ptrdiff_t n);
void add_const(const double* a, double s, double* o, std::ptrdiff_t n);
void relu(const double* a, double* o, std::ptrdiff_t n);
void exp(const double* a, double* o, std::ptrdiff_t n);
void log(const double* a, double* o, std::ptrdiff_t n);

// o += s * a  (gradient accumulation)
void axpy(double s, const double* a, double* o, std::ptrdiff_t n);
// o += a * b  elementwise
void mul_acc(const double* a, const double* b, double* o, std::ptrdiff_t n);

// Block-wise sum, combined in block index order.
double sum(const double* a, std::ptrdiff_t n);

// out[n] (+)= column sums of a[m x n]
void colsum(const double* a, int m, int n, double* out, bool accumulate);

// p[rows x cols] = rowwise softmax(z / tau), max-shifted
void softmax_rows(const double* z, double* p, int rows, int cols, double tau);
// ls = rowwise log-softmax(z), fused max-shifted form
void log_softmax_rows(const double* z, double* ls, int rows, int cols);

// dz += (p .* (g - rowdot(g, p))) / tau, given p = softmax_rows output
void softmax_backward_rows(const double* p, const double* g, double tau,
                           double* dz, int rows, int cols);
// dz += g - softmax .* rowsum(g), given ls = log_softmax_rows output
void log_softmax_backward_rows(const double* ls, const double* g, double* dz,
                               int rows, int cols);

}  // namespace ref

// OpenMP production path; signatures mirror ref:: exactly.
void matmul_nn(const double* a, const double* b, double* c, int m, int k,
               int n, bool accumulate);
void matmul_nt(const double* g, const double* b, double* c, int m, int n,
               int k, bool accumulate);
void matmul_tn(const double* a, const double* g, double* c, int m, int k,
               int n, bool accumulate);

void add(const double* a, const double* b, double* o, std::ptrdiff_t n);
void sub(const double* a, const double* b, double* o, std::ptrdiff_t n);
void mul(const double* a, const double* b, double* o, std::ptrdiff_t n);
void div(const double* a, const double* b, double* o, std::ptrdiff_t n);
void scale(const double* a, double s, double* o, std::ptrdiff_t n);
void add_const(const double* a, double s, double* o, std::ptrdiff_t n);
void relu(const double* a, double* o, std::ptrdiff_t n);
void exp(const double* a, double* o, std::ptrdiff_t n);
void log(const double* a, double* o, std::ptrdiff_t n);
void axpy(double s, const double* a, double* o, std::ptrdiff_t n);
void mul_acc(const double* a, const double* b, double* o, std::ptrdiff_t n);

double sum(const double* a, std::ptrdiff_t n);
void colsum(const double* a, int m, int n, double* out, bool accumulate);

void softmax_rows(const double* z, double* p, int rows, int cols, double tau);
void log_softmax_rows(const double* z, double* ls, int rows, int cols);
void softmax_backward_rows(const double* p, const double* g, double tau,
                           double* dz, int rows, int cols);
void log_softmax_backward_rows(const double* ls, const double* g, double* dz,
                               int rows, int cols);

// Shewchuk-style exact accumulation: the returned sum is the correctly
// rounded value of the exact real sum, hence independent of input order.
// Serial only; used where bit-stable statistics are required.
double exact_sum(std::span<const double> values);

}  // namespace dafa::kernels
