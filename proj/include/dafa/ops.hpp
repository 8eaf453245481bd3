#pragma once

#include <vector>

#include "dafa/tensor.hpp"

// Differentiable primitives. Every op takes an optional Tape*; with a tape
// the backward rule is recorded, without one the call is a pure forward
// evaluation (teacher inference, metric computation). Gradients flow only to
// operands with requires_grad set.

namespace dafa::ops {

Tensor matmul(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
Tensor transpose(const Tensor& a, Tape* tape = nullptr);

Tensor add(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
Tensor sub(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
Tensor mul(const Tensor& a, const Tensor& b, Tape* tape = nullptr);
Tensor div(const Tensor& a, const Tensor& b, Tape* tape = nullptr);

Tensor add_scalar(const Tensor& a, double s, Tape* tape = nullptr);
Tensor mul_scalar(const Tensor& a, double s, Tape* tape = nullptr);

Tensor relu(const Tensor& a, Tape* tape = nullptr);
// Natural log; every element must be strictly positive.
Tensor log(const Tensor& a, Tape* tape = nullptr);
Tensor exp(const Tensor& a, Tape* tape = nullptr);

Tensor sum_all(const Tensor& a, Tape* tape = nullptr);
Tensor mean_all(const Tensor& a, Tape* tape = nullptr);
// axis 0 collapses rows ([m x n] -> [n]), axis 1 collapses columns
// ([m x n] -> [m]).
Tensor sum_axis(const Tensor& a, int axis, Tape* tape = nullptr);
Tensor mean_axis(const Tensor& a, int axis, Tape* tape = nullptr);

// a[m x n] +/- broadcast of v[n] over every row.
Tensor add_rowvec(const Tensor& a, const Tensor& v, Tape* tape = nullptr);
Tensor sub_rowvec(const Tensor& a, const Tensor& v, Tape* tape = nullptr);

// Row selection by index; indices may repeat. Gradient scatter-adds.
Tensor gather_rows(const Tensor& a, const std::vector<int>& indices,
                   Tape* tape = nullptr);

// Rowwise softmax of z / tau, max-shifted for stability. tau > 0.
Tensor softmax_temp(const Tensor& z, double tau, Tape* tape = nullptr);
// Fused max-shifted log-softmax; avoids log(softmax) cancellation.
Tensor log_softmax(const Tensor& z, Tape* tape = nullptr);

}  // namespace dafa::ops
