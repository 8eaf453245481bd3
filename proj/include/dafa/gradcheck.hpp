#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dafa/tensor.hpp"

namespace dafa {

struct GradCheckResult {
  std::string name;
  double max_rel_err = 0.0;
  bool pass = false;
};

// Central finite differences of a scalar function of the given tensors,
// evaluated by perturbing their values in place (h on each side). The
// function must rebuild its computation from the current tensor values on
// every call; it never touches the backward path under test.
std::vector<std::vector<double>> central_differences(
    const std::function<double()>& f, std::vector<Tensor>& inputs,
    double h = 1e-5);

// max over elements of |a - fd| / max(|a|, |fd|, floor). The floor keeps
// near-zero gradient pairs from blowing up the ratio.
double max_rel_err(const std::vector<std::vector<double>>& analytic,
                   const std::vector<std::vector<double>>& fd,
                   double floor = 1e-3);

// Finite-difference verification of every differentiable op, every loss
// (including the full temperature/weight grid of the distillation loss), and
// a multi-layer model forward pass. Threshold 1e-4.
std::vector<GradCheckResult> run_gradcheck(std::uint64_t seed);

bool all_passed(const std::vector<GradCheckResult>& results);

}  // namespace dafa
