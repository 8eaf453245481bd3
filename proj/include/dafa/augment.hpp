#pragma once

#include <random>
#include <vector>

#include "dafa/data.hpp"

namespace dafa {

struct MixupConfig {
  double alpha = 0.3;
  double apply_probability = 1.0;
  void validate() const;
};

struct FreqMixStyleConfig {
  double alpha = 0.3;
  double apply_probability = 0.4;
  void validate() const;
};

// Convex combination of the batch with a permuted copy of itself: features
// and targets are mixed with the same Beta(alpha, alpha) coefficient; device
// labels stay with the first operand. Deterministic given the rng state.
LabeledBatch mixup(const LabeledBatch& batch, const MixupConfig& cfg,
                   std::mt19937_64& rng);

// Deterministic core with the coefficient and permutation supplied.
// lambda == 1 returns the input batch unchanged.
LabeledBatch mixup_with(const LabeledBatch& batch, double lambda,
                        const std::vector<int>& perm);

// Swaps per-frequency-bin statistics between samples: each sample's per-bin
// mean/std over the time axis is replaced by the convex mix of its own and a
// permuted partner's statistics. Labels pass through unchanged. Bins with
// degenerate spread use the guard sigma' = max(sigma, 1e-6).
LabeledBatch freq_mixstyle(const LabeledBatch& batch, int freq_bins,
                           int time_steps, const FreqMixStyleConfig& cfg,
                           std::mt19937_64& rng);

// Deterministic core; lambda == 1 returns the input bit-identically.
LabeledBatch freq_mixstyle_with(const LabeledBatch& batch, int freq_bins,
                                int time_steps, double lambda,
                                const std::vector<int>& perm);

// Beta(alpha, alpha) via two gamma draws.
double draw_beta(double alpha, std::mt19937_64& rng);

std::vector<int> draw_permutation(int n, std::mt19937_64& rng);

}  // namespace dafa
