#include "dafa/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dafa {

namespace {

constexpr double kSigmaGuard = 1e-6;

void validate_aug(double alpha, double apply_probability, const char* name) {
  if (!(alpha > 0.0))
    throw ParameterError(std::string(name) + ": alpha must be > 0");
  if (apply_probability < 0.0 || apply_probability > 1.0)
    throw ParameterError(std::string(name) +
                         ": apply_probability must lie in [0, 1]");
}

void check_perm(const std::vector<int>& perm, int n, const char* name) {
  if (static_cast<int>(perm.size()) != n)
    throw ContractError(std::string(name) + ": permutation length mismatch");
  std::vector<bool> hit(static_cast<std::size_t>(n), false);
  for (int p : perm) {
    if (p < 0 || p >= n || hit[static_cast<std::size_t>(p)])
      throw ContractError(std::string(name) + ": not a permutation");
    hit[static_cast<std::size_t>(p)] = true;
  }
}

}  // namespace

void MixupConfig::validate() const {
  validate_aug(alpha, apply_probability, "mixup");
}

void FreqMixStyleConfig::validate() const {
  validate_aug(alpha, apply_probability, "freq_mixstyle");
}

double draw_beta(double alpha, std::mt19937_64& rng) {
  const double x = std::gamma_distribution<double>(alpha, 1.0)(rng);
  const double y = std::gamma_distribution<double>(alpha, 1.0)(rng);
  const double s = x + y;
  return s > 0.0 ? x / s : 0.5;
}

std::vector<int> draw_permutation(int n, std::mt19937_64& rng) {
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  return perm;
}

LabeledBatch mixup_with(const LabeledBatch& batch, double lambda,
                        const std::vector<int>& perm) {
  const int n = batch.size();
  if (n == 0) throw ValidationError("mixup: batch must be nonempty");
  check_perm(perm, n, "mixup");
  if (lambda == 1.0) return batch;

  const int dim = batch.features.cols();
  const int c = batch.scene_targets.cols();
  const auto x = batch.features.data();
  const auto y = batch.scene_targets.data();
  std::vector<double> fx(x.begin(), x.end());
  std::vector<double> fy(y.begin(), y.end());
  for (int i = 0; i < n; ++i) {
    const int p = perm[static_cast<std::size_t>(i)];
    for (int j = 0; j < dim; ++j) {
      const std::size_t a = static_cast<std::size_t>(i) * dim + j;
      const std::size_t b = static_cast<std::size_t>(p) * dim + j;
      fx[a] = lambda * x[a] + (1.0 - lambda) * x[b];
    }
    for (int j = 0; j < c; ++j) {
      const std::size_t a = static_cast<std::size_t>(i) * c + j;
      const std::size_t b = static_cast<std::size_t>(p) * c + j;
      fy[a] = lambda * y[a] + (1.0 - lambda) * y[b];
    }
  }
  return {Tensor::from({n, dim}, std::move(fx)),
          Tensor::from({n, c}, std::move(fy)), batch.device_ids};
}

LabeledBatch mixup(const LabeledBatch& batch, const MixupConfig& cfg,
                   std::mt19937_64& rng) {
  cfg.validate();
  if (batch.size() == 0) throw ValidationError("mixup: batch must be nonempty");
  const double roll = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  if (roll >= cfg.apply_probability) return batch;
  const double lambda = draw_beta(cfg.alpha, rng);
  const auto perm = draw_permutation(batch.size(), rng);
  return mixup_with(batch, lambda, perm);
}

LabeledBatch freq_mixstyle_with(const LabeledBatch& batch, int freq_bins,
                                int time_steps, double lambda,
                                const std::vector<int>& perm) {
  const int n = batch.size();
  if (n == 0)
    throw ValidationError("freq_mixstyle: batch must be nonempty");
  if (freq_bins < 1 || time_steps < 1 ||
      batch.features.cols() != freq_bins * time_steps)
    throw DimensionError(
        "freq_mixstyle: features are not reshapeable to n x F x T");
  check_perm(perm, n, "freq_mixstyle");
  if (lambda == 1.0) return batch;

  const int F = freq_bins, T = time_steps;
  const auto x = batch.features.data();

  // per-sample, per-bin mean and guarded std over the time axis
  std::vector<double> mean(static_cast<std::size_t>(n) * F);
  std::vector<double> sig(static_cast<std::size_t>(n) * F);
  for (int i = 0; i < n; ++i)
    for (int f = 0; f < F; ++f) {
      const std::size_t base =
          (static_cast<std::size_t>(i) * F + f) * static_cast<std::size_t>(T);
      double m = 0.0;
      for (int t = 0; t < T; ++t) m += x[base + static_cast<std::size_t>(t)];
      m /= static_cast<double>(T);
      double v = 0.0;
      for (int t = 0; t < T; ++t) {
        const double d = x[base + static_cast<std::size_t>(t)] - m;
        v += d * d;
      }
      const std::size_t idx = static_cast<std::size_t>(i) * F + f;
      mean[idx] = m;
      sig[idx] = std::max(std::sqrt(v / static_cast<double>(T)), kSigmaGuard);
    }

  std::vector<double> out(x.begin(), x.end());
  for (int i = 0; i < n; ++i) {
    const int p = perm[static_cast<std::size_t>(i)];
    for (int f = 0; f < F; ++f) {
      const std::size_t own = static_cast<std::size_t>(i) * F + f;
      const std::size_t partner = static_cast<std::size_t>(p) * F + f;
      const double m_mix =
          lambda * mean[own] + (1.0 - lambda) * mean[partner];
      const double s_mix = lambda * sig[own] + (1.0 - lambda) * sig[partner];
      const std::size_t base =
          (static_cast<std::size_t>(i) * F + f) * static_cast<std::size_t>(T);
      for (int t = 0; t < T; ++t) {
        const std::size_t idx = base + static_cast<std::size_t>(t);
        out[idx] = s_mix * (x[idx] - mean[own]) / sig[own] + m_mix;
      }
    }
  }
  return {Tensor::from({n, F * T}, std::move(out)), batch.scene_targets,
          batch.device_ids};
}

LabeledBatch freq_mixstyle(const LabeledBatch& batch, int freq_bins,
                           int time_steps, const FreqMixStyleConfig& cfg,
                           std::mt19937_64& rng) {
  cfg.validate();
  if (batch.size() == 0)
    throw ValidationError("freq_mixstyle: batch must be nonempty");
  const double roll = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  if (roll >= cfg.apply_probability) return batch;
  const double lambda = draw_beta(cfg.alpha, rng);
  const auto perm = draw_permutation(batch.size(), rng);
  return freq_mixstyle_with(batch, freq_bins, time_steps, lambda, perm);
}

}  // namespace dafa
