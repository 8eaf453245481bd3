#include "dafa/optimizer.hpp"

#include <cmath>
#include <string>

namespace dafa {

void AdamConfig::validate() const {
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw ParameterError("adam betas must lie in [0, 1)");
  if (!(eps > 0.0)) throw ParameterError("adam eps must be > 0");
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 2)
    throw ConfigError("batch_size must be >= 2 (losses need multi-sample batches)");
  if (!(peak_lr >= 0.0)) throw ConfigError("peak_lr must be >= 0");
  if (!(warmup_fraction > 0.0 && warmup_fraction < 1.0))
    throw ConfigError("warmup_fraction must lie in (0, 1)");
  adam.validate();
}

double lr_at(int step, int total_steps, const TrainConfig& cfg) {
  if (total_steps < 1) throw ContractError("lr_at: total_steps must be >= 1");
  if (step < 0 || step >= total_steps)
    throw ContractError("lr_at: step " + std::to_string(step) +
                        " outside [0, " + std::to_string(total_steps) + ")");
  const int warmup = std::max(
      1, static_cast<int>(std::llround(cfg.warmup_fraction * total_steps)));
  if (step < warmup)
    return cfg.peak_lr * static_cast<double>(step) /
           static_cast<double>(warmup);
  const int decay_span = total_steps - 1 - warmup;
  if (decay_span <= 0) return step == warmup ? cfg.peak_lr : 0.0;
  const double progress =
      static_cast<double>(step - warmup) / static_cast<double>(decay_span);
  return cfg.peak_lr * 0.5 * (1.0 + std::cos(M_PI * progress));
}

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  cfg_.validate();
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void Adam::step(double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t pi = 0; pi < params_.size(); ++pi) {
    Tensor& p = params_[pi];
    const auto g = p.grad();
    if (g.empty())
      throw ContractError("adam: parameter " + std::to_string(pi) +
                          " has no gradient");
    auto w = p.mutable_data();
    auto& m = m_[pi];
    auto& v = v_[pi];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

}  // namespace dafa
