#pragma once

#include <cstdint>
#include <vector>

#include "dafa/tensor.hpp"

namespace dafa {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  void validate() const;
};

struct TrainConfig {
  int epochs = 1;
  int batch_size = 128;
  double peak_lr = 5e-4;
  double warmup_fraction = 0.1;
  std::uint64_t seed = 0;
  AdamConfig adam;
  // epochs == 0 is allowed and means "no training": needed by the
  // fine-tuning stage's identity case.
  void validate() const;
};

// Linear warmup from 0 to peak over the first warmup_fraction*total steps,
// then cosine decay to exactly 0 at the final step. Both branches evaluate
// to peak_lr at the boundary step.
double lr_at(int step, int total_steps, const TrainConfig& cfg);

// Bias-corrected Adam over a fixed parameter list. Parameters must carry
// populated gradients at every step() call.
class Adam {
public:
  Adam(std::vector<Tensor> params, AdamConfig cfg);

  void step(double lr);
  std::int64_t step_count() const { return t_; }

private:
  std::vector<Tensor> params_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::int64_t t_ = 0;
};

}  // namespace dafa
