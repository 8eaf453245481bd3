#pragma once

#include <map>
#include <vector>

#include "dafa/ops.hpp"
#include "dafa/tensor.hpp"

namespace dafa {

// Distillation loss weights: loss = (1-lambda)*CE + lambda*tau^2*KL.
struct KDConfig {
  double lambda = 0.98;
  double tau = 2.0;
  void validate() const;
};

// Weights for the feature-alignment regularizers attached to the expert
// teacher objective, plus the scatter-ratio denominator guard.
struct DAFAConfig {
  double lambda_dcsl = 0.01;
  double lambda_gdal = 0.01;
  double epsilon = 1e-8;
  void validate() const;
};

// Per-device centroids of an embedding batch. Sums use order-independent
// exact accumulation, so stats are bit-identical under batch permutation.
struct DeviceBatchStats {
  std::map<int, std::vector<double>> centroids;  // device id -> mean embedding
  std::map<int, int> counts;
  std::vector<double> global_centroid;
};

// Mean over rows of -sum(target * log_softmax(logits)). Targets may be soft;
// every row must sum to 1 within 1e-9.
Tensor cross_entropy(const Tensor& logits, const Tensor& targets,
                     Tape* tape = nullptr);

// Composite distillation objective. Teacher logits are treated as constants;
// gradient flows only through student_logits. lambda == 0 reduces to
// cross_entropy bit for bit.
Tensor kd_loss(const Tensor& student_logits, const Tensor& teacher_logits,
               const Tensor& targets, const KDConfig& cfg,
               Tape* tape = nullptr);

DeviceBatchStats device_batch_stats(const Tensor& embeddings,
                                    const std::vector<int>& device_ids);

// Scatter ratio S_W / (S_B + epsilon): S_W is the mean squared distance of
// each sample to its device centroid, S_B the mean squared distance over
// unordered pairs of distinct device centroids. Exactly 0 (constant, no
// gradient) when fewer than two devices are present.
Tensor dcsl(const Tensor& embeddings, const std::vector<int>& device_ids,
            double epsilon, Tape* tape = nullptr);

// Mean squared distance of each device centroid from the global batch
// centroid.
Tensor gdal(const Tensor& embeddings, const std::vector<int>& device_ids,
            Tape* tape = nullptr);

// Expert-teacher objective: CE + lambda_dcsl*DCSL + lambda_gdal*GDAL.
// Zero weights reduce to cross_entropy bit for bit.
Tensor dafa_teacher_loss(const Tensor& logits, const Tensor& embeddings,
                         const Tensor& targets,
                         const std::vector<int>& device_ids,
                         const DAFAConfig& cfg, Tape* tape = nullptr);

}  // namespace dafa
