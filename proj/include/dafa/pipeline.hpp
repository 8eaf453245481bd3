#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dafa/augment.hpp"
#include "dafa/data.hpp"
#include "dafa/losses.hpp"
#include "dafa/model.hpp"
#include "dafa/optimizer.hpp"

namespace dafa {

enum class TeacherMode { ce_only, dafa };

struct AugmentPolicy {
  bool use_mixup = true;
  MixupConfig mixup;
  bool use_freq_mixstyle = true;
  FreqMixStyleConfig freq_mixstyle;

  static AugmentPolicy none() { return {false, {}, false, {}}; }
};

struct TrainLogEntry {
  int epoch = 0;
  std::string split;
  double loss = 0.0;
  double accuracy = 0.0;  // percent
};

// Frozen teacher set; member logits are averaged (raw logits, not
// probabilities) to form the distillation target. Members are deep-copied
// and never updated.
class TeacherEnsemble {
public:
  explicit TeacherEnsemble(const std::vector<Model>& members);

  int size() const { return static_cast<int>(members_.size()); }
  int num_classes() const;
  const std::vector<Model>& members() const { return members_; }

  // Arithmetic mean of member logits; carries no gradient.
  Tensor logits(const Tensor& features) const;

private:
  std::vector<Model> members_;
};

// Fraction of rows where argmax(logits) == argmax(targets), in percent.
double accuracy_percent(const Tensor& logits, const Tensor& targets);

// Trains one teacher from scratch. ce_only minimizes plain cross-entropy;
// dafa adds the feature-alignment regularizers on the embedding and requires
// at least two distinct devices in the training data.
Model train_teacher(const DatasetSplit& data, const NetworkSpec& spec,
                    const TrainConfig& cfg, TeacherMode mode,
                    const DAFAConfig& dafa_cfg, const AugmentPolicy& aug,
                    std::vector<TrainLogEntry>* log = nullptr);

// Trains the student against the ensemble's averaged logits with the
// composite distillation loss. The student spec must pass the budget; the
// teacher sees exactly the augmented batch the student sees.
Model distill_student(const DatasetSplit& data, const NetworkSpec& student_spec,
                      const TeacherEnsemble& ensemble, const KDConfig& kd_cfg,
                      const TrainConfig& cfg, const ComplexityBudget& budget,
                      const AugmentPolicy& aug,
                      std::vector<TrainLogEntry>* log = nullptr);

// Distilled base student plus one fine-tuned specialist per known device.
struct ModelBundle {
  Model base;
  std::map<std::string, Model> specialists;
  std::map<std::string, BudgetReport> budget_reports;
  std::vector<std::string> warnings;

  const Model& route(const std::optional<std::string>& device_id) const;
};

// Device-specific fine-tuning: clones the base per seen device and trains on
// that device's samples only with plain cross-entropy, keeping the epoch
// with the best accuracy on the device's validation fold (the untouched
// base counts as epoch 0). Seen devices without training samples are skipped
// with a warning.
ModelBundle dsft(const Model& base_student, const DatasetSplit& data,
                 const TrainConfig& ft_cfg, const ComplexityBudget& budget,
                 std::vector<TrainLogEntry>* log = nullptr);

// Routes to the device specialist when one exists, otherwise the base
// student; returns row-stochastic class probabilities.
Tensor predict(const ModelBundle& bundle, const Tensor& features,
               const std::optional<std::string>& device_id);

namespace detail_pipeline {

// Shared minibatch loop used by every training stage. Derives all rng
// streams from cfg.seed only, so two stages with equal configs and loss
// functions produce bit-identical trajectories.
using StepLoss =
    std::function<Tensor(const LabeledBatch&, const ForwardResult&, Tape*)>;
using EpochHook = std::function<void(const Model&, int)>;

Model run_training(Model model, const SamplePart& part, int num_classes,
                   int freq_bins, int time_steps, const TrainConfig& cfg,
                   const AugmentPolicy& aug, const StepLoss& loss_fn,
                   std::vector<TrainLogEntry>* log, const std::string& split_tag,
                   const EpochHook& epoch_hook = nullptr);

}  // namespace detail_pipeline

}  // namespace dafa
