#include "dafa/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "dafa/kernels.hpp"
#include "dafa/ops.hpp"
#include "dafa/util.hpp"

namespace dafa {

TeacherEnsemble::TeacherEnsemble(const std::vector<Model>& members) {
  if (members.empty())
    throw ValidationError("teacher ensemble must be nonempty");
  const int c = members.front().spec().num_classes;
  for (const auto& m : members) {
    if (m.spec().num_classes != c)
      throw ValidationError(
          "teacher ensemble members disagree on num_classes");
    members_.push_back(m.clone(false));  // frozen deep copies
  }
}

int TeacherEnsemble::num_classes() const {
  return members_.front().spec().num_classes;
}

Tensor TeacherEnsemble::logits(const Tensor& features) const {
  Tensor acc;
  for (const auto& m : members_) {
    Tensor z = m.forward(features).logits;
    acc = acc.defined() ? ops::add(acc, z) : z;
  }
  return ops::mul_scalar(acc, 1.0 / static_cast<double>(members_.size()));
}

double accuracy_percent(const Tensor& logits, const Tensor& targets) {
  const int n = logits.rows(), c = logits.cols();
  if (targets.rows() != n || targets.cols() != c)
    throw DimensionError("accuracy: logits and targets shapes differ");
  int hits = 0;
  const auto z = logits.data();
  const auto y = targets.data();
  for (int i = 0; i < n; ++i) {
    int za = 0, ya = 0;
    for (int j = 1; j < c; ++j) {
      const std::size_t off = static_cast<std::size_t>(i) * c + j;
      if (z[off] > z[static_cast<std::size_t>(i) * c + za]) za = j;
      if (y[off] > y[static_cast<std::size_t>(i) * c + ya]) ya = j;
    }
    if (za == ya) ++hits;
  }
  return n == 0 ? 0.0 : 100.0 * static_cast<double>(hits) / n;
}

namespace detail_pipeline {

Model run_training(Model model, const SamplePart& part, int num_classes,
                   int freq_bins, int time_steps, const TrainConfig& cfg,
                   const AugmentPolicy& aug, const StepLoss& loss_fn,
                   std::vector<TrainLogEntry>* log, const std::string& split_tag,
                   const EpochHook& epoch_hook) {
  cfg.validate();
  if (part.size() == 0)
    throw ValidationError("training part must be nonempty");

  auto params = model.parameters();
  Adam opt(params, cfg.adam);
  std::mt19937_64 aug_rng(derive_seed(cfg.seed, "augment"));

  const int steps_per_epoch =
      (part.size() + cfg.batch_size - 1) / cfg.batch_size;
  const int total_steps = std::max(1, cfg.epochs * steps_per_epoch);
  int step = 0;

  if (epoch_hook) epoch_hook(model, 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    double acc_sum = 0.0;
    int batches_seen = 0;
    for (const auto& rows :
         batch_indices(part, cfg.batch_size, cfg.seed, epoch, true)) {
      LabeledBatch batch = make_batch(part, rows, num_classes);
      if (aug.use_freq_mixstyle)
        batch = freq_mixstyle(batch, freq_bins, time_steps, aug.freq_mixstyle,
                              aug_rng);
      if (aug.use_mixup) batch = mixup(batch, aug.mixup, aug_rng);

      Tape tape;
      ForwardResult fr = model.forward(batch.features, &tape);
      Tensor loss = loss_fn(batch, fr, &tape);
      tape.backward(loss);
      opt.step(lr_at(step, total_steps, cfg));
      model.zero_grad();

      loss_sum += loss.value();
      acc_sum += accuracy_percent(fr.logits, batch.scene_targets);
      ++step;
      ++batches_seen;
    }
    if (log)
      log->push_back({epoch, split_tag, loss_sum / batches_seen,
                      acc_sum / batches_seen});
    if (epoch_hook) epoch_hook(model, epoch + 1);
  }
  return model;
}

}  // namespace detail_pipeline

Model train_teacher(const DatasetSplit& data, const NetworkSpec& spec,
                    const TrainConfig& cfg, TeacherMode mode,
                    const DAFAConfig& dafa_cfg, const AugmentPolicy& aug,
                    std::vector<TrainLogEntry>* log) {
  spec.validate();
  if (mode == TeacherMode::dafa) {
    std::set<int> distinct(data.train.device_index.begin(),
                           data.train.device_index.end());
    if (distinct.size() < 2)
      throw ValidationError(
          "dafa teacher training needs >= 2 distinct devices");
    dafa_cfg.validate();
  }

  Model model = init_model(spec, derive_seed(cfg.seed, "init"));
  detail_pipeline::StepLoss loss_fn;
  if (mode == TeacherMode::ce_only) {
    loss_fn = [](const LabeledBatch& b, const ForwardResult& fr, Tape* tape) {
      return cross_entropy(fr.logits, b.scene_targets, tape);
    };
  } else {
    loss_fn = [dafa_cfg](const LabeledBatch& b, const ForwardResult& fr,
                         Tape* tape) {
      return dafa_teacher_loss(fr.logits, fr.embedding, b.scene_targets,
                               b.device_ids, dafa_cfg, tape);
    };
  }
  return detail_pipeline::run_training(std::move(model), data.train,
                                       data.num_classes, data.freq_bins,
                                       data.time_steps, cfg, aug, loss_fn, log,
                                       "train");
}

Model distill_student(const DatasetSplit& data, const NetworkSpec& student_spec,
                      const TeacherEnsemble& ensemble, const KDConfig& kd_cfg,
                      const TrainConfig& cfg, const ComplexityBudget& budget,
                      const AugmentPolicy& aug,
                      std::vector<TrainLogEntry>* log) {
  student_spec.validate();
  kd_cfg.validate();
  const BudgetReport report = enforce_budget(student_spec, budget);
  if (!report.pass)
    throw BudgetError("student spec rejected by complexity budget:\n" +
                      report.text());
  if (ensemble.num_classes() != student_spec.num_classes)
    throw ValidationError("ensemble and student disagree on num_classes");

  Model model = init_model(student_spec, derive_seed(cfg.seed, "init"));
  detail_pipeline::StepLoss loss_fn = [&ensemble, kd_cfg](
                                          const LabeledBatch& b,
                                          const ForwardResult& fr, Tape* tape) {
    // the teacher scores the same augmented batch the student sees
    Tensor zt = ensemble.logits(b.features);
    return kd_loss(fr.logits, zt, b.scene_targets, kd_cfg, tape);
  };
  return detail_pipeline::run_training(std::move(model), data.train,
                                       data.num_classes, data.freq_bins,
                                       data.time_steps, cfg, aug, loss_fn, log,
                                       "train");
}

const Model& ModelBundle::route(
    const std::optional<std::string>& device_id) const {
  if (device_id) {
    auto it = specialists.find(*device_id);
    if (it != specialists.end()) return it->second;
  }
  return base;
}

namespace {

SamplePart filter_device(const SamplePart& part, int device) {
  SamplePart out;
  out.feature_dim = part.feature_dim;
  for (int i : part.indices_of_device(device)) {
    const std::size_t base =
        static_cast<std::size_t>(i) * static_cast<std::size_t>(part.feature_dim);
    out.features.insert(out.features.end(), part.features.begin() + base,
                        part.features.begin() + base + part.feature_dim);
    out.class_index.push_back(part.class_index[static_cast<std::size_t>(i)]);
    out.device_index.push_back(part.device_index[static_cast<std::size_t>(i)]);
  }
  return out;
}

}  // namespace

ModelBundle dsft(const Model& base_student, const DatasetSplit& data,
                 const TrainConfig& ft_cfg, const ComplexityBudget& budget,
                 std::vector<TrainLogEntry>* log) {
  ft_cfg.validate();
  ModelBundle bundle;
  bundle.base = base_student.clone(true);
  bundle.budget_reports["base"] = enforce_budget(base_student.spec(), budget);

  for (int dev : data.seen_device_indices()) {
    const std::string& dev_id = data.devices[static_cast<std::size_t>(dev)].id;
    SamplePart dev_train = filter_device(data.train, dev);
    if (dev_train.size() == 0) {
      bundle.warnings.push_back("device " + dev_id +
                                " has no training samples; skipped");
      continue;
    }
    const auto val_rows = data.validation.indices_of_device(dev);
    LabeledBatch val_batch =
        val_rows.empty() ? LabeledBatch{}
                         : make_batch(data.validation, val_rows,
                                      data.num_classes);

    TrainConfig cfg = ft_cfg;
    cfg.seed = derive_seed(ft_cfg.seed, "dsft/" + dev_id);

    // keep the best-validation epoch; the untouched base is epoch 0
    Model best = base_student.clone(true);
    double best_acc = -1.0;
    auto hook = [&](const Model& m, int /*epoch*/) {
      if (val_batch.size() == 0) return;
      const double acc =
          accuracy_percent(m.forward(val_batch.features).logits,
                           val_batch.scene_targets);
      if (acc > best_acc) {
        best_acc = acc;
        best = m.clone(true);
      }
    };

    detail_pipeline::StepLoss ce_loss = [](const LabeledBatch& b,
                                           const ForwardResult& fr,
                                           Tape* tape) {
      return cross_entropy(fr.logits, b.scene_targets, tape);
    };
    Model finetuned = detail_pipeline::run_training(
        base_student.clone(true), dev_train, data.num_classes, data.freq_bins,
        data.time_steps, cfg, AugmentPolicy::none(), ce_loss, log,
        "dsft/" + dev_id, hook);
    if (val_batch.size() == 0) best = std::move(finetuned);

    bundle.budget_reports[dev_id] = enforce_budget(best.spec(), budget);
    bundle.specialists.emplace(dev_id, std::move(best));
  }
  return bundle;
}

Tensor predict(const ModelBundle& bundle, const Tensor& features,
               const std::optional<std::string>& device_id) {
  const Model& m = bundle.route(device_id);
  return ops::softmax_temp(m.forward(features).logits, 1.0);
}

}  // namespace dafa
