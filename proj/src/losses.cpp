#include "dafa/losses.hpp"

#include <cmath>
#include <string>

#include "dafa/kernels.hpp"

namespace dafa {

void KDConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw ParameterError("KD lambda must lie in [0, 1]");
  if (!(tau > 0.0)) throw ParameterError("KD tau must be > 0");
}

void DAFAConfig::validate() const {
  if (lambda_dcsl < 0.0 || lambda_gdal < 0.0)
    throw ParameterError("DAFA loss weights must be nonnegative");
  if (!(epsilon > 0.0)) throw ParameterError("DAFA epsilon must be > 0");
}

namespace {

void check_logits_targets(const Tensor& logits, const Tensor& targets) {
  if (logits.rank() != 2 || targets.rank() != 2 ||
      logits.rows() != targets.rows() || logits.cols() != targets.cols())
    throw DimensionError("cross_entropy: logits and targets shapes differ");
  const int n = targets.rows(), c = targets.cols();
  const auto t = targets.data();
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < c; ++j) s += t[static_cast<std::size_t>(i) * c + j];
    if (std::abs(s - 1.0) > 1e-9)
      throw ValidationError("target row " + std::to_string(i) +
                            " sums to " + std::to_string(s) + ", expected 1");
  }
}

// Device id -> row indices, in ascending device id order; row order within a
// device follows the batch.
std::map<int, std::vector<int>> group_by_device(
    const std::vector<int>& device_ids) {
  std::map<int, std::vector<int>> groups;
  for (std::size_t i = 0; i < device_ids.size(); ++i)
    groups[device_ids[i]].push_back(static_cast<int>(i));
  return groups;
}

void check_embedding_batch(const Tensor& embeddings,
                           const std::vector<int>& device_ids,
                           const char* op) {
  if (embeddings.rank() != 2)
    throw DimensionError(std::string(op) + ": embeddings must be rank 2");
  if (embeddings.rows() == 0 || device_ids.empty())
    throw ValidationError(std::string(op) + ": batch must be nonempty");
  if (static_cast<std::size_t>(embeddings.rows()) != device_ids.size())
    throw ValidationError(std::string(op) +
                          ": device id count does not match batch rows");
}

// sum over elements of (a - b)^2 for two equal-length vectors, via ops.
Tensor squared_distance(const Tensor& a, const Tensor& b, Tape* tape) {
  Tensor d = ops::sub(a, b, tape);
  return ops::sum_all(ops::mul(d, d, tape), tape);
}

}  // namespace

Tensor cross_entropy(const Tensor& logits, const Tensor& targets,
                     Tape* tape) {
  check_logits_targets(logits, targets);
  const int n = logits.rows();
  Tensor ls = ops::log_softmax(logits, tape);
  Tensor weighted = ops::mul(targets.requires_grad() ? targets.detach()
                                                     : targets,
                             ls, tape);
  return ops::mul_scalar(ops::sum_all(weighted, tape),
                         -1.0 / static_cast<double>(n), tape);
}

Tensor kd_loss(const Tensor& student_logits, const Tensor& teacher_logits,
               const Tensor& targets, const KDConfig& cfg, Tape* tape) {
  cfg.validate();
  if (student_logits.shape() != teacher_logits.shape())
    throw DimensionError("kd_loss: student and teacher logit shapes differ");
  if (student_logits.shape() != targets.shape())
    throw DimensionError("kd_loss: logits and targets shapes differ");

  if (cfg.lambda == 0.0) return cross_entropy(student_logits, targets, tape);

  // teachers are frozen: their logits never carry gradient
  const Tensor zt = teacher_logits.requires_grad() ? teacher_logits.detach()
                                                   : teacher_logits;
  const int n = student_logits.rows();
  const double inv_tau = 1.0 / cfg.tau;

  Tensor ls_s =
      ops::log_softmax(ops::mul_scalar(student_logits, inv_tau, tape), tape);
  Tensor ls_t = ops::log_softmax(ops::mul_scalar(zt, inv_tau), nullptr);
  Tensor p_s = ops::exp(ls_s, tape);
  // KL(p_s || p_t) summed over classes, averaged over rows
  Tensor kl = ops::mul_scalar(
      ops::sum_all(ops::mul(p_s, ops::sub(ls_s, ls_t, tape), tape), tape),
      1.0 / static_cast<double>(n), tape);
  Tensor soft_term =
      ops::mul_scalar(kl, cfg.lambda * cfg.tau * cfg.tau, tape);

  if (cfg.lambda == 1.0) return soft_term;

  Tensor hard_term = ops::mul_scalar(cross_entropy(student_logits, targets, tape),
                                     1.0 - cfg.lambda, tape);
  return ops::add(hard_term, soft_term, tape);
}

DeviceBatchStats device_batch_stats(const Tensor& embeddings,
                                    const std::vector<int>& device_ids) {
  check_embedding_batch(embeddings, device_ids, "device_batch_stats");
  const int n = embeddings.rows(), e = embeddings.cols();
  const auto data = embeddings.data();
  const auto groups = group_by_device(device_ids);

  DeviceBatchStats stats;
  stats.global_centroid.assign(static_cast<std::size_t>(e), 0.0);
  std::vector<double> column(static_cast<std::size_t>(n));

  for (int j = 0; j < e; ++j) {
    for (int i = 0; i < n; ++i)
      column[static_cast<std::size_t>(i)] =
          data[static_cast<std::size_t>(i) * e + j];
    stats.global_centroid[static_cast<std::size_t>(j)] =
        kernels::exact_sum(column) / static_cast<double>(n);
  }

  std::vector<double> member(0);
  for (const auto& [dev, rows] : groups) {
    stats.counts[dev] = static_cast<int>(rows.size());
    auto& centroid = stats.centroids[dev];
    centroid.assign(static_cast<std::size_t>(e), 0.0);
    member.resize(rows.size());
    for (int j = 0; j < e; ++j) {
      for (std::size_t i = 0; i < rows.size(); ++i)
        member[i] = data[static_cast<std::size_t>(rows[i]) * e + j];
      centroid[static_cast<std::size_t>(j)] =
          kernels::exact_sum(member) / static_cast<double>(rows.size());
    }
  }
  return stats;
}

Tensor dcsl(const Tensor& embeddings, const std::vector<int>& device_ids,
            double epsilon, Tape* tape) {
  check_embedding_batch(embeddings, device_ids, "dcsl");
  if (!(epsilon > 0.0)) throw ParameterError("dcsl epsilon must be > 0");

  const auto groups = group_by_device(device_ids);
  if (groups.size() < 2) return Tensor::scalar(0.0);

  const int n = embeddings.rows();
  std::vector<Tensor> centroids;
  Tensor within_sum;  // sum over samples of ||x_i - mu_{d(i)}||^2
  for (const auto& [dev, rows] : groups) {
    Tensor gathered = ops::gather_rows(embeddings, rows, tape);
    Tensor mu = ops::mean_axis(gathered, 0, tape);
    centroids.push_back(mu);
    Tensor diff = ops::sub_rowvec(gathered, mu, tape);
    Tensor contrib = ops::sum_all(ops::mul(diff, diff, tape), tape);
    within_sum =
        within_sum.defined() ? ops::add(within_sum, contrib, tape) : contrib;
  }
  Tensor s_w =
      ops::mul_scalar(within_sum, 1.0 / static_cast<double>(n), tape);

  Tensor between_sum;  // over unordered centroid pairs
  int pairs = 0;
  for (std::size_t i = 0; i < centroids.size(); ++i)
    for (std::size_t j = i + 1; j < centroids.size(); ++j) {
      Tensor d2 = squared_distance(centroids[i], centroids[j], tape);
      between_sum =
          between_sum.defined() ? ops::add(between_sum, d2, tape) : d2;
      ++pairs;
    }
  Tensor s_b =
      ops::mul_scalar(between_sum, 1.0 / static_cast<double>(pairs), tape);

  return ops::div(s_w, ops::add_scalar(s_b, epsilon, tape), tape);
}

Tensor gdal(const Tensor& embeddings, const std::vector<int>& device_ids,
            Tape* tape) {
  check_embedding_batch(embeddings, device_ids, "gdal");

  const auto groups = group_by_device(device_ids);
  Tensor mu_global = ops::mean_axis(embeddings, 0, tape);

  Tensor total;
  for (const auto& [dev, rows] : groups) {
    Tensor mu = ops::mean_axis(ops::gather_rows(embeddings, rows, tape), 0,
                               tape);
    Tensor d2 = squared_distance(mu, mu_global, tape);
    total = total.defined() ? ops::add(total, d2, tape) : d2;
  }
  return ops::mul_scalar(total, 1.0 / static_cast<double>(groups.size()),
                         tape);
}

Tensor dafa_teacher_loss(const Tensor& logits, const Tensor& embeddings,
                         const Tensor& targets,
                         const std::vector<int>& device_ids,
                         const DAFAConfig& cfg, Tape* tape) {
  cfg.validate();
  if (logits.rows() != embeddings.rows() ||
      static_cast<std::size_t>(logits.rows()) != device_ids.size())
    throw ValidationError(
        "dafa_teacher_loss: logits, embeddings and device ids disagree on n");

  Tensor loss = cross_entropy(logits, targets, tape);
  if (cfg.lambda_dcsl > 0.0) {
    Tensor t = dcsl(embeddings, device_ids, cfg.epsilon, tape);
    loss = ops::add(loss, ops::mul_scalar(t, cfg.lambda_dcsl, tape), tape);
  }
  if (cfg.lambda_gdal > 0.0) {
    Tensor t = gdal(embeddings, device_ids, tape);
    loss = ops::add(loss, ops::mul_scalar(t, cfg.lambda_gdal, tape), tape);
  }
  return loss;
}

}  // namespace dafa
