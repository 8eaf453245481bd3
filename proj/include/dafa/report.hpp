#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dafa/data.hpp"
#include "dafa/pipeline.hpp"

namespace dafa {

struct DeviceMetrics {
  double accuracy = 0.0;  // percent
  double log_loss = 0.0;
  int count = 0;
};

// Per-device metrics plus count-weighted aggregates over the overall /
// real / seen / unseen partitions of the device roster.
struct EvalReport {
  std::string model_id;
  std::string stage;
  std::uint64_t dataset_hash = 0;
  std::vector<std::pair<std::string, DeviceMetrics>> per_device;  // roster order
  DeviceMetrics overall, real, seen, unseen;
  std::vector<std::string> warnings;
};

struct DeltaReport {
  std::string before_stage, after_stage;
  std::uint64_t dataset_hash = 0;
  // roster order; before/after accuracy and their difference per device
  struct Row {
    std::string device_id;
    double before = 0.0, after = 0.0, delta = 0.0;
  };
  std::vector<Row> rows;
  Row overall;
};

// Validation-set evaluation of a routed bundle. With use_device_labels off,
// every sample goes through the base model (ablation of test-time device
// labels). Accuracy is the argmax match rate; log loss clips probabilities
// at 1e-15 before the log.
EvalReport evaluate(const ModelBundle& bundle, const DatasetSplit& data,
                    bool use_device_labels, const std::string& model_id,
                    const std::string& stage);

// after - before, per device and overall. Both reports must stem from the
// same validation data (hash check).
DeltaReport delta(const EvalReport& before, const EvalReport& after);

// Fixed-width table in roster order with a final Overall column.
std::string render_text(const EvalReport& report);
std::string render_text(const DeltaReport& report);

// Machine-readable JSON; parse(render(r)) reproduces r exactly.
std::string render_structured(const EvalReport& report);
std::string render_structured(const DeltaReport& report);
EvalReport parse_report(const std::string& json_text);
DeltaReport parse_delta(const std::string& json_text);

}  // namespace dafa
