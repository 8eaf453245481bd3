#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dafa/data.hpp"
#include "dafa/losses.hpp"
#include "dafa/model.hpp"
#include "dafa/optimizer.hpp"
#include "dafa/pipeline.hpp"

namespace dafa {

struct TeacherEntry {
  std::string name;
  TeacherMode mode = TeacherMode::ce_only;
};

// Whole-experiment configuration, loaded from a JSON file with one flat
// section per concern. Unknown keys anywhere are errors.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::string out_dir = "runs/default";

  SceneSpec scene;
  std::vector<DeviceSpec> devices;
  int train_per_cell = 40;
  int val_per_cell = 20;
  std::string dataset_path;  // optional: load instead of generating

  NetworkSpec student_spec;
  NetworkSpec teacher_spec;
  std::vector<TeacherEntry> teachers;
  std::vector<std::string> ensemble;  // teacher names used for distillation

  KDConfig kd;
  DAFAConfig dafa;
  AugmentPolicy augment;
  bool augment_dsft = false;

  TrainConfig train_teacher_cfg;
  TrainConfig train_distill_cfg;
  TrainConfig train_dsft_cfg;

  ComplexityBudget budget;

  // Canonical serialized form (sorted keys) of the effective config; stage
  // manifests embed its hash.
  std::string canonical_json;
  std::uint64_t config_hash() const;

  // Cross-field consistency plus the student budget gate.
  void validate() const;

  static ExperimentConfig from_json_text(
      const std::string& text,
      std::optional<std::uint64_t> seed_override = std::nullopt);
  static ExperimentConfig load(
      const std::filesystem::path& path,
      std::optional<std::uint64_t> seed_override = std::nullopt);

  // Built-in defaults (also shipped as configs/default.json).
  static std::string default_json_text();
};

}  // namespace dafa
