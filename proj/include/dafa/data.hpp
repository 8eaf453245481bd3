#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dafa/tensor.hpp"

namespace dafa {

// Shape and spread of the synthetic scene classes. Features are F x T
// frequency-time grids stored row-major as a flat vector of length F*T.
struct SceneSpec {
  int num_classes = 10;
  int freq_bins = 8;
  int time_steps = 8;
  double prototype_scale = 1.0;
  double within_class_noise = 0.3;

  int feature_dim() const { return freq_bins * time_steps; }
  void validate() const;
};

// A recording channel: per-frequency linear distortion plus additive noise.
struct DeviceSpec {
  std::string id;
  std::vector<double> gain;    // length F, all > 0
  std::vector<double> offset;  // length F
  double noise_std = 0.0;
  bool seen = true;
  bool real = false;

  void validate(int freq_bins) const;
};

// Roster entry carried by datasets; channel parameters stay with generation.
struct DeviceInfo {
  std::string id;
  bool seen = true;
  bool real = false;
  bool operator==(const DeviceInfo&) const = default;
};

// One batch as consumed by the losses: features [n x F*T], row-stochastic
// scene targets [n x c], and one device index per row.
struct LabeledBatch {
  Tensor features;
  Tensor scene_targets;
  std::vector<int> device_ids;

  int size() const { return features.rows(); }
};

// Flat sample storage for one split part.
struct SamplePart {
  int feature_dim = 0;
  std::vector<double> features;  // n x feature_dim, row-major
  std::vector<int> class_index;
  std::vector<int> device_index;

  int size() const { return static_cast<int>(class_index.size()); }
  std::vector<int> indices_of_device(int device) const;
};

struct DatasetSplit {
  int freq_bins = 0;
  int time_steps = 0;
  int num_classes = 0;
  std::vector<DeviceInfo> devices;
  SamplePart train;
  SamplePart validation;

  int feature_dim() const { return freq_bins * time_steps; }
  std::vector<int> seen_device_indices() const;
  std::vector<int> unseen_device_indices() const;
  // Throws ValidationError on any structural violation, in particular
  // unseen-device samples inside the training part.
  void check() const;
  std::string serialize() const;
  std::uint64_t hash() const;
};

// Draws the full device-shifted dataset. Training holds seen devices only;
// validation covers every device. Per (class, device) cell: train_per_cell
// training samples (seen devices) and val_per_cell validation samples.
// Deterministic per seed; features are quantized to f32 at generation so the
// f32 on-disk format round-trips bit-exactly.
DatasetSplit generate(const SceneSpec& scene,
                      const std::vector<DeviceSpec>& devices,
                      int train_per_cell, int val_per_cell,
                      std::uint64_t seed);

void write_dataset(const DatasetSplit& split,
                   const std::filesystem::path& path);
DatasetSplit read_dataset(const std::filesystem::path& path);
DatasetSplit parse_dataset(const std::string& bytes, const std::string& what);

// Deterministic batch plan for one epoch. With shuffle, each device pool is
// shuffled independently and pools are drained round-robin in roster order,
// so batches mix devices whenever more than one pool is nonempty; without
// shuffle, original order. The last partial batch is kept. The union of all
// batches is exactly the part.
std::vector<std::vector<int>> batch_indices(const SamplePart& part,
                                            int batch_size,
                                            std::uint64_t seed, int epoch,
                                            bool shuffle);

// Materializes rows into a LabeledBatch with one-hot targets.
LabeledBatch make_batch(const SamplePart& part, const std::vector<int>& rows,
                        int num_classes);

std::vector<LabeledBatch> batches(const SamplePart& part, int num_classes,
                                  int batch_size, std::uint64_t seed,
                                  int epoch, bool shuffle);

}  // namespace dafa
