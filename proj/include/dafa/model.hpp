#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dafa/tensor.hpp"

namespace dafa {

enum class Activation { relu };

// Fully connected classifier: trunk input -> hidden... -> embedding with the
// activation after every trunk layer, then a linear head embedding ->
// classes. The embedding (penultimate activation) is exposed so feature
// regularizers can attach to it.
struct NetworkSpec {
  int input_dim = 0;
  std::vector<int> hidden_dims;
  int embedding_dim = 0;
  int num_classes = 0;
  Activation activation = Activation::relu;

  void validate() const;
  // Consecutive (in, out) pairs: trunk layers then the head.
  std::vector<std::pair<int, int>> layer_dims() const;
};

struct ComplexityBudget {
  std::int64_t max_param_bytes = 128 * 1024;
  std::int64_t bytes_per_param = 4;
  std::int64_t max_macs = 30'000'000;
  void validate() const;
};

struct ComplexityCount {
  std::int64_t params = 0;
  std::int64_t macs_per_inference = 0;
};

struct BudgetReport {
  bool pass = false;
  ComplexityCount count;
  std::int64_t param_bytes = 0;
  std::int64_t param_bytes_margin = 0;  // budget minus used, negative = over
  std::int64_t macs_margin = 0;
  std::vector<std::string> violations;  // names each violated limit
  std::string text() const;
};

struct ForwardResult {
  Tensor embedding;  // [n x embedding_dim]
  Tensor logits;     // [n x num_classes]
};

struct Layer {
  Tensor weight;  // [in x out]
  Tensor bias;    // [out]
};

class Model {
public:
  Model() = default;
  Model(NetworkSpec spec, std::vector<Layer> layers);

  const NetworkSpec& spec() const { return spec_; }
  // Trunk layers followed by the head, matching spec().layer_dims().
  const std::vector<Layer>& layers() const { return layers_; }

  // Flat parameter list in deterministic order: weight then bias per layer.
  std::vector<Tensor> parameters() const;
  std::int64_t parameter_count() const;
  void zero_grad() const;

  ForwardResult forward(const Tensor& features, Tape* tape = nullptr) const;

  // Deep copy; the copy's parameters track gradients iff requires_grad.
  Model clone(bool requires_grad) const;
  // Marks all parameters as frozen (no gradient tracking).
  void freeze();

private:
  NetworkSpec spec_;
  std::vector<Layer> layers_;
};

// Per-layer accounting helpers: params = in*out + out, MACs = in*out.
std::int64_t layer_params(int in, int out);
std::int64_t layer_macs(int in, int out);

// Exact integer parameter and per-item MAC counts for a spec.
ComplexityCount count_complexity(const NetworkSpec& spec);

BudgetReport enforce_budget(const NetworkSpec& spec,
                            const ComplexityBudget& budget);

// Glorot-uniform weights, zero biases; bit-reproducible per seed.
Model init_model(const NetworkSpec& spec, std::uint64_t seed);

// Flat binary checkpoint: magic, version, spec fields as little-endian
// integers, then all parameters as little-endian f64 in layer order.
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace dafa
