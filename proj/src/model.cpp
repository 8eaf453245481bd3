#include "dafa/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "dafa/ops.hpp"

namespace dafa {

void NetworkSpec::validate() const {
  if (input_dim < 1 || embedding_dim < 1)
    throw ConfigError("network dims must be >= 1");
  for (int h : hidden_dims)
    if (h < 1) throw ConfigError("hidden dims must be >= 1");
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
}

std::vector<std::pair<int, int>> NetworkSpec::layer_dims() const {
  std::vector<std::pair<int, int>> dims;
  int prev = input_dim;
  for (int h : hidden_dims) {
    dims.emplace_back(prev, h);
    prev = h;
  }
  dims.emplace_back(prev, embedding_dim);
  dims.emplace_back(embedding_dim, num_classes);
  return dims;
}

void ComplexityBudget::validate() const {
  if (max_param_bytes < 1 || bytes_per_param < 1 || max_macs < 1)
    throw ConfigError("complexity budget fields must be positive");
}

std::string BudgetReport::text() const {
  std::ostringstream os;
  os << (pass ? "PASS" : "FAIL") << "\n";
  os << "  params: " << count.params << " (" << param_bytes
     << " bytes), margin " << param_bytes_margin << " bytes\n";
  os << "  macs_per_inference: " << count.macs_per_inference << ", margin "
     << macs_margin << "\n";
  for (const auto& v : violations) os << "  violated: " << v << "\n";
  return os.str();
}

Model::Model(NetworkSpec spec, std::vector<Layer> layers)
    : spec_(std::move(spec)), layers_(std::move(layers)) {}

std::vector<Tensor> Model::parameters() const {
  std::vector<Tensor> params;
  params.reserve(layers_.size() * 2);
  for (const auto& l : layers_) {
    params.push_back(l.weight);
    params.push_back(l.bias);
  }
  return params;
}

std::int64_t Model::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& l : layers_)
    n += static_cast<std::int64_t>(l.weight.size() + l.bias.size());
  return n;
}

void Model::zero_grad() const {
  for (auto& p : parameters()) p.zero_grad();
}

ForwardResult Model::forward(const Tensor& features, Tape* tape) const {
  if (features.rank() != 2 || features.cols() != spec_.input_dim)
    throw DimensionError("forward: expected feature width " +
                         std::to_string(spec_.input_dim) + ", got " +
                         std::to_string(features.rank() == 2 ? features.cols()
                                                             : -1));
  Tensor h = features;
  const std::size_t trunk = layers_.size() - 1;
  for (std::size_t i = 0; i < trunk; ++i) {
    h = ops::add_rowvec(ops::matmul(h, layers_[i].weight, tape),
                        layers_[i].bias, tape);
    h = ops::relu(h, tape);
  }
  const Layer& head = layers_.back();
  Tensor logits =
      ops::add_rowvec(ops::matmul(h, head.weight, tape), head.bias, tape);
  return {h, logits};
}

Model Model::clone(bool requires_grad) const {
  std::vector<Layer> copy;
  copy.reserve(layers_.size());
  for (const auto& l : layers_)
    copy.push_back({l.weight.clone(requires_grad), l.bias.clone(requires_grad)});
  return Model(spec_, std::move(copy));
}

void Model::freeze() {
  for (auto& l : layers_) {
    l.weight = l.weight.clone(false);
    l.bias = l.bias.clone(false);
  }
}

std::int64_t layer_params(int in, int out) {
  return static_cast<std::int64_t>(in) * out + out;
}

std::int64_t layer_macs(int in, int out) {
  return static_cast<std::int64_t>(in) * out;
}

ComplexityCount count_complexity(const NetworkSpec& spec) {
  spec.validate();
  ComplexityCount c;
  for (auto [in, out] : spec.layer_dims()) {
    c.params += layer_params(in, out);
    c.macs_per_inference += layer_macs(in, out);
  }
  return c;
}

BudgetReport enforce_budget(const NetworkSpec& spec,
                            const ComplexityBudget& budget) {
  budget.validate();
  BudgetReport r;
  r.count = count_complexity(spec);
  r.param_bytes = r.count.params * budget.bytes_per_param;
  r.param_bytes_margin = budget.max_param_bytes - r.param_bytes;
  r.macs_margin = budget.max_macs - r.count.macs_per_inference;
  if (r.param_bytes > budget.max_param_bytes)
    r.violations.push_back("param_bytes " + std::to_string(r.param_bytes) +
                           " > max_param_bytes " +
                           std::to_string(budget.max_param_bytes));
  if (r.count.macs_per_inference > budget.max_macs)
    r.violations.push_back(
        "macs_per_inference " + std::to_string(r.count.macs_per_inference) +
        " > max_macs " + std::to_string(budget.max_macs));
  r.pass = r.violations.empty();
  return r;
}

Model init_model(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::vector<Layer> layers;
  for (auto [in, out] : spec.layer_dims()) {
    const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
    std::vector<double> w(static_cast<std::size_t>(in) * out);
    for (double& v : w)
      v = std::uniform_real_distribution<double>(-bound, bound)(rng);
    layers.push_back({Tensor::from({in, out}, std::move(w), true),
                      Tensor::zeros({out}, true)});
  }
  return Model(spec, std::move(layers));
}

// ---------------------------------------------------------------------------
// checkpoint format
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'D', 'A', 'F', 'M'};
constexpr std::uint16_t kVersion = 1;

void put_u16(std::string& buf, std::uint16_t v) {
  buf.push_back(static_cast<char>(v & 0xff));
  buf.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i)
    buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& buf, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, sizeof(bits));
  put_u64(buf, bits);
}

class Reader {
public:
  Reader(const std::string& buf, const std::string& what)
      : buf_(buf), what_(what) {}

  std::size_t offset() const { return pos_; }

  void expect_bytes(const char* expected, std::size_t n, const char* name) {
    need(n, name);
    if (std::memcmp(buf_.data() + pos_, expected, n) != 0)
      throw FormatError(what_ + ": bad " + name, pos_);
    pos_ += n;
  }

  std::uint16_t u16(const char* name) {
    need(2, name);
    std::uint16_t v = 0;
    for (int i = 1; i >= 0; --i)
      v = static_cast<std::uint16_t>((v << 8) |
                                     static_cast<unsigned char>(buf_[pos_ + i]));
    pos_ += 2;
    return v;
  }

  std::uint32_t u32(const char* name) {
    need(4, name);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i)
      v = (v << 8) | static_cast<unsigned char>(buf_[pos_ + i]);
    pos_ += 4;
    return v;
  }

  std::uint64_t u64(const char* name) {
    need(8, name);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i)
      v = (v << 8) | static_cast<unsigned char>(buf_[pos_ + i]);
    pos_ += 8;
    return v;
  }

  double f64(const char* name) {
    const std::uint64_t bits = u64(name);
    double d;
    std::memcpy(&d, &bits, sizeof(d));
    return d;
  }

  std::string bytes(std::size_t n, const char* name) {
    need(n, name);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  void expect_end() {
    if (pos_ != buf_.size())
      throw FormatError(what_ + ": trailing bytes", pos_);
  }

private:
  void need(std::size_t n, const char* name) {
    if (pos_ + n > buf_.size())
      throw FormatError(what_ + ": truncated while reading " +
                            std::string(name),
                        pos_);
  }

  const std::string& buf_;
  std::string what_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, const std::string& buf) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace

void save_model(const Model& model, const std::filesystem::path& path) {
  const NetworkSpec& spec = model.spec();
  std::string buf;
  buf.append(kMagic, 4);
  put_u16(buf, kVersion);
  put_u32(buf, static_cast<std::uint32_t>(spec.input_dim));
  put_u32(buf, static_cast<std::uint32_t>(spec.hidden_dims.size()));
  for (int h : spec.hidden_dims) put_u32(buf, static_cast<std::uint32_t>(h));
  put_u32(buf, static_cast<std::uint32_t>(spec.embedding_dim));
  put_u32(buf, static_cast<std::uint32_t>(spec.num_classes));
  put_u32(buf, 0);  // activation: relu
  put_u64(buf, static_cast<std::uint64_t>(model.parameter_count()));
  for (const auto& layer : model.layers()) {
    for (double v : layer.weight.data()) put_f64(buf, v);
    for (double v : layer.bias.data()) put_f64(buf, v);
  }
  write_file(path, buf);
}

Model load_model(const std::filesystem::path& path) {
  const std::string buf = read_file(path);
  Reader r(buf, "model checkpoint " + path.string());
  r.expect_bytes(kMagic, 4, "magic");
  const std::uint16_t version = r.u16("version");
  if (version != kVersion)
    throw FormatError("model checkpoint: unsupported version " +
                          std::to_string(version),
                      r.offset());
  NetworkSpec spec;
  spec.input_dim = static_cast<int>(r.u32("input_dim"));
  const std::uint32_t nhidden = r.u32("hidden count");
  for (std::uint32_t i = 0; i < nhidden; ++i)
    spec.hidden_dims.push_back(static_cast<int>(r.u32("hidden dim")));
  spec.embedding_dim = static_cast<int>(r.u32("embedding_dim"));
  spec.num_classes = static_cast<int>(r.u32("num_classes"));
  const std::uint32_t act = r.u32("activation");
  if (act != 0)
    throw FormatError("model checkpoint: unknown activation code " +
                          std::to_string(act),
                      r.offset());
  spec.validate();
  const std::uint64_t expected = r.u64("parameter count");
  if (expected != static_cast<std::uint64_t>(count_complexity(spec).params))
    throw FormatError("model checkpoint: parameter count mismatch",
                      r.offset());

  std::vector<Layer> layers;
  for (auto [in, out] : spec.layer_dims()) {
    std::vector<double> w(static_cast<std::size_t>(in) * out);
    for (double& v : w) v = r.f64("weight");
    std::vector<double> b(static_cast<std::size_t>(out));
    for (double& v : b) v = r.f64("bias");
    layers.push_back({Tensor::from({in, out}, std::move(w), true),
                      Tensor::from({out}, std::move(b), true)});
  }
  r.expect_end();
  return Model(spec, std::move(layers));
}

}  // namespace dafa
