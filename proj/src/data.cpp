#include "dafa/data.hpp"

#include <algorithm>
#include <cstring>
#include <map>
#include <random>
#include <set>

#include "dafa/util.hpp"

namespace dafa {

void SceneSpec::validate() const {
  if (num_classes < 2) throw ValidationError("scene: num_classes must be >= 2");
  if (freq_bins < 1 || time_steps < 1)
    throw ValidationError("scene: freq_bins and time_steps must be >= 1");
  if (prototype_scale <= 0.0)
    throw ValidationError("scene: prototype_scale must be > 0");
  if (within_class_noise < 0.0)
    throw ValidationError("scene: within_class_noise must be >= 0");
}

void DeviceSpec::validate(int freq_bins) const {
  if (id.empty()) throw ValidationError("device id must be nonempty");
  if (static_cast<int>(gain.size()) != freq_bins ||
      static_cast<int>(offset.size()) != freq_bins)
    throw ValidationError("device " + id +
                          ": gain/offset length must equal freq_bins");
  for (double g : gain)
    if (!(g > 0.0))
      throw ValidationError("device " + id + ": gains must be positive");
  if (noise_std < 0.0)
    throw ValidationError("device " + id + ": noise_std must be >= 0");
}

std::vector<int> SamplePart::indices_of_device(int device) const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i)
    if (device_index[static_cast<std::size_t>(i)] == device) out.push_back(i);
  return out;
}

std::vector<int> DatasetSplit::seen_device_indices() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < devices.size(); ++i)
    if (devices[i].seen) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<int> DatasetSplit::unseen_device_indices() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < devices.size(); ++i)
    if (!devices[i].seen) out.push_back(static_cast<int>(i));
  return out;
}

namespace {

void check_part(const DatasetSplit& split, const SamplePart& part,
                const char* name) {
  if (part.feature_dim != split.feature_dim())
    throw ValidationError(std::string(name) + ": feature_dim mismatch");
  const std::size_t n = part.class_index.size();
  if (part.device_index.size() != n ||
      part.features.size() != n * static_cast<std::size_t>(part.feature_dim))
    throw ValidationError(std::string(name) + ": ragged sample arrays");
  for (std::size_t i = 0; i < n; ++i) {
    const int c = part.class_index[i], d = part.device_index[i];
    if (c < 0 || c >= split.num_classes)
      throw ValidationError(std::string(name) + ": class index out of range");
    if (d < 0 || d >= static_cast<int>(split.devices.size()))
      throw ValidationError(std::string(name) + ": device index out of range");
  }
}

}  // namespace

void DatasetSplit::check() const {
  if (freq_bins < 1 || time_steps < 1 || num_classes < 2)
    throw ValidationError("dataset: invalid header dims");
  std::set<std::string> ids;
  for (const auto& d : devices)
    if (!ids.insert(d.id).second)
      throw ValidationError("dataset: duplicate device id " + d.id);
  check_part(*this, train, "train");
  check_part(*this, validation, "validation");
  for (int d : train.device_index)
    if (!devices[static_cast<std::size_t>(d)].seen)
      throw ValidationError("dataset: unseen-device sample leaked into train");
}

namespace {

std::vector<double> draw_normal_vec(std::mt19937_64& rng, int n,
                                    double stddev) {
  std::vector<double> out(static_cast<std::size_t>(n), 0.0);
  if (stddev > 0.0) {
    std::normal_distribution<double> dist(0.0, stddev);
    for (double& v : out) v = dist(rng);
  }
  return out;
}

double quantize_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace

DatasetSplit generate(const SceneSpec& scene,
                      const std::vector<DeviceSpec>& devices,
                      int train_per_cell, int val_per_cell,
                      std::uint64_t seed) {
  scene.validate();
  for (const auto& d : devices) d.validate(scene.freq_bins);
  int n_seen = 0, n_unseen = 0;
  for (const auto& d : devices) (d.seen ? n_seen : n_unseen)++;
  if (n_seen < 2 || n_unseen < 1)
    throw ValidationError(
        "generate: need >= 2 seen and >= 1 unseen devices, got " +
        std::to_string(n_seen) + " seen / " + std::to_string(n_unseen) +
        " unseen");
  if (train_per_cell < 1 || val_per_cell < 1)
    throw ValidationError("generate: per-cell sample counts must be >= 1");

  const int F = scene.freq_bins, T = scene.time_steps;
  const int dim = scene.feature_dim();

  std::mt19937_64 rng(derive_seed(seed, "dataset"));

  // class prototypes, one draw per seed
  std::vector<std::vector<double>> prototypes;
  prototypes.reserve(static_cast<std::size_t>(scene.num_classes));
  for (int k = 0; k < scene.num_classes; ++k)
    prototypes.push_back(draw_normal_vec(rng, dim, scene.prototype_scale));

  DatasetSplit split;
  split.freq_bins = F;
  split.time_steps = T;
  split.num_classes = scene.num_classes;
  for (const auto& d : devices) split.devices.push_back({d.id, d.seen, d.real});
  split.train.feature_dim = dim;
  split.validation.feature_dim = dim;

  for (std::size_t di = 0; di < devices.size(); ++di) {
    const DeviceSpec& dev = devices[di];
    const int per_cell = (dev.seen ? train_per_cell : 0) + val_per_cell;
    for (int k = 0; k < scene.num_classes; ++k) {
      for (int s = 0; s < per_cell; ++s) {
        const auto latent_noise =
            draw_normal_vec(rng, dim, scene.within_class_noise);
        const auto channel_noise = draw_normal_vec(rng, dim, dev.noise_std);
        SamplePart& part = (dev.seen && s < train_per_cell)
                               ? split.train
                               : split.validation;
        for (int f = 0; f < F; ++f)
          for (int t = 0; t < T; ++t) {
            const std::size_t j = static_cast<std::size_t>(f) * T + t;
            const double z = prototypes[static_cast<std::size_t>(k)][j] +
                             latent_noise[j];
            part.features.push_back(quantize_f32(
                dev.gain[static_cast<std::size_t>(f)] * z +
                dev.offset[static_cast<std::size_t>(f)] + channel_noise[j]));
          }
        part.class_index.push_back(k);
        part.device_index.push_back(static_cast<int>(di));
      }
    }
  }
  split.check();
  return split;
}

// ---------------------------------------------------------------------------
// file format
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'D', 'A', 'F', 'A'};
constexpr std::uint16_t kVersion = 1;

void put_u16(std::string& buf, std::uint16_t v) {
  buf.push_back(static_cast<char>(v & 0xff));
  buf.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i)
    buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& buf, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, sizeof(bits));
  put_u32(buf, bits);
}

void append_part(std::string& buf, const SamplePart& part) {
  for (int i = 0; i < part.size(); ++i) {
    put_u16(buf,
            static_cast<std::uint16_t>(part.device_index[static_cast<std::size_t>(i)]));
    put_u16(buf,
            static_cast<std::uint16_t>(part.class_index[static_cast<std::size_t>(i)]));
    const std::size_t base =
        static_cast<std::size_t>(i) * static_cast<std::size_t>(part.feature_dim);
    for (int j = 0; j < part.feature_dim; ++j)
      put_f32(buf, static_cast<float>(part.features[base + static_cast<std::size_t>(j)]));
  }
}

class ByteReader {
public:
  ByteReader(const std::string& buf, std::string what)
      : buf_(buf), what_(std::move(what)) {}

  std::size_t offset() const { return pos_; }

  void expect_magic() {
    need(4, "magic");
    if (std::memcmp(buf_.data() + pos_, kMagic, 4) != 0)
      throw FormatError(what_ + ": bad magic", pos_);
    pos_ += 4;
  }

  std::uint16_t u16(const char* name) {
    need(2, name);
    const auto b0 = static_cast<unsigned char>(buf_[pos_]);
    const auto b1 = static_cast<unsigned char>(buf_[pos_ + 1]);
    pos_ += 2;
    return static_cast<std::uint16_t>(b0 | (b1 << 8));
  }

  std::uint32_t u32(const char* name) {
    need(4, name);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i)
      v = (v << 8) | static_cast<unsigned char>(buf_[pos_ + i]);
    pos_ += 4;
    return v;
  }

  float f32(const char* name) {
    const std::uint32_t bits = u32(name);
    float f;
    std::memcpy(&f, &bits, sizeof(f));
    return f;
  }

  std::string bytes(std::size_t n, const char* name) {
    need(n, name);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::uint8_t u8(const char* name) {
    need(1, name);
    return static_cast<std::uint8_t>(buf_[pos_++]);
  }

  void expect_end() {
    if (pos_ != buf_.size()) throw FormatError(what_ + ": trailing bytes", pos_);
  }

private:
  void need(std::size_t n, const char* name) {
    if (pos_ + n > buf_.size())
      throw FormatError(what_ + ": truncated while reading " + std::string(name),
                        pos_);
  }

  const std::string& buf_;
  std::string what_;
  std::size_t pos_ = 0;
};

void read_part(ByteReader& r, SamplePart& part, std::uint32_t n, int dim) {
  part.feature_dim = dim;
  part.features.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(dim));
  for (std::uint32_t i = 0; i < n; ++i) {
    part.device_index.push_back(r.u16("record device index"));
    part.class_index.push_back(r.u16("record class index"));
    for (int j = 0; j < dim; ++j)
      part.features.push_back(static_cast<double>(r.f32("record feature")));
  }
}

}  // namespace

std::string DatasetSplit::serialize() const {
  std::string buf;
  buf.append(kMagic, 4);
  put_u16(buf, kVersion);
  put_u32(buf, static_cast<std::uint32_t>(train.size()));
  put_u32(buf, static_cast<std::uint32_t>(validation.size()));
  put_u32(buf, static_cast<std::uint32_t>(freq_bins));
  put_u32(buf, static_cast<std::uint32_t>(time_steps));
  put_u32(buf, static_cast<std::uint32_t>(num_classes));
  put_u32(buf, static_cast<std::uint32_t>(devices.size()));
  for (const auto& d : devices) {
    put_u16(buf, static_cast<std::uint16_t>(d.id.size()));
    buf.append(d.id);
    buf.push_back(static_cast<char>((d.seen ? 1 : 0) | (d.real ? 2 : 0)));
  }
  append_part(buf, train);
  append_part(buf, validation);
  return buf;
}

std::uint64_t DatasetSplit::hash() const { return hash_bytes(serialize()); }

void write_dataset(const DatasetSplit& split,
                   const std::filesystem::path& path) {
  split.check();
  write_file_bytes(path, split.serialize());
}

DatasetSplit parse_dataset(const std::string& bytes, const std::string& what) {
  ByteReader r(bytes, what);
  r.expect_magic();
  const std::uint16_t version = r.u16("version");
  if (version != kVersion)
    throw FormatError(what + ": unsupported version " + std::to_string(version),
                      r.offset());
  const std::uint32_t n_train = r.u32("train count");
  const std::uint32_t n_val = r.u32("validation count");
  DatasetSplit split;
  split.freq_bins = static_cast<int>(r.u32("freq_bins"));
  split.time_steps = static_cast<int>(r.u32("time_steps"));
  split.num_classes = static_cast<int>(r.u32("num_classes"));
  const std::uint32_t n_dev = r.u32("device count");
  for (std::uint32_t i = 0; i < n_dev; ++i) {
    const std::uint16_t len = r.u16("device id length");
    DeviceInfo info;
    info.id = r.bytes(len, "device id");
    const std::uint8_t flags = r.u8("device flags");
    info.seen = (flags & 1) != 0;
    info.real = (flags & 2) != 0;
    split.devices.push_back(std::move(info));
  }
  read_part(r, split.train, n_train, split.feature_dim());
  read_part(r, split.validation, n_val, split.feature_dim());
  r.expect_end();
  split.check();
  return split;
}

DatasetSplit read_dataset(const std::filesystem::path& path) {
  return parse_dataset(read_file_bytes(path), "dataset " + path.string());
}

// ---------------------------------------------------------------------------
// batching
// ---------------------------------------------------------------------------

std::vector<std::vector<int>> batch_indices(const SamplePart& part,
                                            int batch_size,
                                            std::uint64_t seed, int epoch,
                                            bool shuffle) {
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  const int n = part.size();
  std::vector<int> order;
  order.reserve(static_cast<std::size_t>(n));

  if (!shuffle) {
    for (int i = 0; i < n; ++i) order.push_back(i);
  } else {
    // device-stratified: shuffle each device pool, then drain round-robin in
    // device index order so batches stay multi-device while pools last
    std::map<int, std::vector<int>> pools;
    for (int i = 0; i < n; ++i)
      pools[part.device_index[static_cast<std::size_t>(i)]].push_back(i);
    std::mt19937_64 rng(
        mix_seed(seed, 0x626174636800ULL + static_cast<std::uint64_t>(epoch)));
    for (auto& [dev, pool] : pools) std::shuffle(pool.begin(), pool.end(), rng);
    std::vector<std::size_t> cursor(pools.size(), 0);
    bool any = true;
    while (any) {
      any = false;
      std::size_t pi = 0;
      for (auto& [dev, pool] : pools) {
        if (cursor[pi] < pool.size()) {
          order.push_back(pool[cursor[pi]++]);
          any = true;
        }
        ++pi;
      }
    }
  }

  std::vector<std::vector<int>> out;
  for (int start = 0; start < n; start += batch_size) {
    const int end = std::min(n, start + batch_size);
    out.emplace_back(order.begin() + start, order.begin() + end);
  }
  return out;
}

LabeledBatch make_batch(const SamplePart& part, const std::vector<int>& rows,
                        int num_classes) {
  const int dim = part.feature_dim;
  const int n = static_cast<int>(rows.size());
  std::vector<double> features(static_cast<std::size_t>(n) * dim);
  std::vector<double> targets(
      static_cast<std::size_t>(n) * static_cast<std::size_t>(num_classes), 0.0);
  std::vector<int> device_ids(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int src = rows[static_cast<std::size_t>(i)];
    std::copy_n(part.features.data() + static_cast<std::size_t>(src) * dim, dim,
                features.data() + static_cast<std::size_t>(i) * dim);
    targets[static_cast<std::size_t>(i) * num_classes +
            part.class_index[static_cast<std::size_t>(src)]] = 1.0;
    device_ids[static_cast<std::size_t>(i)] =
        part.device_index[static_cast<std::size_t>(src)];
  }
  return {Tensor::from({n, dim}, std::move(features)),
          Tensor::from({n, num_classes}, std::move(targets)),
          std::move(device_ids)};
}

std::vector<LabeledBatch> batches(const SamplePart& part, int num_classes,
                                  int batch_size, std::uint64_t seed,
                                  int epoch, bool shuffle) {
  std::vector<LabeledBatch> out;
  for (const auto& rows : batch_indices(part, batch_size, seed, epoch, shuffle))
    out.push_back(make_batch(part, rows, num_classes));
  return out;
}

}  // namespace dafa
