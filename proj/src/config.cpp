#include "dafa/config.hpp"

#include <random>
#include <set>

#include <json.hpp>

#include "dafa/util.hpp"

namespace dafa {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& allowed,
                const std::string& section) {
  if (!j.is_object())
    throw ConfigError("config section '" + section + "' must be an object");
  for (const auto& [key, value] : j.items())
    if (!allowed.contains(key))
      throw ConfigError("unknown key '" + key + "' in config section '" +
                        section + "'");
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("config key '" + std::string(key) +
                      "' has the wrong type: " + e.what());
  }
}

TrainConfig parse_train(const json& j, const std::string& section,
                        const TrainConfig& defaults) {
  check_keys(j,
             {"epochs", "batch_size", "peak_lr", "warmup_fraction", "beta1",
              "beta2", "adam_eps"},
             section);
  TrainConfig cfg = defaults;
  cfg.epochs = get_or(j, "epochs", cfg.epochs);
  cfg.batch_size = get_or(j, "batch_size", cfg.batch_size);
  cfg.peak_lr = get_or(j, "peak_lr", cfg.peak_lr);
  cfg.warmup_fraction = get_or(j, "warmup_fraction", cfg.warmup_fraction);
  cfg.adam.beta1 = get_or(j, "beta1", cfg.adam.beta1);
  cfg.adam.beta2 = get_or(j, "beta2", cfg.adam.beta2);
  cfg.adam.eps = get_or(j, "adam_eps", cfg.adam.eps);
  return cfg;
}

NetworkSpec parse_network(const json& j, const std::string& section,
                          const NetworkSpec& defaults) {
  check_keys(j, {"hidden_dims", "embedding_dim"}, section);
  NetworkSpec spec = defaults;
  spec.hidden_dims = get_or(j, "hidden_dims", spec.hidden_dims);
  spec.embedding_dim = get_or(j, "embedding_dim", spec.embedding_dim);
  return spec;
}

std::vector<double> synth_gains(std::mt19937_64& rng, int n, double spread) {
  std::vector<double> out(static_cast<std::size_t>(n), 1.0);
  if (spread > 0.0) {
    std::normal_distribution<double> dist(0.0, spread);
    for (double& g : out) g = std::exp(dist(rng));
  }
  return out;
}

std::vector<double> synth_offsets(std::mt19937_64& rng, int n, double spread) {
  std::vector<double> out(static_cast<std::size_t>(n), 0.0);
  if (spread > 0.0) {
    std::normal_distribution<double> dist(0.0, spread);
    for (double& o : out) o = dist(rng);
  }
  return out;
}

DeviceSpec parse_device(const json& j, int freq_bins, std::uint64_t seed) {
  check_keys(j,
             {"id", "seen", "real", "noise_std", "gain", "offset",
              "gain_spread", "offset_spread"},
             "dataset.devices[]");
  DeviceSpec dev;
  dev.id = get_or<std::string>(j, "id", "");
  if (dev.id.empty()) throw ConfigError("device entry is missing 'id'");
  dev.seen = get_or(j, "seen", true);
  dev.real = get_or(j, "real", false);
  dev.noise_std = get_or(j, "noise_std", 0.05);

  // explicit channel vectors win; otherwise they are synthesized
  // deterministically from the seed and the device id
  std::mt19937_64 rng(derive_seed(seed, "channel/" + dev.id));
  if (j.contains("gain")) {
    dev.gain = j.at("gain").get<std::vector<double>>();
  } else {
    dev.gain = synth_gains(rng, freq_bins, get_or(j, "gain_spread", 0.15));
  }
  if (j.contains("offset")) {
    dev.offset = j.at("offset").get<std::vector<double>>();
  } else {
    dev.offset =
        synth_offsets(rng, freq_bins, get_or(j, "offset_spread", 0.15));
  }
  dev.validate(freq_bins);
  return dev;
}

TeacherMode parse_mode(const std::string& text) {
  if (text == "ce_only") return TeacherMode::ce_only;
  if (text == "dafa") return TeacherMode::dafa;
  throw ConfigError("teacher mode must be 'ce_only' or 'dafa', got '" + text +
                    "'");
}

}  // namespace

std::uint64_t ExperimentConfig::config_hash() const {
  return hash_bytes(canonical_json);
}

void ExperimentConfig::validate() const {
  scene.validate();
  for (const auto& d : devices) d.validate(scene.freq_bins);
  std::set<std::string> ids;
  for (const auto& d : devices)
    if (!ids.insert(d.id).second)
      throw ConfigError("duplicate device id '" + d.id + "'");
  if (train_per_cell < 1 || val_per_cell < 1)
    throw ConfigError("per-cell sample counts must be >= 1");

  if (teachers.empty()) throw ConfigError("at least one teacher is required");
  std::set<std::string> names;
  for (const auto& t : teachers) {
    if (t.name.empty()) throw ConfigError("teacher name must be nonempty");
    if (!names.insert(t.name).second)
      throw ConfigError("duplicate teacher name '" + t.name + "'");
  }
  if (ensemble.empty())
    throw ConfigError("ensemble must reference at least one teacher");
  for (const auto& name : ensemble)
    if (!names.contains(name))
      throw ConfigError("ensemble references unknown teacher '" + name + "'");

  student_spec.validate();
  teacher_spec.validate();
  kd.validate();
  dafa.validate();
  augment.mixup.validate();
  augment.freq_mixstyle.validate();
  train_teacher_cfg.validate();
  train_distill_cfg.validate();
  train_dsft_cfg.validate();
  budget.validate();

  const BudgetReport gate = enforce_budget(student_spec, budget);
  if (!gate.pass)
    throw BudgetError("student spec fails the complexity budget:\n" +
                      gate.text());
}

ExperimentConfig ExperimentConfig::from_json_text(
    const std::string& text, std::optional<std::uint64_t> seed_override) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config file is not valid JSON");
  check_keys(j,
             {"seed", "out_dir", "dataset", "student", "teacher", "teachers",
              "ensemble", "kd", "dafa", "augment", "train_teacher",
              "train_distill", "train_dsft", "budget"},
             "(top level)");

  ExperimentConfig cfg;
  cfg.seed = get_or<std::uint64_t>(j, "seed", 1);
  if (seed_override) {
    cfg.seed = *seed_override;
    j["seed"] = *seed_override;  // the canonical form reflects the override
  }
  cfg.out_dir = get_or<std::string>(j, "out_dir", "runs/default");

  const json dataset = j.value("dataset", json::object());
  check_keys(dataset,
             {"path", "num_classes", "freq_bins", "time_steps",
              "prototype_scale", "within_class_noise", "train_per_cell",
              "val_per_cell", "devices"},
             "dataset");
  cfg.dataset_path = get_or<std::string>(dataset, "path", "");
  cfg.scene.num_classes = get_or(dataset, "num_classes", 10);
  cfg.scene.freq_bins = get_or(dataset, "freq_bins", 8);
  cfg.scene.time_steps = get_or(dataset, "time_steps", 8);
  cfg.scene.prototype_scale = get_or(dataset, "prototype_scale", 0.3);
  cfg.scene.within_class_noise = get_or(dataset, "within_class_noise", 0.12);
  cfg.train_per_cell = get_or(dataset, "train_per_cell", 40);
  cfg.val_per_cell = get_or(dataset, "val_per_cell", 20);

  if (dataset.contains("devices")) {
    for (const auto& entry : dataset.at("devices"))
      cfg.devices.push_back(
          parse_device(entry, cfg.scene.freq_bins, cfg.seed));
  } else {
    // default roster: A/B/C seen real devices, S1-S3 seen simulated,
    // S4-S6 held out
    auto dev = [&](const std::string& id, bool seen, bool real,
                   double noise, double gain_spread, double offset_spread) {
      json entry{{"id", id},          {"seen", seen},
                 {"real", real},      {"noise_std", noise},
                 {"gain_spread", gain_spread}, {"offset_spread", offset_spread}};
      cfg.devices.push_back(parse_device(entry, cfg.scene.freq_bins, cfg.seed));
    };
    dev("A", true, true, 0.04, 0.08, 0.08);
    dev("B", true, true, 0.06, 0.12, 0.12);
    dev("C", true, true, 0.06, 0.12, 0.12);
    dev("S1", true, false, 0.08, 0.16, 0.16);
    dev("S2", true, false, 0.08, 0.16, 0.16);
    dev("S3", true, false, 0.08, 0.16, 0.16);
    dev("S4", false, false, 0.10, 0.24, 0.24);
    dev("S5", false, false, 0.10, 0.24, 0.24);
    dev("S6", false, false, 0.10, 0.24, 0.24);
  }

  NetworkSpec student_defaults;
  student_defaults.input_dim = cfg.scene.feature_dim();
  student_defaults.num_classes = cfg.scene.num_classes;
  student_defaults.hidden_dims = {48};
  student_defaults.embedding_dim = 32;
  cfg.student_spec = parse_network(j.value("student", json::object()),
                                   "student", student_defaults);
  cfg.student_spec.input_dim = cfg.scene.feature_dim();
  cfg.student_spec.num_classes = cfg.scene.num_classes;

  NetworkSpec teacher_defaults = student_defaults;
  teacher_defaults.hidden_dims = {96};
  teacher_defaults.embedding_dim = 48;
  cfg.teacher_spec = parse_network(j.value("teacher", json::object()),
                                   "teacher", teacher_defaults);
  cfg.teacher_spec.input_dim = cfg.scene.feature_dim();
  cfg.teacher_spec.num_classes = cfg.scene.num_classes;

  if (j.contains("teachers")) {
    for (const auto& entry : j.at("teachers")) {
      check_keys(entry, {"name", "mode"}, "teachers[]");
      cfg.teachers.push_back({get_or<std::string>(entry, "name", ""),
                              parse_mode(get_or<std::string>(entry, "mode",
                                                             "ce_only"))});
    }
  } else {
    cfg.teachers = {{"ce", TeacherMode::ce_only}, {"dafa", TeacherMode::dafa}};
  }
  cfg.ensemble = get_or<std::vector<std::string>>(j, "ensemble", {});
  if (cfg.ensemble.empty())
    for (const auto& t : cfg.teachers) cfg.ensemble.push_back(t.name);

  const json kd = j.value("kd", json::object());
  check_keys(kd, {"lambda", "tau"}, "kd");
  cfg.kd.lambda = get_or(kd, "lambda", 0.98);
  cfg.kd.tau = get_or(kd, "tau", 2.0);

  const json dafa_j = j.value("dafa", json::object());
  check_keys(dafa_j, {"lambda_dcsl", "lambda_gdal", "epsilon"}, "dafa");
  cfg.dafa.lambda_dcsl = get_or(dafa_j, "lambda_dcsl", 0.01);
  cfg.dafa.lambda_gdal = get_or(dafa_j, "lambda_gdal", 0.01);
  cfg.dafa.epsilon = get_or(dafa_j, "epsilon", 1e-8);

  const json aug = j.value("augment", json::object());
  check_keys(aug,
             {"use_mixup", "mixup_alpha", "mixup_probability",
              "use_freq_mixstyle", "freq_mixstyle_alpha",
              "freq_mixstyle_probability", "dsft"},
             "augment");
  cfg.augment.use_mixup = get_or(aug, "use_mixup", true);
  cfg.augment.mixup.alpha = get_or(aug, "mixup_alpha", 0.3);
  cfg.augment.mixup.apply_probability = get_or(aug, "mixup_probability", 1.0);
  cfg.augment.use_freq_mixstyle = get_or(aug, "use_freq_mixstyle", true);
  cfg.augment.freq_mixstyle.alpha = get_or(aug, "freq_mixstyle_alpha", 0.3);
  cfg.augment.freq_mixstyle.apply_probability =
      get_or(aug, "freq_mixstyle_probability", 0.4);
  cfg.augment_dsft = get_or(aug, "dsft", false);

  TrainConfig teacher_train;
  teacher_train.epochs = 150;
  teacher_train.batch_size = 128;
  teacher_train.peak_lr = 5e-4;
  cfg.train_teacher_cfg = parse_train(j.value("train_teacher", json::object()),
                                      "train_teacher", teacher_train);

  TrainConfig distill_train;
  distill_train.epochs = 500;
  distill_train.batch_size = 128;
  distill_train.peak_lr = 5e-4;
  cfg.train_distill_cfg = parse_train(
      j.value("train_distill", json::object()), "train_distill", distill_train);

  TrainConfig dsft_train;
  dsft_train.epochs = 100;
  dsft_train.batch_size = 128;
  dsft_train.peak_lr = 1e-5;
  cfg.train_dsft_cfg =
      parse_train(j.value("train_dsft", json::object()), "train_dsft",
                  dsft_train);

  const json budget = j.value("budget", json::object());
  check_keys(budget, {"max_param_bytes", "bytes_per_param", "max_macs"},
             "budget");
  cfg.budget.max_param_bytes =
      get_or<std::int64_t>(budget, "max_param_bytes", 128 * 1024);
  cfg.budget.bytes_per_param =
      get_or<std::int64_t>(budget, "bytes_per_param", 4);
  cfg.budget.max_macs = get_or<std::int64_t>(budget, "max_macs", 30'000'000);

  cfg.canonical_json = j.dump(2) + "\n";
  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::load(
    const std::filesystem::path& path,
    std::optional<std::uint64_t> seed_override) {
  return from_json_text(read_file_bytes(path), seed_override);
}

std::string ExperimentConfig::default_json_text() {
  json j{
      {"seed", 1},
      {"out_dir", "runs/default"},
      {"dataset",
       {{"num_classes", 10},
        {"freq_bins", 8},
        {"time_steps", 8},
        {"prototype_scale", 0.3},
        {"within_class_noise", 0.12},
        {"train_per_cell", 40},
        {"val_per_cell", 20}}},
      {"student", {{"hidden_dims", {48}}, {"embedding_dim", 32}}},
      {"teacher", {{"hidden_dims", {96}}, {"embedding_dim", 48}}},
      {"teachers",
       {{{"name", "ce"}, {"mode", "ce_only"}},
        {{"name", "dafa"}, {"mode", "dafa"}}}},
      {"ensemble", {"ce", "dafa"}},
      {"kd", {{"lambda", 0.98}, {"tau", 2.0}}},
      {"dafa",
       {{"lambda_dcsl", 0.01}, {"lambda_gdal", 0.01}, {"epsilon", 1e-8}}},
      {"augment",
       {{"use_mixup", true},
        {"mixup_alpha", 0.3},
        {"mixup_probability", 1.0},
        {"use_freq_mixstyle", true},
        {"freq_mixstyle_alpha", 0.3},
        {"freq_mixstyle_probability", 0.4},
        {"dsft", false}}},
      {"train_teacher",
       {{"epochs", 150}, {"batch_size", 128}, {"peak_lr", 5e-4}}},
      {"train_distill",
       {{"epochs", 500}, {"batch_size", 128}, {"peak_lr", 5e-4}}},
      {"train_dsft",
       {{"epochs", 100}, {"batch_size", 128}, {"peak_lr", 1e-5}}},
      {"budget",
       {{"max_param_bytes", 128 * 1024},
        {"bytes_per_param", 4},
        {"max_macs", 30'000'000}}},
  };
  return j.dump(2) + "\n";
}

}  // namespace dafa
