#include "dafa/report.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "dafa/ops.hpp"
#include "dafa/util.hpp"

namespace dafa {

namespace {

constexpr double kProbFloor = 1e-15;

DeviceMetrics combine(const std::vector<std::pair<std::string, DeviceMetrics>>&
                          cells,
                      const std::vector<bool>& mask) {
  DeviceMetrics agg;
  double acc_weighted = 0.0, ll_weighted = 0.0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!mask[i]) continue;
    const auto& m = cells[i].second;
    agg.count += m.count;
    acc_weighted += m.accuracy * m.count;
    ll_weighted += m.log_loss * m.count;
  }
  if (agg.count > 0) {
    agg.accuracy = acc_weighted / agg.count;
    agg.log_loss = ll_weighted / agg.count;
  }
  return agg;
}

}  // namespace

EvalReport evaluate(const ModelBundle& bundle, const DatasetSplit& data,
                    bool use_device_labels, const std::string& model_id,
                    const std::string& stage) {
  data.check();
  if (data.validation.size() == 0)
    throw ValidationError("evaluate: validation part is empty");

  EvalReport report;
  report.model_id = model_id;
  report.stage = stage;
  report.dataset_hash = data.hash();

  std::vector<bool> is_real, is_seen, is_unseen, all;
  for (std::size_t d = 0; d < data.devices.size(); ++d) {
    const DeviceInfo& info = data.devices[d];
    const auto rows = data.validation.indices_of_device(static_cast<int>(d));
    if (rows.empty()) {
      report.warnings.push_back("device " + info.id +
                                " has no validation samples; omitted");
      continue;
    }
    LabeledBatch batch = make_batch(data.validation, rows, data.num_classes);
    const std::optional<std::string> routing =
        use_device_labels ? std::optional<std::string>(info.id) : std::nullopt;
    Tensor probs = predict(bundle, batch.features, routing);

    DeviceMetrics m;
    m.count = batch.size();
    m.accuracy = accuracy_percent(probs, batch.scene_targets);
    double ll = 0.0;
    const auto p = probs.data();
    const auto y = batch.scene_targets.data();
    const int c = probs.cols();
    for (int i = 0; i < batch.size(); ++i) {
      int truth = 0;
      for (int j = 1; j < c; ++j)
        if (y[static_cast<std::size_t>(i) * c + j] >
            y[static_cast<std::size_t>(i) * c + truth])
          truth = j;
      ll -= std::log(
          std::max(p[static_cast<std::size_t>(i) * c + truth], kProbFloor));
    }
    m.log_loss = ll / m.count;

    report.per_device.emplace_back(info.id, m);
    is_real.push_back(info.real);
    is_seen.push_back(info.seen);
    is_unseen.push_back(!info.seen);
    all.push_back(true);
  }

  report.overall = combine(report.per_device, all);
  report.real = combine(report.per_device, is_real);
  report.seen = combine(report.per_device, is_seen);
  report.unseen = combine(report.per_device, is_unseen);
  return report;
}

DeltaReport delta(const EvalReport& before, const EvalReport& after) {
  if (before.dataset_hash != after.dataset_hash)
    throw ValidationError(
        "delta: reports were produced on different validation data");
  DeltaReport d;
  d.before_stage = before.stage;
  d.after_stage = after.stage;
  d.dataset_hash = before.dataset_hash;
  for (const auto& [dev, bm] : before.per_device) {
    for (const auto& [dev2, am] : after.per_device) {
      if (dev2 != dev) continue;
      DeltaReport::Row row;
      row.device_id = dev;
      row.before = bm.accuracy;
      row.after = am.accuracy;
      row.delta = am.accuracy - bm.accuracy;
      d.rows.push_back(row);
      break;
    }
  }
  d.overall = {"Overall", before.overall.accuracy, after.overall.accuracy,
               after.overall.accuracy - before.overall.accuracy};
  return d;
}

// ---------------------------------------------------------------------------
// rendering
// ---------------------------------------------------------------------------

namespace {

std::string fmt(double v, int prec = 2) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << v;
  return os.str();
}

void pad(std::ostringstream& os, const std::string& s, int width) {
  os << std::setw(width) << s;
}

}  // namespace

std::string render_text(const EvalReport& report) {
  std::ostringstream os;
  os << "model=" << report.model_id << " stage=" << report.stage
     << " dataset=" << hash_hex(report.dataset_hash) << "\n";
  std::ostringstream header, acc, ll;
  pad(header, "Metric", 10);
  pad(acc, "Acc(%)", 10);
  pad(ll, "LogLoss", 10);
  for (const auto& [dev, m] : report.per_device) {
    pad(header, dev, 9);
    pad(acc, fmt(m.accuracy), 9);
    pad(ll, fmt(m.log_loss, 4), 9);
  }
  pad(header, "Overall", 9);
  pad(acc, fmt(report.overall.accuracy), 9);
  pad(ll, fmt(report.overall.log_loss, 4), 9);
  os << header.str() << "\n" << acc.str() << "\n" << ll.str() << "\n";
  os << "aggregates: overall acc=" << fmt(report.overall.accuracy)
     << " ll=" << fmt(report.overall.log_loss, 4)
     << " | real acc=" << fmt(report.real.accuracy)
     << " ll=" << fmt(report.real.log_loss, 4)
     << " | seen acc=" << fmt(report.seen.accuracy)
     << " ll=" << fmt(report.seen.log_loss, 4)
     << " | unseen acc=" << fmt(report.unseen.accuracy)
     << " ll=" << fmt(report.unseen.log_loss, 4) << "\n";
  for (const auto& w : report.warnings) os << "warning: " << w << "\n";
  return os.str();
}

std::string render_text(const DeltaReport& report) {
  std::ostringstream os;
  std::ostringstream header, before, after, deltarow;
  pad(header, "Stage", 22);
  pad(before, report.before_stage, 22);
  pad(after, report.after_stage, 22);
  pad(deltarow, "Improvement (delta)", 22);
  for (const auto& row : report.rows) {
    pad(header, row.device_id, 9);
    pad(before, fmt(row.before), 9);
    pad(after, fmt(row.after), 9);
    pad(deltarow,
        row.delta == 0.0 ? std::string("-")
                         : (row.delta > 0 ? "+" + fmt(row.delta)
                                          : fmt(row.delta)),
        9);
  }
  pad(header, "Overall", 9);
  pad(before, fmt(report.overall.before), 9);
  pad(after, fmt(report.overall.after), 9);
  pad(deltarow,
      report.overall.delta == 0.0
          ? std::string("-")
          : (report.overall.delta > 0 ? "+" + fmt(report.overall.delta)
                                      : fmt(report.overall.delta)),
      9);
  os << header.str() << "\n"
     << before.str() << "\n"
     << after.str() << "\n"
     << deltarow.str() << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// structured form
// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

json metrics_to_json(const DeviceMetrics& m) {
  return json{{"accuracy", m.accuracy},
              {"log_loss", m.log_loss},
              {"count", m.count}};
}

DeviceMetrics metrics_from_json(const json& j) {
  DeviceMetrics m;
  m.accuracy = j.at("accuracy").get<double>();
  m.log_loss = j.at("log_loss").get<double>();
  m.count = j.at("count").get<int>();
  return m;
}

}  // namespace

std::string render_structured(const EvalReport& report) {
  json per_device = json::array();
  for (const auto& [dev, m] : report.per_device) {
    json cell = metrics_to_json(m);
    cell["device"] = dev;
    per_device.push_back(cell);
  }
  json j{{"model_id", report.model_id},
         {"stage", report.stage},
         {"dataset_hash", hash_hex(report.dataset_hash)},
         {"per_device", per_device},
         {"overall", metrics_to_json(report.overall)},
         {"real", metrics_to_json(report.real)},
         {"seen", metrics_to_json(report.seen)},
         {"unseen", metrics_to_json(report.unseen)},
         {"warnings", report.warnings}};
  return j.dump(2) + "\n";
}

std::string render_structured(const DeltaReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows)
    rows.push_back(json{{"device", r.device_id},
                        {"before", r.before},
                        {"after", r.after},
                        {"delta", r.delta}});
  json j{{"before_stage", report.before_stage},
         {"after_stage", report.after_stage},
         {"dataset_hash", hash_hex(report.dataset_hash)},
         {"rows", rows},
         {"overall", json{{"device", report.overall.device_id},
                          {"before", report.overall.before},
                          {"after", report.overall.after},
                          {"delta", report.overall.delta}}}};
  return j.dump(2) + "\n";
}

namespace {

std::uint64_t hash_from_hex(const std::string& hex) {
  return std::stoull(hex, nullptr, 16);
}

json parse_json(const std::string& text, const char* what) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded())
    throw ValidationError(std::string(what) + ": malformed JSON");
  return j;
}

}  // namespace

EvalReport parse_report(const std::string& json_text) {
  const json j = parse_json(json_text, "eval report");
  EvalReport r;
  r.model_id = j.at("model_id").get<std::string>();
  r.stage = j.at("stage").get<std::string>();
  r.dataset_hash = hash_from_hex(j.at("dataset_hash").get<std::string>());
  for (const auto& cell : j.at("per_device"))
    r.per_device.emplace_back(cell.at("device").get<std::string>(),
                              metrics_from_json(cell));
  r.overall = metrics_from_json(j.at("overall"));
  r.real = metrics_from_json(j.at("real"));
  r.seen = metrics_from_json(j.at("seen"));
  r.unseen = metrics_from_json(j.at("unseen"));
  r.warnings = j.at("warnings").get<std::vector<std::string>>();
  return r;
}

DeltaReport parse_delta(const std::string& json_text) {
  const json j = parse_json(json_text, "delta report");
  DeltaReport d;
  d.before_stage = j.at("before_stage").get<std::string>();
  d.after_stage = j.at("after_stage").get<std::string>();
  d.dataset_hash = hash_from_hex(j.at("dataset_hash").get<std::string>());
  for (const auto& row : j.at("rows"))
    d.rows.push_back({row.at("device").get<std::string>(),
                      row.at("before").get<double>(),
                      row.at("after").get<double>(),
                      row.at("delta").get<double>()});
  const auto& o = j.at("overall");
  d.overall = {o.at("device").get<std::string>(),
               o.at("before").get<double>(), o.at("after").get<double>(),
               o.at("delta").get<double>()};
  return d;
}

}  // namespace dafa
