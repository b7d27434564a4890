#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "sonar/train/train.hpp"

namespace sonar::train {

namespace fs = std::filesystem;

namespace {

using Json = nlohmann::ordered_json;

Json encode_double(double v) {
  if (std::isnan(v)) return Json("nan");
  if (std::isinf(v)) return Json(v > 0 ? "inf" : "-inf");
  return Json(v);
}

double decode_double(const Json& j, const char* field) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string& s = j.get_ref<const std::string&>();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw ConfigError(std::string("summary json: bad value for ") + field);
}

}  // namespace

MetricStat aggregate(const std::vector<double>& values) {
  MetricStat s;
  s.values = values;
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= double(values.size());
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.sigma = std::sqrt(var / double(values.size()));
  return s;
}

const MetricStat& ExperimentSummary::stat(const std::string& name) const {
  for (const auto& [key, value] : stats)
    if (key == name) return value;
  throw ConfigError("summary has no metric named '" + name + "'");
}

std::string ExperimentSummary::to_json() const {
  Json j;
  j["model"] = model;
  j["feature"] = feature;
  j["seeds"] = seeds;
  j["aborted_seeds"] = aborted_seeds;
  j["abort_reasons"] = abort_reasons;
  j["best_epochs"] = best_epochs;
  Json m = Json::object();
  for (const auto& [name, stat] : stats) {
    Json entry;
    entry["mean"] = encode_double(stat.mean);
    entry["sigma"] = encode_double(stat.sigma);
    Json vals = Json::array();
    for (double v : stat.values) vals.push_back(encode_double(v));
    entry["values"] = vals;
    m[name] = entry;
  }
  j["metrics"] = m;
  return j.dump(2) + "\n";
}

ExperimentSummary ExperimentSummary::from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("summary json: parse error: ") + e.what());
  }
  ExperimentSummary s;
  s.model = j.at("model").get<std::string>();
  s.feature = j.at("feature").get<std::string>();
  s.seeds = j.at("seeds").get<std::vector<uint32_t>>();
  s.aborted_seeds = j.at("aborted_seeds").get<std::vector<uint32_t>>();
  s.abort_reasons = j.at("abort_reasons").get<std::vector<std::string>>();
  s.best_epochs = j.at("best_epochs").get<std::vector<int>>();
  for (const auto& [name, entry] : j.at("metrics").items()) {
    MetricStat stat;
    stat.mean = decode_double(entry.at("mean"), "mean");
    stat.sigma = decode_double(entry.at("sigma"), "sigma");
    for (const auto& v : entry.at("values"))
      stat.values.push_back(decode_double(v, "values"));
    s.stats.emplace_back(name, std::move(stat));
  }
  return s;
}

void ExperimentSummary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out << to_json();
  if (!out) throw ConfigError("write failed: " + path);
}

ExperimentSummary ExperimentSummary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

ExperimentSummary run_experiment(nn::ModelKind model_kind,
                                 features::FeatureKind feature_kind,
                                 const HyperParams& hp,
                                 const std::string& cache_dir,
                                 const std::string& out_dir) {
  hp.validate();
  DataBundle data = load_cached(cache_dir, feature_kind);

  ExperimentSummary summary;
  summary.model = nn::model_name(model_kind);
  summary.feature = features::kind_name(feature_kind);

  std::vector<RunResult> completed;
  for (uint32_t seed : hp.seeds) {
    fs::path run_dir = fs::path(out_dir) / ("run_" + std::to_string(seed));
    try {
      completed.push_back(
          train_run(model_kind, data, hp, seed, run_dir.string()));
      summary.seeds.push_back(seed);
      summary.best_epochs.push_back(completed.back().best_epoch);
    } catch (const std::exception& e) {
      summary.aborted_seeds.push_back(seed);
      summary.abort_reasons.push_back(e.what());
    }
  }

  auto collect = [&](const char* name, auto getter) {
    std::vector<double> values;
    for (const auto& r : completed) values.push_back(getter(r));
    summary.stats.emplace_back(name, aggregate(values));
  };
  collect("accuracy", [](const RunResult& r) { return r.test_metrics.cls.accuracy; });
  collect("precision", [](const RunResult& r) { return r.test_metrics.cls.precision; });
  collect("recall", [](const RunResult& r) { return r.test_metrics.cls.recall; });
  collect("f1", [](const RunResult& r) { return r.test_metrics.cls.f1; });
  collect("mcc", [](const RunResult& r) { return r.test_metrics.mcc; });
  collect("overall_fdr",
          [](const RunResult& r) { return r.test_metrics.fdr.overall_log; });

  fs::create_directories(out_dir);
  summary.save((fs::path(out_dir) / "summary.json").string());
  return summary;
}

}  // namespace sonar::train
