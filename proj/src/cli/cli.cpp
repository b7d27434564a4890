#include "sonar/cli/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sonar/audio/audio.hpp"
#include "sonar/features/features.hpp"
#include "sonar/metrics/metrics.hpp"
#include "sonar/nn/checkpoint.hpp"
#include "sonar/synth/synth.hpp"
#include "sonar/train/train.hpp"

namespace sonar::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw ConfigError("config key '" + key + "': bad value '" + value + "'");
}

double to_double(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    double v = std::stod(value, &used);
    if (used != value.size()) bad_value(key, value);
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    bad_value(key, value);
  }
}

int64_t to_int(const std::string& key, const std::string& value) {
  int64_t v = 0;
  auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || p != value.data() + value.size())
    bad_value(key, value);
  return v;
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  bad_value(key, value);
}

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<uint32_t> parse_seeds(const std::string& s) {
  std::vector<uint32_t> out;
  for (const auto& tok : split_csv(s)) {
    int64_t v = to_int("seeds", tok.empty() ? s : tok);
    if (v < 0 || v > UINT32_MAX) bad_value("seeds", s);
    out.push_back(uint32_t(v));
  }
  return out;
}

std::array<double, 3> parse_ratios(const std::string& s) {
  auto toks = split_csv(s);
  if (toks.size() != 3)
    throw ConfigError("config key 'ratios': expected three comma-separated "
                      "values, got '" + s + "'");
  return {to_double("ratios", toks[0]), to_double("ratios", toks[1]),
          to_double("ratios", toks[2])};
}

void require(const std::string& value, const char* cmd, const char* key) {
  if (value.empty())
    throw ConfigError(std::string(cmd) + " requires --" + key);
}

void require_file(const std::string& path, const std::string& hint) {
  if (!fs::exists(path)) throw ConfigError(path + " not found; " + hint);
}

}  // namespace

void RunConfig::apply(const std::string& key, const std::string& value) {
  if (key == "data_dir") data_dir = value;
  else if (key == "cache_dir") cache_dir = value;
  else if (key == "out_dir") out_dir = value;
  else if (key == "runs_dir") runs_dir = value;
  else if (key == "checkpoint") checkpoint = value;
  else if (key == "partition") partition = value;
  else if (key == "embeddings") embeddings = value;
  else if (key == "model") model = value;
  else if (key == "feature") feature = value;
  else if (key == "features") features = value;
  else if (key == "split") split = value;
  else if (key == "lr") lr = to_double(key, value);
  else if (key == "batch") batch = int(to_int(key, value));
  else if (key == "epochs") epochs = int(to_int(key, value));
  else if (key == "patience") patience = int(to_int(key, value));
  else if (key == "dropout") dropout = to_double(key, value);
  else if (key == "bins") bins = int(to_int(key, value));
  else if (key == "seeds") seeds = value;
  else if (key == "n_signals_per_class") n_signals_per_class = int(to_int(key, value));
  else if (key == "signal_duration_s") signal_duration_s = to_double(key, value);
  else if (key == "seed") {
    int64_t v = to_int(key, value);
    if (v < 0 || v > UINT32_MAX) bad_value(key, value);
    seed = uint32_t(v);
  }
  else if (key == "ratios") ratios = value;
  else if (key == "probe") probe = to_bool(key, value);
  else throw ConfigError("unknown config key: '" + key + "'");
}

void RunConfig::merge_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const std::exception& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
  if (!j.is_object())
    throw ConfigError("config file " + path + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    std::string text;
    if (value.is_string()) text = value.get<std::string>();
    else if (value.is_boolean()) text = value.get<bool>() ? "true" : "false";
    else if (value.is_number()) text = value.dump();
    else
      throw ConfigError("config key '" + key +
                        "': expected a scalar value in " + path);
    apply(key, text);
  }
}

std::string RunConfig::to_json() const {
  Json j;
  j["data_dir"] = data_dir;
  j["cache_dir"] = cache_dir;
  j["out_dir"] = out_dir;
  j["runs_dir"] = runs_dir;
  j["checkpoint"] = checkpoint;
  j["partition"] = partition;
  j["embeddings"] = embeddings;
  j["model"] = model;
  j["feature"] = feature;
  j["features"] = features;
  j["split"] = split;
  j["lr"] = lr;
  j["batch"] = batch;
  j["epochs"] = epochs;
  j["patience"] = patience;
  j["dropout"] = dropout;
  j["bins"] = bins;
  j["seeds"] = seeds;
  j["n_signals_per_class"] = n_signals_per_class;
  j["signal_duration_s"] = signal_duration_s;
  j["seed"] = seed;
  j["ratios"] = ratios;
  j["probe"] = probe;
  return j.dump(2) + "\n";
}

namespace {

train::HyperParams hyperparams_of(const RunConfig& cfg) {
  train::HyperParams hp;
  hp.lr = cfg.lr;
  hp.batch = cfg.batch;
  hp.epochs = cfg.epochs;
  hp.patience = cfg.patience;
  hp.dropout = cfg.dropout;
  hp.bins = cfg.bins;
  hp.seeds = parse_seeds(cfg.seeds);
  hp.validate();
  return hp;
}

int cmd_synth(const RunConfig& cfg) {
  require(cfg.out_dir, "synth", "out_dir");
  synth::SynthSpec spec;
  spec.n_signals_per_class = cfg.n_signals_per_class;
  spec.signal_duration_s = cfg.signal_duration_s;
  spec.seed = cfg.seed;
  auto manifest = synth::generate(spec, cfg.out_dir);
  std::cout << "wrote " << manifest.entries.size() << " signals and "
            << (fs::path(cfg.out_dir) / "manifest.csv").string() << "\n";
  if (cfg.probe) {
    auto rep = synth::sanity_probe(manifest);
    std::ofstream out(fs::path(cfg.out_dir) / "probe.json");
    out << rep.to_json();
    std::cout << rep.to_json();
    if (!rep.pass())
      throw std::runtime_error("synthetic corpus failed its sanity probe");
  }
  return 0;
}

int cmd_ingest(const RunConfig& cfg) {
  require(cfg.data_dir, "ingest", "data_dir");
  require(cfg.out_dir, "ingest", "out_dir");
  std::string manifest_path = (fs::path(cfg.data_dir) / "manifest.csv").string();
  require_file(manifest_path,
               "generate a corpus with the synth command or point --data_dir "
               "at one");
  auto manifest = audio::read_manifest(manifest_path);
  audio::resolve_paths(manifest, cfg.data_dir);
  for (const auto& e : manifest.entries)
    if (!fs::exists(e.path))
      throw ConfigError("manifest references a missing file: " + e.path);
  auto part = audio::partition(manifest, parse_ratios(cfg.ratios), cfg.seed);
  fs::create_directories(cfg.out_dir);
  std::string part_path = (fs::path(cfg.out_dir) / "partition.json").string();
  audio::write_partition(part_path, part);
  std::cout << "partitioned " << manifest.entries.size() << " signals into "
            << part.train.size() << "/" << part.val.size() << "/"
            << part.test.size() << " (train/val/test); wrote " << part_path
            << "\n";
  return 0;
}

int cmd_extract(const RunConfig& cfg) {
  require(cfg.data_dir, "extract", "data_dir");
  require(cfg.partition, "extract", "partition");
  require(cfg.cache_dir, "extract", "cache_dir");
  std::string manifest_path = (fs::path(cfg.data_dir) / "manifest.csv").string();
  require_file(manifest_path,
               "generate a corpus with the synth command or point --data_dir "
               "at one");
  require_file(cfg.partition, "run the ingest command first");
  auto manifest = audio::read_manifest(manifest_path);
  audio::resolve_paths(manifest, cfg.data_dir);
  auto part = audio::read_partition(cfg.partition);
  std::vector<features::FeatureKind> kinds;
  for (const auto& name : split_csv(cfg.features))
    kinds.push_back(features::kind_from_name(name));
  if (kinds.empty()) throw ConfigError("extract: empty feature list");
  fs::create_directories(cfg.cache_dir);
  features::FeatureConfig fcfg;
  auto res = features::extract_dataset(manifest, part, kinds, fcfg,
                                       cfg.cache_dir);
  std::cout << "extracted " << res.n_segments << " segments into "
            << res.n_files << " cache files under " << cfg.cache_dir << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  require(cfg.cache_dir, "train", "cache_dir");
  require(cfg.out_dir, "train", "out_dir");
  require_file((fs::path(cfg.cache_dir) / "index.csv").string(),
               "run the extract command first");
  auto model_kind = nn::model_from_name(cfg.model);
  auto feature_kind = features::kind_from_name(cfg.feature);
  auto hp = hyperparams_of(cfg);

  fs::create_directories(cfg.out_dir);
  {
    std::ofstream frozen(fs::path(cfg.out_dir) / "resolved_config.json");
    frozen << cfg.to_json();
    if (!frozen) throw std::runtime_error("cannot write resolved config");
  }
  auto summary = train::run_experiment(model_kind, feature_kind, hp,
                                       cfg.cache_dir, cfg.out_dir);
  for (const auto& [name, stat] : summary.stats) {
    char line[128];
    std::snprintf(line, sizeof line, "%-12s %.4f +/- %.4f\n", name.c_str(),
                  stat.mean, stat.sigma);
    std::cout << line;
  }
  if (!summary.aborted_seeds.empty()) {
    for (size_t i = 0; i < summary.aborted_seeds.size(); ++i)
      std::cerr << "seed " << summary.aborted_seeds[i]
                << " aborted: " << summary.abort_reasons[i] << "\n";
    if (summary.seeds.empty())
      throw std::runtime_error("all training runs aborted");
  }
  std::cout << "wrote " << (fs::path(cfg.out_dir) / "summary.json").string()
            << "\n";
  return 0;
}

int cmd_evaluate(const RunConfig& cfg) {
  require(cfg.checkpoint, "evaluate", "checkpoint");
  require(cfg.cache_dir, "evaluate", "cache_dir");
  require_file(cfg.checkpoint,
               "the train command writes run_<seed>/checkpoint.bin");
  require_file((fs::path(cfg.cache_dir) / "index.csv").string(),
               "run the extract command first");
  auto ckpt = nn::load_checkpoint(cfg.checkpoint);
  auto loaded = nn::checkpoint_to_model(ckpt);
  if (!loaded.has_stats)
    throw std::runtime_error(
        "checkpoint carries no normalization statistics; it was not written "
        "by the train command");
  auto split = train::load_split(cfg.cache_dir, loaded.feature_kind, cfg.split,
                                 loaded.stats);
  auto report = train::evaluate(loaded.model, split, cfg.batch);
  if (!cfg.embeddings.empty()) {
    auto emb = train::split_embeddings(loaded.model, split, cfg.batch);
    metrics::export_embeddings(emb, loaded.model.embed_width(), split.labels,
                               cfg.embeddings);
    std::cout << "wrote " << cfg.embeddings << "\n";
  }
  if (cfg.out_dir.empty()) {
    std::cout << report.to_json();
  } else {
    fs::create_directories(cfg.out_dir);
    std::string path = (fs::path(cfg.out_dir) / "metrics.json").string();
    report.save(path);
    std::cout << "wrote " << path << "\n";
  }
  return 0;
}

std::string stat_cell(const train::MetricStat& s, double scale, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f ± %.*f", digits, s.mean * scale, digits,
                s.sigma * scale);
  return buf;
}

int cmd_report(const RunConfig& cfg) {
  require(cfg.runs_dir, "report", "runs_dir");
  require(cfg.out_dir, "report", "out_dir");
  if (!fs::is_directory(cfg.runs_dir))
    throw ConfigError(cfg.runs_dir + " not found; run the train command first");

  std::vector<std::pair<std::string, train::ExperimentSummary>> experiments;
  std::vector<fs::path> subdirs;
  for (const auto& entry : fs::directory_iterator(cfg.runs_dir))
    if (entry.is_directory()) subdirs.push_back(entry.path());
  std::sort(subdirs.begin(), subdirs.end());
  for (const auto& dir : subdirs)
    if (fs::exists(dir / "summary.json"))
      experiments.emplace_back(dir.filename().string(),
                               train::ExperimentSummary::load(
                                   (dir / "summary.json").string()));
  if (experiments.empty())
    throw ConfigError("no summary.json found under " + cfg.runs_dir +
                      "; run the train command first");

  fs::create_directories(cfg.out_dir);
  std::string table_path = (fs::path(cfg.out_dir) / "table.csv").string();
  std::ofstream table(table_path);
  if (!table) throw std::runtime_error("cannot write " + table_path);
  table << "Model,Feature,Accuracy,Precision,Recall,F1,MCC,logFDR\n";
  for (const auto& [dir_name, s] : experiments) {
    table << s.model << ',' << s.feature << ',' << stat_cell(s.stat("accuracy"), 100, 2)
          << ',' << stat_cell(s.stat("precision"), 100, 2) << ','
          << stat_cell(s.stat("recall"), 100, 2) << ','
          << stat_cell(s.stat("f1"), 100, 2) << ','
          << stat_cell(s.stat("mcc"), 1, 4) << ','
          << stat_cell(s.stat("overall_fdr"), 1, 2) << "\n";
  }
  table.close();
  std::cout << "wrote " << table_path << "\n";

  // Seed-averaged confusion matrix per experiment.
  for (const auto& [dir_name, s] : experiments) {
    std::vector<fs::path> runs;
    for (const auto& entry :
         fs::directory_iterator(fs::path(cfg.runs_dir) / dir_name))
      if (entry.is_directory() && fs::exists(entry.path() / "metrics.json"))
        runs.push_back(entry.path() / "metrics.json");
    std::sort(runs.begin(), runs.end());
    if (runs.empty()) continue;
    std::vector<double> mean;
    size_t classes = 0;
    for (const auto& path : runs) {
      auto rep = metrics::MetricsReport::load(path.string());
      if (mean.empty()) {
        classes = rep.confusion.num_classes;
        mean.assign(classes * classes, 0.0);
      }
      if (rep.confusion.num_classes != classes)
        throw std::runtime_error("inconsistent confusion sizes under " +
                                 dir_name);
      for (size_t i = 0; i < mean.size(); ++i)
        mean[i] += double(rep.confusion.counts[i]);
    }
    for (double& v : mean) v /= double(runs.size());
    std::string conf_path =
        (fs::path(cfg.out_dir) / ("confusion_" + dir_name + ".csv")).string();
    std::ofstream conf(conf_path);
    if (!conf) throw std::runtime_error("cannot write " + conf_path);
    conf << "true\\pred";
    for (size_t c = 0; c < classes; ++c) conf << ',' << audio::kClassNames[c];
    conf << "\n";
    char buf[32];
    for (size_t t = 0; t < classes; ++t) {
      conf << audio::kClassNames[t];
      for (size_t p = 0; p < classes; ++p) {
        std::snprintf(buf, sizeof buf, "%.2f", mean[t * classes + p]);
        conf << ',' << buf;
      }
      conf << "\n";
    }
    std::cout << "wrote " << conf_path << "\n";
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"passive-sonar vessel classification pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::pair<std::string, std::string>> overrides;

  auto make_sub = [&](const char* name, const char* desc,
                      std::initializer_list<const char*> keys) {
    CLI::App* sub = app.add_subcommand(name, desc);
    sub->add_option("--config", config_path, "JSON config file");
    for (const char* key : keys) {
      sub->add_option_function<std::string>(
          "--" + std::string(key),
          [&overrides, key](const std::string& v) {
            overrides.emplace_back(key, v);
          });
    }
    return sub;
  };

  CLI::App* synth = make_sub(
      "synth", "generate the synthetic 4-class corpus",
      {"out_dir", "n_signals_per_class", "signal_duration_s", "seed", "probe"});
  CLI::App* ingest = make_sub("ingest",
                              "validate a corpus and write its partition",
                              {"data_dir", "out_dir", "ratios", "seed"});
  CLI::App* extract = make_sub("extract",
                               "fill the feature cache for a partitioned corpus",
                               {"data_dir", "partition", "cache_dir", "features"});
  CLI::App* train = make_sub(
      "train", "train one model on one feature across seeds",
      {"cache_dir", "out_dir", "model", "feature", "lr", "batch", "epochs",
       "patience", "dropout", "bins", "seeds"});
  CLI::App* evaluate = make_sub(
      "evaluate", "evaluate a checkpoint on a cached partition",
      {"checkpoint", "cache_dir", "split", "batch", "out_dir", "embeddings"});
  CLI::App* report = make_sub("report",
                              "aggregate experiment summaries into CSV tables",
                              {"runs_dir", "out_dir"});

  try {
    app.parse(argc, const_cast<char**>(argv));
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg.merge_file(config_path);
    for (const auto& [key, value] : overrides) cfg.apply(key, value);

    if (synth->parsed()) return cmd_synth(cfg);
    if (ingest->parsed()) return cmd_ingest(cfg);
    if (extract->parsed()) return cmd_extract(cfg);
    if (train->parsed()) return cmd_train(cfg);
    if (evaluate->parsed()) return cmd_evaluate(cfg);
    if (report->parsed()) return cmd_report(cfg);
    std::cerr << "error: no command given\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace sonar::cli
