#pragma once

#include <cstdint>
#include <string>

namespace sonar::cli {

// Every tunable the tool accepts, merged from defaults, an optional JSON
// config file, and command-line overrides (in that order). Unknown keys are
// rejected by name.
struct RunConfig {
  // paths
  std::string data_dir;
  std::string cache_dir;
  std::string out_dir;
  std::string runs_dir;
  std::string checkpoint;
  std::string partition;
  std::string embeddings;

  // stage selectors
  std::string model = "hltdnn";
  std::string feature = "stft";
  std::string features = "stft";  // comma list for extract
  std::string split = "test";

  // hyperparameters
  double lr = 0.001;
  int batch = 128;
  int epochs = 100;
  int patience = 10;
  double dropout = 0.5;
  int bins = 16;
  std::string seeds = "0,1,2";

  // corpus generation and partitioning
  int n_signals_per_class = 40;
  double signal_duration_s = 30.0;
  uint32_t seed = 1234;
  std::string ratios = "0.7,0.15,0.15";
  bool probe = false;

  void apply(const std::string& key, const std::string& value);
  void merge_file(const std::string& path);
  std::string to_json() const;
};

// Exit codes: 0 success, 1 usage or config error, 2 runtime failure.
int run_cli(int argc, const char* const* argv);

}  // namespace sonar::cli
