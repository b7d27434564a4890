#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "doctest.h"
#include "sonar/audio/audio.hpp"
#include "sonar/common.hpp"
#include "sonar/features/features.hpp"
#include "sonar/nn/checkpoint.hpp"
#include "sonar/synth/synth.hpp"
#include "sonar/train/train.hpp"

using namespace sonar;
namespace fs = std::filesystem;

namespace {

// Small corpus shared by the training tests: 4 signals per class, 6 s each,
// so every class contributes 2 segments x 4 signals across the splits.
const std::string& shared_cache() {
  static std::string cache = [] {
    auto root = fs::temp_directory_path() / "sonar_train_test";
    fs::remove_all(root);
    auto corpus = root / "corpus";
    auto cache_dir = root / "cache";
    synth::SynthSpec spec;
    spec.n_signals_per_class = 4;
    spec.signal_duration_s = 6.0;
    auto manifest = synth::generate(spec, corpus.string());
    auto part = audio::partition(manifest, {0.5, 0.25, 0.25}, 7);
    features::FeatureConfig fc;
    features::extract_dataset(manifest, part, {features::FeatureKind::STFT},
                              fc, cache_dir.string());
    return cache_dir.string();
  }();
  return cache;
}

train::HyperParams quick_hp(int epochs, int patience) {
  train::HyperParams hp;
  hp.epochs = epochs;
  hp.patience = patience;
  hp.batch = 16;
  return hp;
}

}  // namespace

TEST_CASE("hyperparameter validation rejects each bad field") {
  train::HyperParams hp;
  CHECK_NOTHROW(hp.validate());
  auto expect_throw = [](train::HyperParams h) {
    CHECK_THROWS_AS(h.validate(), ConfigError);
  };
  {
    auto h = hp;
    h.lr = 0.0;
    expect_throw(h);
  }
  {
    auto h = hp;
    h.batch = 0;
    expect_throw(h);
  }
  {
    auto h = hp;
    h.epochs = 0;
    expect_throw(h);
  }
  {
    auto h = hp;
    h.patience = 0;
    expect_throw(h);
  }
  {
    auto h = hp;
    h.epochs = 5;
    h.patience = 6;
    expect_throw(h);
  }
  {
    auto h = hp;
    h.dropout = 1.0;
    expect_throw(h);
  }
  {
    auto h = hp;
    h.dropout = -0.1;
    expect_throw(h);
  }
  {
    auto h = hp;
    h.bins = 0;
    expect_throw(h);
  }
  {
    auto h = hp;
    h.seeds.clear();
    expect_throw(h);
  }
}

TEST_CASE("aggregate computes mean and population sigma") {
  auto s = train::aggregate({50.0, 52.0, 54.0});
  CHECK(s.mean == doctest::Approx(52.0).epsilon(1e-12));
  CHECK(s.sigma == doctest::Approx(std::sqrt(8.0 / 3.0)).epsilon(1e-12));
  CHECK(s.values == std::vector<double>{50.0, 52.0, 54.0});

  auto empty = train::aggregate({});
  CHECK(empty.mean == 0.0);
  CHECK(empty.sigma == 0.0);
  CHECK(empty.values.empty());
}

TEST_CASE("experiment summaries round-trip through json") {
  train::ExperimentSummary s;
  s.model = "hltdnn";
  s.feature = "stft";
  s.seeds = {0, 1};
  s.aborted_seeds = {2};
  s.abort_reasons = {"training aborted: non-finite loss at seed 2"};
  s.best_epochs = {4, 9};
  s.stats.emplace_back("accuracy", train::aggregate({0.5, 0.75}));
  train::MetricStat weird;
  weird.mean = -std::numeric_limits<double>::infinity();
  weird.sigma = 0.0;
  weird.values = {-std::numeric_limits<double>::infinity(),
                  std::numeric_limits<double>::infinity()};
  s.stats.emplace_back("overall_fdr", weird);

  auto text = s.to_json();
  auto back = train::ExperimentSummary::from_json(text);
  CHECK(back.model == s.model);
  CHECK(back.feature == s.feature);
  CHECK(back.seeds == s.seeds);
  CHECK(back.aborted_seeds == s.aborted_seeds);
  CHECK(back.abort_reasons == s.abort_reasons);
  CHECK(back.best_epochs == s.best_epochs);
  CHECK(back.stat("accuracy").mean == doctest::Approx(0.625));
  CHECK(back.stat("accuracy").values == std::vector<double>{0.5, 0.75});
  CHECK(std::isinf(back.stat("overall_fdr").mean));
  CHECK(back.stat("overall_fdr").mean < 0);
  CHECK(std::isinf(back.stat("overall_fdr").values[1]));
  CHECK(back.stat("overall_fdr").values[1] > 0);
  CHECK_THROWS_AS(back.stat("nonexistent"), ConfigError);

  auto dir = fs::temp_directory_path() / "sonar_train_test_json";
  fs::create_directories(dir);
  auto path = (dir / "summary.json").string();
  s.save(path);
  auto loaded = train::ExperimentSummary::load(path);
  CHECK(loaded.to_json() == text);
  CHECK_THROWS_AS(train::ExperimentSummary::from_json("not json"), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("cached features load into normalized splits") {
  auto data = train::load_cached(shared_cache(), features::FeatureKind::STFT);
  CHECK(data.kind == features::FeatureKind::STFT);
  CHECK(data.train.freq_bins == 48);
  CHECK(data.train.time_frames == 48);

  // 4 signals x 2 segments per class split 2/1/1.
  CHECK(data.train.size() == 16);
  CHECK(data.val.size() == 8);
  CHECK(data.test.size() == 8);
  CHECK(data.train.segment_ids.size() == 16);

  // All four labels appear in every split and nothing was read yet.
  for (const auto* split : {&data.train, &data.val, &data.test}) {
    std::array<int, 4> seen{};
    for (int l : split->labels) {
      REQUIRE(l >= 0);
      REQUIRE(l < 4);
      seen[size_t(l)]++;
    }
    for (int c = 0; c < 4; ++c) CHECK(seen[size_t(c)] > 0);
    CHECK(split->reads == 0);
  }

  // Train statistics z-score the raw region to zero mean, unit variance. The
  // canvas pads 47 frames to 48 with zeros, so the canvas-wide second moment
  // is diluted to exactly 47/48.
  double sum = 0.0, sq = 0.0;
  size_t count = 0;
  for (const auto& row : data.train.data) {
    for (float v : row) {
      sum += v;
      sq += double(v) * double(v);
      ++count;
    }
  }
  CHECK(sum / double(count) == doctest::Approx(0.0).epsilon(1e-4));
  CHECK(sq / double(count) == doctest::Approx(47.0 / 48.0).epsilon(1e-3));

  CHECK_THROWS_AS(train::load_cached(shared_cache(), features::FeatureKind::MFCC),
                  ConfigError);
}

TEST_CASE("load_split uses caller statistics and validates the partition name") {
  auto data = train::load_cached(shared_cache(), features::FeatureKind::STFT);
  auto test_again = train::load_split(shared_cache(), features::FeatureKind::STFT,
                                      "test", data.stats);
  REQUIRE(test_again.size() == data.test.size());
  for (size_t i = 0; i < test_again.size(); ++i) {
    CHECK(test_again.data[i] == data.test.data[i]);
    CHECK(test_again.labels[i] == data.test.labels[i]);
  }
  CHECK_THROWS_AS(train::load_split(shared_cache(), features::FeatureKind::STFT,
                                    "holdout", data.stats),
                  ConfigError);
}

TEST_CASE("make_batch stacks samples and counts reads") {
  auto data = train::load_cached(shared_cache(), features::FeatureKind::STFT);
  std::vector<int> labels;
  auto x = train::make_batch(data.train, {3, 0}, labels);
  CHECK(x.shape() == nn::Shape{2, 1, 48, 48});
  CHECK(labels ==
        std::vector<int>{data.train.labels[3], data.train.labels[0]});
  const size_t plane = 48 * 48;
  for (size_t i = 0; i < plane; ++i) {
    CHECK(x.values()[i] == data.train.data[3][i]);
    CHECK(x.values()[plane + i] == data.train.data[0][i]);
  }
  CHECK(data.train.reads == 2);
  CHECK_THROWS_AS(train::make_batch(data.train, {}, labels),
                  std::invalid_argument);
}

TEST_CASE("a zeroed classifier scores ln(4) loss on four balanced classes") {
  auto data = train::load_cached(shared_cache(), features::FeatureKind::STFT);
  nn::ModelConfig cfg;
  cfg.input_freq = 48;
  cfg.input_time = 48;
  Rng rng(0);
  auto model = nn::build_tdnn<float>(cfg, rng);
  for (const char* name : {"classifier.weight", "classifier.bias"}) {
    auto& v = model.param(name).values();
    std::fill(v.begin(), v.end(), 0.0f);
  }
  const double loss = train::split_loss(model, data.val, 4);
  CHECK(loss == doctest::Approx(std::log(4.0)).epsilon(1e-6));
}

TEST_CASE("training stops after patience epochs without improvement") {
  auto data = train::load_cached(shared_cache(), features::FeatureKind::STFT);
  // A vanishing learning rate freezes the model, so epoch 1 sets the best
  // validation loss and the stopper fires exactly patience epochs later.
  auto hp = quick_hp(10, 2);
  hp.lr = 1e-12;
  auto res = train::train_run(nn::ModelKind::TDNN, data, hp, 0, "");
  CHECK(res.best_epoch == 1);
  CHECK(res.stopped_epoch == 3);
  CHECK(res.train_curve.size() == 3);
  CHECK(res.val_curve.size() == 3);
  CHECK(res.val_curve[1] == doctest::Approx(res.val_curve[0]).epsilon(1e-9));
}

TEST_CASE("training runs are bitwise deterministic per seed") {
  auto data = train::load_cached(shared_cache(), features::FeatureKind::STFT);
  auto hp = quick_hp(3, 3);
  auto a = train::train_run(nn::ModelKind::HLTDNN, data, hp, 5, "");
  auto b = train::train_run(nn::ModelKind::HLTDNN, data, hp, 5, "");
  CHECK(a.train_curve == b.train_curve);
  CHECK(a.val_curve == b.val_curve);
  CHECK(a.best_epoch == b.best_epoch);
  CHECK(a.test_metrics.cls.accuracy == b.test_metrics.cls.accuracy);
  CHECK(a.test_metrics.mcc == b.test_metrics.mcc);

  // A different seed takes a different path.
  auto c = train::train_run(nn::ModelKind::HLTDNN, data, hp, 6, "");
  CHECK(a.train_curve != c.train_curve);
}

TEST_CASE("the test split is read exactly once, at final evaluation") {
  auto data = train::load_cached(shared_cache(), features::FeatureKind::STFT);
  auto hp = quick_hp(2, 2);
  train::train_run(nn::ModelKind::TDNN, data, hp, 0, "");
  CHECK(data.test.reads == data.test.size());
  CHECK(data.train.reads >= 2 * data.train.size());
  CHECK(data.val.reads == 2 * data.val.size());
}

TEST_CASE("training writes checkpoint, curves and metrics artifacts") {
  auto data = train::load_cached(shared_cache(), features::FeatureKind::STFT);
  auto dir = fs::temp_directory_path() / "sonar_train_test_run";
  fs::remove_all(dir);
  auto hp = quick_hp(2, 2);
  auto res = train::train_run(nn::ModelKind::HLTDNN, data, hp, 1, dir.string());

  CHECK(fs::exists(dir / "checkpoint.bin"));
  CHECK(fs::exists(dir / "curves.csv"));
  CHECK(fs::exists(dir / "metrics.json"));
  CHECK(res.checkpoint_path == (dir / "checkpoint.bin").string());

  // The checkpoint restores to a model that reproduces the test evaluation.
  auto loaded = nn::checkpoint_to_model(nn::load_checkpoint(res.checkpoint_path));
  CHECK(loaded.model.kind == nn::ModelKind::HLTDNN);
  CHECK(loaded.feature_kind == features::FeatureKind::STFT);
  REQUIRE(loaded.has_stats);
  CHECK(loaded.stats.mean == doctest::Approx(float(data.stats.mean)));
  auto rep = train::evaluate(loaded.model, data.test, hp.batch);
  CHECK(rep.cls.accuracy == res.test_metrics.cls.accuracy);
  CHECK(rep.mcc == res.test_metrics.mcc);

  // curves.csv holds a header plus one row per epoch run.
  std::ifstream in(dir / "curves.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "epoch,train_loss,val_loss");
  int rows = 0;
  while (std::getline(in, line) && !line.empty()) ++rows;
  CHECK(rows == res.stopped_epoch);

  fs::remove_all(dir);
}

TEST_CASE("evaluation does not depend on batch partitioning") {
  auto data = train::load_cached(shared_cache(), features::FeatureKind::STFT);
  nn::ModelConfig cfg;
  cfg.input_freq = 48;
  cfg.input_time = 48;
  Rng rng(11);
  auto model = nn::build_hltdnn<float>(cfg, rng);

  auto small = train::evaluate(model, data.test, 3);
  auto large = train::evaluate(model, data.test, 64);
  CHECK(small.cls.accuracy == large.cls.accuracy);
  CHECK(small.mcc == large.mcc);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      CHECK(small.confusion.at(i, j) == large.confusion.at(i, j));
  CHECK(small.fdr.overall_log == doctest::Approx(large.fdr.overall_log));

  auto e1 = train::split_embeddings(model, data.test, 2);
  auto e2 = train::split_embeddings(model, data.test, 64);
  REQUIRE(e1.size() == data.test.size() * model.embed_width());
  CHECK(e1 == e2);

  CHECK_THROWS_AS(train::evaluate(model, data.test, 0), std::invalid_argument);
}

TEST_CASE("experiments aggregate per-seed runs into a summary") {
  auto dir = fs::temp_directory_path() / "sonar_train_test_exp";
  fs::remove_all(dir);
  auto hp = quick_hp(2, 2);
  hp.seeds = {0, 1};
  auto summary =
      train::run_experiment(nn::ModelKind::TDNN, features::FeatureKind::STFT,
                            hp, shared_cache(), dir.string());

  CHECK(summary.model == "tdnn");
  CHECK(summary.feature == "stft");
  CHECK(summary.seeds == std::vector<uint32_t>{0, 1});
  CHECK(summary.aborted_seeds.empty());
  CHECK(summary.best_epochs.size() == 2);
  for (const char* name :
       {"accuracy", "precision", "recall", "f1", "mcc", "overall_fdr"}) {
    CHECK(summary.stat(name).values.size() == 2);
  }
  CHECK(fs::exists(dir / "summary.json"));
  CHECK(fs::exists(dir / "run_0" / "checkpoint.bin"));
  CHECK(fs::exists(dir / "run_1" / "metrics.json"));

  auto reloaded = train::ExperimentSummary::load((dir / "summary.json").string());
  CHECK(reloaded.to_json() == summary.to_json());

  // An exploding learning rate aborts runs without sinking the experiment.
  fs::remove_all(dir);
  auto bad = hp;
  bad.lr = 1e18;
  bad.seeds = {3};
  auto aborted =
      train::run_experiment(nn::ModelKind::TDNN, features::FeatureKind::STFT,
                            bad, shared_cache(), dir.string());
  CHECK(aborted.seeds.empty());
  CHECK(aborted.aborted_seeds == std::vector<uint32_t>{3});
  REQUIRE(aborted.abort_reasons.size() == 1);
  CHECK(aborted.abort_reasons[0].find("non-finite") != std::string::npos);
  CHECK(aborted.stat("accuracy").values.empty());

  fs::remove_all(dir);
}

TEST_CASE("training rejects empty splits") {
  auto data = train::load_cached(shared_cache(), features::FeatureKind::STFT);
  auto hp = quick_hp(2, 2);
  train::DataBundle broken;
  broken.kind = data.kind;
  broken.stats = data.stats;
  broken.val = data.val;
  broken.test = data.test;
  CHECK_THROWS_AS(train::train_run(nn::ModelKind::TDNN, broken, hp, 0, ""),
                  ConfigError);
}
