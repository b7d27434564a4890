#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "sonar/common.hpp"
#include "sonar/nn/adagrad.hpp"
#include "sonar/nn/checkpoint.hpp"
#include "sonar/nn/models.hpp"

using namespace sonar;
using namespace sonar::nn;
namespace fs = std::filesystem;

namespace {

fs::path work_dir() {
  auto dir = fs::temp_directory_path() / "sonar_models_test";
  fs::create_directories(dir);
  return dir;
}

template <typename T>
Tensor<T> random_batch(size_t n, size_t f, size_t t, Rng& rng) {
  std::vector<T> v(n * f * t);
  for (T& x : v) x = static_cast<T>(rand_range(rng, -1.5, 1.5));
  return Tensor<T>::from_values({n, size_t(1), f, t}, std::move(v));
}

// Small configuration that keeps finite differences affordable while leaving
// one timestep after the four pools.
ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.block_channels = {2, 3, 4, 5};
  cfg.embed_dim = 7;
  cfg.bins = 3;
  cfg.input_freq = 6;
  cfg.input_time = 16;
  return cfg;
}

}  // namespace

TEST_CASE("model names map to kinds and back") {
  CHECK(std::string(model_name(ModelKind::TDNN)) == "tdnn");
  CHECK(std::string(model_name(ModelKind::HLTDNN)) == "hltdnn");
  CHECK(model_from_name("tdnn") == ModelKind::TDNN);
  CHECK(model_from_name("hltdnn") == ModelKind::HLTDNN);
  CHECK_THROWS_AS(model_from_name("cnn"), ConfigError);
}

TEST_CASE("default models expose the documented parameter tables") {
  Rng rng(1);
  auto tdnn = build_tdnn<float>(ModelConfig{}, rng);
  auto hl = build_hltdnn<float>(ModelConfig{}, rng);

  CHECK(parameter_count(tdnn) == 884228);
  CHECK(parameter_count(hl) == 896516);

  const std::vector<std::string> tdnn_names = {
      "block1.conv.weight", "block1.conv.bias", "block2.conv.weight",
      "block2.conv.bias",   "block3.conv.weight", "block3.conv.bias",
      "block4.conv.weight", "block4.conv.bias",   "head.conv1d.weight",
      "head.conv1d.bias",   "classifier.weight",  "classifier.bias"};
  const std::vector<std::string> hl_names = {
      "block1.conv.weight", "block1.conv.bias", "block2.conv.weight",
      "block2.conv.bias",   "block3.conv.weight", "block3.conv.bias",
      "block4.conv.weight", "block4.conv.bias",   "head.conv1d.weight",
      "head.conv1d.bias",   "hist.centers",       "hist.widths",
      "classifier.weight",  "classifier.bias"};
  CHECK(tdnn.names == tdnn_names);
  CHECK(hl.names == hl_names);

  CHECK(tdnn.param("classifier.weight").shape() == Shape{4, 128});
  CHECK(hl.param("classifier.weight").shape() == Shape{4, 2176});
  CHECK(hl.param("hist.centers").shape() == Shape{16, 128});
  CHECK(tdnn.pooled_time() == 3);
  CHECK(tdnn.embed_width() == 128);
  CHECK(hl.embed_width() == 2176);
  CHECK_THROWS_AS(tdnn.param("missing.weight"), std::invalid_argument);

  // The histogram branch shares storage with the parameter table, so
  // optimizer updates reach the layer without copying.
  CHECK(hl.param("hist.centers").data() == hl.hist.centers.data());
  CHECK(hl.param("hist.widths").data() == hl.hist.widths.data());
}

TEST_CASE("building with the same seed is deterministic") {
  Rng a(42), b(42);
  auto m1 = build_hltdnn<float>(ModelConfig{}, a);
  auto m2 = build_hltdnn<float>(ModelConfig{}, b);
  for (size_t i = 0; i < m1.params.size(); ++i) {
    CHECK(m1.params[i].values() == m2.params[i].values());
  }
}

TEST_CASE("model rejects configs that pool the time axis away") {
  Rng rng(3);
  ModelConfig cfg;
  cfg.input_time = 8;
  CHECK_THROWS_AS(build_tdnn<float>(cfg, rng), std::invalid_argument);
  cfg.input_time = 16;
  CHECK_NOTHROW(build_tdnn<float>(cfg, rng));
}

TEST_CASE("forward validates the batch shape") {
  Rng rng(4);
  auto cfg = tiny_config();
  auto m = build_tdnn<float>(cfg, rng);
  Rng drop(1);
  auto bad = Tensor<float>::zeros({2, 1, cfg.input_freq, cfg.input_time + 1});
  CHECK_THROWS_AS(forward(m, bad, false, drop), std::invalid_argument);
  auto bad2 = Tensor<float>::zeros({2, 2, cfg.input_freq, cfg.input_time});
  CHECK_THROWS_AS(forward(m, bad2, false, drop), std::invalid_argument);
}

TEST_CASE("embedding widths and logit shapes match the configuration") {
  Rng rng(5);
  auto cfg = tiny_config();
  auto tdnn = build_tdnn<float>(cfg, rng);
  auto hl = build_hltdnn<float>(cfg, rng);
  Rng data_rng(6);
  auto batch = random_batch<float>(3, cfg.input_freq, cfg.input_time, data_rng);

  auto et = embed(tdnn, batch);
  auto eh = embed(hl, batch);
  CHECK(et.shape() == Shape{3, 7});
  CHECK(eh.shape() == Shape{3, 7 + 3 * 5});

  Rng drop(7);
  auto lt = forward(tdnn, batch, false, drop);
  auto lh = forward(hl, batch, false, drop);
  CHECK(lt.shape() == Shape{3, 4});
  CHECK(lh.shape() == Shape{3, 4});

  // The sigmoid keeps the time-averaged part of the embedding in (0,1), the
  // histogram part is a mean of radial basis responses, so everything the
  // soft bins see lives on the unit interval.
  for (float v : eh.values()) {
    CHECK(v > 0.0f);
    CHECK(v < 1.0f);
  }
}

TEST_CASE("histogram model with silenced descriptor columns matches the plain model") {
  Rng rng(8);
  auto cfg = tiny_config();
  auto hl = build_hltdnn<float>(cfg, rng);
  Rng rng2(9);
  auto tdnn = build_tdnn<float>(cfg, rng2);

  // Share the trunk and head, splice the first embedding columns of the
  // classifier, and zero what multiplies the histogram descriptor.
  for (const auto& name : tdnn.names) {
    if (name == "classifier.weight" || name == "classifier.bias") continue;
    tdnn.param(name).values() = hl.param(name).values();
  }
  tdnn.param("classifier.bias").values() = hl.param("classifier.bias").values();
  const size_t ed = cfg.embed_dim, ew = hl.embed_width();
  auto& hw = hl.param("classifier.weight").values();
  auto& tw = tdnn.param("classifier.weight").values();
  for (size_t r = 0; r < cfg.num_classes; ++r) {
    for (size_t j = 0; j < ew; ++j) {
      if (j < ed) {
        tw[r * ed + j] = hw[r * ew + j];
      } else {
        hw[r * ew + j] = 0.0f;
      }
    }
  }

  Rng data_rng(10);
  auto batch = random_batch<float>(2, cfg.input_freq, cfg.input_time, data_rng);
  auto eh = embed(hl, batch);
  auto et = embed(tdnn, batch);
  for (size_t i = 0; i < 2; ++i) {
    for (size_t j = 0; j < ed; ++j) {
      CHECK(eh.values()[i * ew + j] == et.values()[i * ed + j]);
    }
  }

  Rng drop(11);
  auto lh = forward(hl, batch, false, drop);
  auto lt = forward(tdnn, batch, false, drop);
  for (size_t i = 0; i < lh.numel(); ++i) {
    CHECK(lh.values()[i] ==
          doctest::Approx(lt.values()[i]).epsilon(1e-6));
  }
}

TEST_CASE("forward on a batch equals forward per sample") {
  Rng rng(12);
  auto cfg = tiny_config();
  auto m = build_hltdnn<float>(cfg, rng);
  Rng data_rng(13);
  auto batch = random_batch<float>(3, cfg.input_freq, cfg.input_time, data_rng);
  Rng drop(14);
  auto all = forward(m, batch, false, drop);

  const size_t plane = cfg.input_freq * cfg.input_time;
  for (size_t i = 0; i < 3; ++i) {
    std::vector<float> one(batch.values().begin() + i * plane,
                           batch.values().begin() + (i + 1) * plane);
    auto single = Tensor<float>::from_values(
        {size_t(1), size_t(1), cfg.input_freq, cfg.input_time}, std::move(one));
    auto li = forward(m, single, false, drop);
    for (size_t c = 0; c < cfg.num_classes; ++c) {
      CHECK(all.values()[i * cfg.num_classes + c] ==
            doctest::Approx(li.values()[c]).epsilon(1e-5));
    }
  }
}

TEST_CASE("evaluation forwards are deterministic and dropout-free") {
  Rng rng(15);
  auto cfg = tiny_config();
  cfg.dropout_p = 0.5;
  auto m = build_hltdnn<float>(cfg, rng);
  Rng data_rng(16);
  auto batch = random_batch<float>(2, cfg.input_freq, cfg.input_time, data_rng);

  Rng d1(100), d2(200);
  auto a = forward(m, batch, false, d1);
  auto b = forward(m, batch, false, d2);
  CHECK(a.values() == b.values());

  // Training mode with different draws differs, with the same draw agrees.
  Rng t1(300), t2(300), t3(301);
  auto tr1 = forward(m, batch, true, t1);
  auto tr2 = forward(m, batch, true, t2);
  auto tr3 = forward(m, batch, true, t3);
  CHECK(tr1.values() == tr2.values());
  CHECK(tr1.values() != tr3.values());

  // With dropout disabled, training and evaluation coincide.
  cfg.dropout_p = 0.0;
  Rng rng2(15);
  auto m0 = build_hltdnn<float>(cfg, rng2);
  Rng t4(400), t5(500);
  auto on = forward(m0, batch, true, t4);
  auto off = forward(m0, batch, false, t5);
  CHECK(on.values() == off.values());
}

TEST_CASE("one training step moves every parameter") {
  Rng rng(17);
  auto cfg = tiny_config();
  auto m = build_hltdnn<float>(cfg, rng);
  Rng data_rng(18);
  auto batch = random_batch<float>(4, cfg.input_freq, cfg.input_time, data_rng);
  std::vector<int> labels = {0, 1, 2, 3};

  Tape<float> tape;
  TapeGuard<float> guard(tape);
  for (auto& p : m.params) p.zero_grad();
  Rng drop(19);
  auto logits = forward(m, batch, false, drop);
  auto loss = softmax_cross_entropy(logits, labels);
  backward(loss, tape);

  for (size_t i = 0; i < m.params.size(); ++i) {
    double norm = 0.0;
    for (float g : m.params[i].grad()) norm += double(g) * double(g);
    INFO("parameter ", m.names[i]);
    CHECK(norm > 0.0);
  }
}

TEST_CASE("full loss gradient matches finite differences on a tiny model") {
  Rng rng(20);
  auto cfg = tiny_config();
  cfg.dropout_p = 0.0;
  auto m = build_hltdnn<double>(cfg, rng);
  Rng data_rng(21);
  auto batch = random_batch<double>(2, cfg.input_freq, cfg.input_time, data_rng);
  const std::vector<int> labels = {1, 3};

  auto loss_value = [&] {
    Rng drop(0);
    auto logits = forward(m, batch, false, drop);
    auto loss = softmax_cross_entropy(logits, labels);
    return loss.item();
  };

  {
    Tape<double> tape;
    TapeGuard<double> guard(tape);
    for (auto& p : m.params) p.zero_grad();
    Rng drop(0);
    auto logits = forward(m, batch, false, drop);
    auto loss = softmax_cross_entropy(logits, labels);
    backward(loss, tape);
  }

  const double h = 1e-5;
  size_t checked = 0;
  for (size_t pi = 0; pi < m.params.size(); ++pi) {
    auto& p = m.params[pi];
    // Every element of the small tensors, a stride through the larger ones.
    const size_t stride = std::max<size_t>(1, p.numel() / 40);
    for (size_t i = 0; i < p.numel(); i += stride) {
      const double keep = p.values()[i];
      p.values()[i] = keep + h;
      const double up = loss_value();
      p.values()[i] = keep - h;
      const double dn = loss_value();
      p.values()[i] = keep;
      const double fd = (up - dn) / (2.0 * h);
      const double an = p.grad()[i];
      const double tol =
          std::max(1e-4 * std::max(std::abs(fd), std::abs(an)), 1e-7);
      INFO(m.names[pi], "[", i, "]: fd=", fd, " analytic=", an);
      CHECK(std::abs(fd - an) <= tol);
      ++checked;
    }
  }
  CHECK(checked > 100);
}

TEST_CASE("model checkpoints round-trip parameters, optimizer and metadata") {
  auto dir = work_dir();
  const auto path = (dir / "model.ckpt").string();

  Rng rng(22);
  auto cfg = tiny_config();
  auto m = build_hltdnn<float>(cfg, rng);

  // Take one optimizer step so the accumulators are populated.
  Rng data_rng(23);
  auto batch = random_batch<float>(2, cfg.input_freq, cfg.input_time, data_rng);
  Adagrad<float> opt(0.01);
  {
    Tape<float> tape;
    TapeGuard<float> guard(tape);
    for (auto& p : m.params) p.zero_grad();
    Rng drop(24);
    auto logits = forward(m, batch, true, drop);
    auto loss = softmax_cross_entropy(logits, {0, 2});
    backward(loss, tape);
    opt.step(m.params);
  }

  features::FeatureStats stats;
  stats.kind = features::FeatureKind::MFCC;
  stats.mean = 1.25;
  stats.std_dev = 2.5;
  stats.count = 640;
  save_checkpoint(path, model_to_checkpoint(m, &opt, &stats,
                                            features::FeatureKind::MFCC));

  auto loaded = checkpoint_to_model(load_checkpoint(path));
  CHECK(loaded.model.kind == ModelKind::HLTDNN);
  CHECK(loaded.model.cfg.block_channels == cfg.block_channels);
  CHECK(loaded.model.cfg.embed_dim == cfg.embed_dim);
  CHECK(loaded.model.cfg.bins == cfg.bins);
  CHECK(loaded.model.cfg.input_freq == cfg.input_freq);
  CHECK(loaded.model.cfg.input_time == cfg.input_time);
  CHECK(loaded.model.cfg.dropout_p == doctest::Approx(cfg.dropout_p));
  CHECK(loaded.feature_kind == features::FeatureKind::MFCC);
  REQUIRE(loaded.has_stats);
  CHECK(loaded.stats.mean == doctest::Approx(1.25));
  CHECK(loaded.stats.std_dev == doctest::Approx(2.5));
  CHECK(loaded.stats.count == 640);

  REQUIRE(loaded.model.params.size() == m.params.size());
  for (size_t i = 0; i < m.params.size(); ++i) {
    CHECK(loaded.model.params[i].shape() == m.params[i].shape());
    CHECK(loaded.model.params[i].values() == m.params[i].values());
  }

  // The restored histogram layer sees the restored parameters.
  CHECK(loaded.model.hist.centers.values() ==
        m.param("hist.centers").values());

  // Logits agree exactly between the original and the restored model.
  Rng d1(25), d2(25);
  auto l1 = forward(m, batch, false, d1);
  auto l2 = forward(loaded.model, batch, false, d2);
  CHECK(l1.values() == l2.values());

  // Optimizer state restores and keeps stepping identically.
  Adagrad<float> opt2(0.01);
  optimizer_from_checkpoint(load_checkpoint(path), loaded.model, opt2);
  REQUIRE(opt2.accumulators().size() == opt.accumulators().size());
  for (size_t i = 0; i < opt.accumulators().size(); ++i) {
    CHECK(opt2.accumulators()[i] == opt.accumulators()[i]);
  }

  // A model checkpoint without optimizer records refuses to restore one.
  save_checkpoint(path, model_to_checkpoint(m, nullptr, nullptr,
                                            features::FeatureKind::STFT));
  auto bare = checkpoint_to_model(load_checkpoint(path));
  CHECK_FALSE(bare.has_stats);
  Adagrad<float> opt3(0.01);
  CHECK_THROWS_AS(optimizer_from_checkpoint(load_checkpoint(path), bare.model, opt3),
                  std::runtime_error);

  fs::remove_all(dir);
}
