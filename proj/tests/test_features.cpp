#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "sonar/audio/audio.hpp"
#include "sonar/common.hpp"
#include "sonar/features/features.hpp"

using namespace sonar;
using namespace sonar::features;
namespace fs = std::filesystem;

namespace {

fs::path work_dir() {
  auto dir = fs::temp_directory_path() / "sonar_features_test";
  fs::create_directories(dir);
  return dir;
}

std::vector<double> sine(double freq, int rate, size_t n, double amp = 1.0) {
  std::vector<double> x(n);
  for (size_t i = 0; i < n; ++i)
    x[i] = amp * std::sin(2.0 * std::numbers::pi * freq * double(i) / rate);
  return x;
}

std::vector<double> noise(size_t n, uint32_t seed) {
  Rng rng(seed);
  std::vector<double> x(n);
  for (double& v : x) v = rand_normal(rng) * 0.1;
  return x;
}

// Tiny analysis geometry: 8-sample window, 4-sample hop at 16 kHz.
FeatureConfig tiny_cfg() {
  FeatureConfig cfg;
  cfg.window_ms = 0.5;
  cfg.hop_ms = 0.25;
  return cfg;
}

double hann8(int i) {
  return 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / 8.0);
}

}  // namespace

TEST_CASE("feature kind names round trip and reject junk") {
  for (FeatureKind k : kAllKinds) {
    CHECK(kind_from_name(kind_name(k)) == k);
  }
  CHECK(std::string(kind_name(FeatureKind::MS)) == "ms");
  CHECK(std::string(kind_name(FeatureKind::VQT)) == "vqt");
  CHECK_THROWS_WITH_AS(kind_from_name("spectrogram"),
                       doctest::Contains("unknown feature kind"), ConfigError);
}

TEST_CASE("shape tables for all six kinds") {
  FeatureConfig cfg;
  CHECK(cfg.window_samples() == 4000);
  CHECK(cfg.hop_samples() == 1024);
  CHECK(frame_count(audio::kSegmentSamples, cfg) == 47);

  auto check = [&](FeatureKind k, size_t pf, size_t rf) {
    const auto padded = padded_shape(k, cfg);
    const auto raw = raw_shape(k, cfg);
    CHECK(padded[0] == pf);
    CHECK(padded[1] == 48);
    CHECK(raw[0] == rf);
    CHECK(raw[1] == 47);
  };
  check(FeatureKind::MS, 48, 40);
  check(FeatureKind::MFCC, 16, 16);
  check(FeatureKind::STFT, 48, 48);
  check(FeatureKind::GFCC, 64, 64);
  check(FeatureKind::CQT, 64, 64);
  check(FeatureKind::VQT, 64, 64);
}

TEST_CASE("framing reflects edges and applies the window") {
  auto cfg = tiny_cfg();
  std::vector<double> x(16);
  for (size_t i = 0; i < x.size(); ++i) x[i] = double(i);

  const auto frames = frame_signal(x, cfg);
  REQUIRE(frames.size() == 5);
  REQUIRE(frames[0].size() == 8);

  // Frame 0 starts at sample -4; reflected indexing gives 4,3,2,1,0,1,2,3.
  const double left[8] = {4, 3, 2, 1, 0, 1, 2, 3};
  for (int i = 0; i < 8; ++i) {
    CHECK(frames[0][i] == doctest::Approx(hann8(i) * left[i]).epsilon(1e-12));
  }
  // Frame 2 covers samples 4..11 with no reflection.
  for (int i = 0; i < 8; ++i) {
    CHECK(frames[2][i] == doctest::Approx(hann8(i) * x[4 + i]).epsilon(1e-12));
  }
  // Frame 4 starts at 12; indices 16..19 reflect back to 14,13,12,11.
  CHECK(frames[4][4] == doctest::Approx(hann8(4) * 14.0).epsilon(1e-12));
  CHECK(frames[4][5] == doctest::Approx(hann8(5) * 13.0).epsilon(1e-12));

  CHECK_THROWS_AS(frame_signal({}, cfg), std::invalid_argument);
}

TEST_CASE("magnitude spectrogram matches a direct DFT") {
  auto cfg = tiny_cfg();
  const auto x = noise(33, 7);
  const auto frames = frame_signal(x, cfg);
  const Matrix mag = magnitude_spectrogram(x, cfg);
  REQUIRE(mag.rows == 5);  // 8/2 + 1 bins
  REQUIRE(mag.cols == frames.size());

  for (size_t t = 0; t < frames.size(); ++t) {
    for (size_t k = 0; k < 5; ++k) {
      std::complex<double> acc = 0.0;
      for (size_t n = 0; n < 8; ++n) {
        const double ph = -2.0 * std::numbers::pi * double(k) * double(n) / 8.0;
        acc += frames[t][n] * std::complex<double>(std::cos(ph), std::sin(ph));
      }
      CHECK(mag.at(k, t) == doctest::Approx(std::abs(acc)).epsilon(1e-10));
    }
  }
}

TEST_CASE("a pure tone peaks in the expected spectrogram bin") {
  FeatureConfig cfg;
  // 400 Hz at a 4000-sample window over 16 kHz lands exactly on bin 100.
  const auto x = sine(400.0, cfg.sample_rate, audio::kSegmentSamples, 0.5);
  const Matrix mag = magnitude_spectrogram(x, cfg);
  for (size_t t = 2; t + 2 < mag.cols; ++t) {
    size_t best = 0;
    for (size_t b = 1; b < mag.rows; ++b)
      if (mag.at(b, t) > mag.at(best, t)) best = b;
    CHECK(best == 100);
  }
}

TEST_CASE("band reduction averages round-to-center groups") {
  Matrix mag(8, 2);
  for (size_t b = 0; b < 8; ++b) {
    mag.at(b, 0) = double(b);
    mag.at(b, 1) = 1.0;
  }
  const Matrix out = band_reduce(mag, 4);
  REQUIRE(out.rows == 4);
  REQUIRE(out.cols == 2);
  // Bin-to-band map at 8->4 is round(b/2) clamped: {0},{1,2},{3,4},{5,6,7}.
  CHECK(out.at(0, 0) == doctest::Approx(0.0));
  CHECK(out.at(1, 0) == doctest::Approx(1.5));
  CHECK(out.at(2, 0) == doctest::Approx(3.5));
  CHECK(out.at(3, 0) == doctest::Approx(6.0));
  for (size_t j = 0; j < 4; ++j) CHECK(out.at(j, 1) == doctest::Approx(1.0));

  CHECK_THROWS_AS(band_reduce(mag, 0), std::invalid_argument);
  CHECK_THROWS_AS(band_reduce(mag, 9), std::invalid_argument);
}

TEST_CASE("mel centers are evenly spaced on the mel scale") {
  FeatureConfig cfg;
  const auto pts = mel_center_freqs(cfg);
  REQUIRE(pts.size() == size_t(cfg.n_mels) + 2);
  CHECK(pts.front() == doctest::Approx(0.0));
  CHECK(pts.back() == doctest::Approx(8000.0));
  auto mel = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
  const double step = mel(8000.0) / (cfg.n_mels + 1);
  for (size_t i = 1; i < pts.size(); ++i) {
    CHECK(pts[i] > pts[i - 1]);
    CHECK(mel(pts[i]) - mel(pts[i - 1]) == doctest::Approx(step).epsilon(1e-9));
  }
}

TEST_CASE("mel filterbank forms a partition of unity between the end centers") {
  FeatureConfig cfg;
  const int n_bins = 2001;
  const Matrix fb = mel_filterbank(cfg, n_bins);
  const auto pts = mel_center_freqs(cfg);
  REQUIRE(fb.rows == size_t(cfg.n_mels));

  double max_w = 0.0;
  for (double w : fb.v) {
    CHECK(w >= 0.0);
    CHECK(w <= 1.0);
    max_w = std::max(max_w, w);
  }
  CHECK(max_w > 0.9);

  for (int b = 0; b < n_bins; ++b) {
    const double f = 8000.0 * b / (n_bins - 1);
    double sum = 0.0;
    for (int j = 0; j < cfg.n_mels; ++j) sum += fb.at(size_t(j), size_t(b));
    if (f > pts[1] && f < pts[cfg.n_mels]) {
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    } else {
      CHECK(sum <= 1.0 + 1e-9);
    }
  }
}

TEST_CASE("amplitude to dB floors small values and clamps to the peak range") {
  Matrix m(1, 4);
  m.v = {1.0, 0.1, 1e-9, 10.0};
  amplitude_to_db(m, -80.0);
  CHECK(m.v[0] == doctest::Approx(0.0));
  CHECK(m.v[1] == doctest::Approx(-20.0));
  CHECK(m.v[3] == doctest::Approx(20.0));
  // 1e-9 first hits the -80 dB floor, then the clamp at peak - 80 = -60.
  CHECK(m.v[2] == doctest::Approx(-60.0));

  Matrix neg(1, 2);
  neg.v = {-1.0, 0.5};
  amplitude_to_db(neg, -80.0);
  CHECK(neg.v[0] == doctest::Approx(0.0));
  CHECK(neg.v[1] == doctest::Approx(20.0 * std::log10(0.5)));
}

TEST_CASE("orthonormal DCT round trips and concentrates constants") {
  const auto x = noise(16, 11);
  const auto c = dct2(x, 16);
  const auto back = idct2(c, 16);
  double xe = 0.0, ce = 0.0;
  for (size_t i = 0; i < 16; ++i) {
    CHECK(back[i] == doctest::Approx(x[i]).epsilon(1e-12));
    xe += x[i] * x[i];
    ce += c[i] * c[i];
  }
  CHECK(ce == doctest::Approx(xe).epsilon(1e-12));

  const std::vector<double> ones(4, 1.0);
  const auto cc = dct2(ones, 4);
  CHECK(cc[0] == doctest::Approx(2.0));
  for (size_t k = 1; k < 4; ++k) CHECK(cc[k] == doctest::Approx(0.0));

  CHECK_THROWS_AS(dct2(x, 0), std::invalid_argument);
  CHECK_THROWS_AS(dct2(x, 17), std::invalid_argument);
  CHECK_THROWS_AS(idct2(c, 0), std::invalid_argument);
  CHECK_THROWS_AS(idct2(c, 15), std::invalid_argument);
}

TEST_CASE("gammatone centers span the band uniformly in ERB rate") {
  const auto fc = gammatone_center_freqs(64, 50.0, 8000.0);
  REQUIRE(fc.size() == 64);
  CHECK(fc.front() == doctest::Approx(50.0).epsilon(1e-9));
  CHECK(fc.back() == doctest::Approx(8000.0).epsilon(1e-9));
  auto erb_rate = [](double f) { return 21.4 * std::log10(1.0 + 0.00437 * f); };
  const double step = (erb_rate(8000.0) - erb_rate(50.0)) / 63.0;
  for (size_t i = 1; i < fc.size(); ++i) {
    CHECK(fc[i] > fc[i - 1]);
    CHECK(erb_rate(fc[i]) - erb_rate(fc[i - 1]) ==
          doctest::Approx(step).epsilon(1e-9));
  }
  CHECK_THROWS_AS(gammatone_center_freqs(0, 50.0, 8000.0),
                  std::invalid_argument);
}

TEST_CASE("gammatone filters have unit gain at their center frequencies") {
  const std::vector<double> fc = {200.0, 1000.0, 4000.0};
  const auto bank = gammatone_filterbank(fc, 16000, 2048);
  REQUIRE(bank.size() == 3);
  for (size_t ch = 0; ch < 3; ++ch) {
    double re = 0.0, im = 0.0;
    for (size_t n = 0; n < bank[ch].size(); ++n) {
      const double ph = 2.0 * std::numbers::pi * fc[ch] * double(n) / 16000.0;
      re += bank[ch][n] * std::cos(ph);
      im -= bank[ch][n] * std::sin(ph);
    }
    CHECK(std::hypot(re, im) == doctest::Approx(1.0).epsilon(1e-9));
    // Gain well below unity an octave away from center.
    double re2 = 0.0, im2 = 0.0;
    for (size_t n = 0; n < bank[ch].size(); ++n) {
      const double ph = 2.0 * std::numbers::pi * 2.0 * fc[ch] * double(n) / 16000.0;
      re2 += bank[ch][n] * std::cos(ph);
      im2 -= bank[ch][n] * std::sin(ph);
    }
    CHECK(std::hypot(re2, im2) < 0.05);
  }
}

TEST_CASE("gammatone energies concentrate on the channel nearest a tone") {
  FeatureConfig cfg;
  const auto x = sine(1000.0, cfg.sample_rate, audio::kSegmentSamples, 0.3);
  const Matrix e = gammatone_energies(x, cfg);
  REQUIRE(e.rows == 64);
  REQUIRE(e.cols == 47);

  const auto fc = gammatone_center_freqs(64, 50.0, 8000.0);
  size_t nearest = 0;
  for (size_t ch = 1; ch < fc.size(); ++ch)
    if (std::abs(fc[ch] - 1000.0) < std::abs(fc[nearest] - 1000.0)) nearest = ch;

  std::vector<double> totals(e.rows, 0.0);
  for (size_t ch = 0; ch < e.rows; ++ch)
    for (size_t t = 0; t < e.cols; ++t) totals[ch] += e.at(ch, t);
  size_t best = 0;
  for (size_t ch = 1; ch < totals.size(); ++ch)
    if (totals[ch] > totals[best]) best = ch;

  CHECK(std::abs(int(best) - int(nearest)) <= 1);
}

TEST_CASE("constant-Q centers follow equal-tempered geometric spacing") {
  FeatureConfig cfg;
  const auto fc = cq_center_freqs(cfg);
  REQUIRE(fc.size() == 64);
  CHECK(fc[0] == doctest::Approx(32.70));
  CHECK(fc[12] == doctest::Approx(2.0 * 32.70).epsilon(1e-12));
  CHECK(fc[24] == doctest::Approx(4.0 * 32.70).epsilon(1e-12));
  for (size_t k = 1; k < fc.size(); ++k) {
    CHECK(fc[k] / fc[k - 1] ==
          doctest::Approx(std::pow(2.0, 1.0 / 12.0)).epsilon(1e-12));
  }
}

TEST_CASE("constant-Q magnitude is near one for a full-scale tone at a center") {
  FeatureConfig cfg;
  const auto fc = cq_center_freqs(cfg);
  const size_t bin = 40;
  const auto x = sine(fc[bin], cfg.sample_rate, 16000);
  const Matrix mag = cq_magnitudes(x, cfg, 0.0);
  REQUIRE(mag.rows == 64);
  for (size_t t = 4; t + 4 < mag.cols; ++t) {
    CHECK(mag.at(bin, t) == doctest::Approx(1.0).epsilon(0.05));
    // A bin three semitones away should see far less of the tone.
    CHECK(mag.at(bin + 3, t) < 0.25);
  }
}

TEST_CASE("constant-Q rejects a config whose top bin reaches Nyquist") {
  FeatureConfig cfg;
  cfg.cqt_fmin = 250.0;  // 250 * 2^(63/12) is above 8 kHz
  const auto x = noise(4000, 3);
  CHECK_THROWS_WITH_AS(cq_magnitudes(x, cfg, 0.0),
                       doctest::Contains("top bin reaches Nyquist"),
                       std::invalid_argument);
  FeatureConfig ok;
  CHECK_THROWS_AS(cq_magnitudes({1.0}, ok, 0.0), std::invalid_argument);
}

TEST_CASE("variable-Q equals constant-Q exactly when gamma is zero") {
  FeatureConfig cfg;
  cfg.vqt_gamma = 0.0;
  const auto x = noise(audio::kSegmentSamples, 17);
  const auto cqt = extract_feature(x, FeatureKind::CQT, cfg);
  const auto vqt = extract_feature(x, FeatureKind::VQT, cfg);
  REQUIRE(cqt.data.size() == vqt.data.size());
  for (size_t i = 0; i < cqt.data.size(); ++i) CHECK(cqt.data[i] == vqt.data[i]);

  // With the default gamma the low bins widen and the output changes.
  FeatureConfig def;
  const auto vqt2 = extract_feature(x, FeatureKind::VQT, def);
  size_t diffs = 0;
  for (size_t i = 0; i < vqt.data.size(); ++i)
    if (vqt.data[i] != vqt2.data[i]) ++diffs;
  CHECK(diffs > 100);
}

TEST_CASE("every kind extracts to its padded shape from a valid segment") {
  FeatureConfig cfg;
  audio::Segment seg;
  seg.record_id = "rec";
  seg.index = 2;
  seg.label = 3;
  seg.samples = noise(audio::kSegmentSamples, 23);

  for (FeatureKind k : kAllKinds) {
    const auto f = extract_feature(seg, k, cfg);
    const auto padded = padded_shape(k, cfg);
    const auto raw = raw_shape(k, cfg);
    CHECK(f.kind == k);
    CHECK(f.freq_bins == padded[0]);
    CHECK(f.time_frames == padded[1]);
    CHECK(f.raw_freq == raw[0]);
    CHECK(f.raw_time == raw[1]);
    CHECK(f.data.size() == padded[0] * padded[1]);
    CHECK(f.label == 3);
    CHECK_FALSE(f.normalized);
    for (float v : f.data) CHECK(std::isfinite(v));
  }

  audio::Segment bad = seg;
  bad.samples.resize(audio::kSegmentSamples - 1);
  CHECK_THROWS_WITH_AS(extract_feature(bad, FeatureKind::STFT, cfg),
                       doctest::Contains("3 s at 16 kHz"),
                       std::invalid_argument);
}

TEST_CASE("dB-domain kinds pad with floored cells, coefficient kinds with zero") {
  FeatureConfig cfg;
  const auto x = noise(audio::kSegmentSamples, 29);

  // The STFT time pad goes through the dB clamp, so it sits at peak - 80.
  const auto stft = extract_feature(x, FeatureKind::STFT, cfg);
  float peak = stft.data[0];
  for (float v : stft.data) peak = std::max(peak, v);
  CHECK(stft.at(0, 47) == doctest::Approx(double(peak) - 80.0).epsilon(1e-5));

  // The mel row pad behaves the same way.
  const auto ms = extract_feature(x, FeatureKind::MS, cfg);
  float mpeak = ms.data[0];
  for (float v : ms.data) mpeak = std::max(mpeak, v);
  CHECK(ms.at(47, 0) == doctest::Approx(double(mpeak) - 80.0).epsilon(1e-5));

  // MFCC pads after the transform, so its pad column is exactly zero.
  const auto mfcc = extract_feature(x, FeatureKind::MFCC, cfg);
  for (size_t r = 0; r < mfcc.freq_bins; ++r) CHECK(mfcc.at(r, 47) == 0.0f);
}

TEST_CASE("normalization z-scores the raw region and zeroes the pad") {
  FeatureConfig cfg;
  const auto a = extract_feature(noise(audio::kSegmentSamples, 31),
                                 FeatureKind::MS, cfg);
  const auto b = extract_feature(noise(audio::kSegmentSamples, 37),
                                 FeatureKind::MS, cfg);

  const auto st = compute_stats({&a, &b});
  CHECK(st.kind == FeatureKind::MS);
  CHECK(st.count == 2u * 40u * 47u);

  // Independent mean/std over the raw cells of both features.
  double sum = 0.0, sumsq = 0.0;
  for (const auto* f : {&a, &b}) {
    for (size_t r = 0; r < 40; ++r) {
      for (size_t t = 0; t < 47; ++t) {
        sum += f->at(r, t);
        sumsq += double(f->at(r, t)) * f->at(r, t);
      }
    }
  }
  const double n = 2.0 * 40.0 * 47.0;
  const double mean = sum / n;
  const double sd = std::sqrt(sumsq / n - mean * mean);
  CHECK(st.mean == doctest::Approx(mean).epsilon(1e-9));
  CHECK(st.std_dev == doctest::Approx(sd).epsilon(1e-9));

  const auto na = normalize(a, st);
  CHECK(na.normalized);
  CHECK(na.at(0, 0) ==
        doctest::Approx((a.at(0, 0) - st.mean) / st.std_dev).epsilon(1e-6));
  for (size_t t = 0; t < 48; ++t) CHECK(na.at(45, t) == 0.0f);
  for (size_t r = 0; r < 48; ++r) CHECK(na.at(r, 47) == 0.0f);

  CHECK_THROWS_AS(compute_stats({}), std::invalid_argument);
  const auto c = extract_feature(noise(audio::kSegmentSamples, 41),
                                 FeatureKind::STFT, cfg);
  CHECK_THROWS_AS(compute_stats({&a, &c}), std::invalid_argument);
  CHECK_THROWS_WITH_AS(normalize(c, st),
                       doctest::Contains("different feature kind"),
                       std::invalid_argument);
}

TEST_CASE("feature cache files round trip exactly") {
  FeatureConfig cfg;
  auto f = extract_feature(noise(audio::kSegmentSamples, 43),
                           FeatureKind::MS, cfg);
  f.label = 2;
  const auto path = (work_dir() / "roundtrip.tff").string();
  write_feature(path, f);
  const auto g = read_feature(path);
  CHECK(g.kind == FeatureKind::MS);
  CHECK(g.freq_bins == f.freq_bins);
  CHECK(g.time_frames == f.time_frames);
  CHECK(g.raw_freq == 40);
  CHECK(g.raw_time == 47);
  CHECK(g.label == 2);
  REQUIRE(g.data.size() == f.data.size());
  for (size_t i = 0; i < f.data.size(); ++i) CHECK(g.data[i] == f.data[i]);
}

TEST_CASE("feature cache reader rejects corrupted files") {
  const auto dir = work_dir();

  auto write_bytes = [&](const char* name, const std::vector<char>& bytes) {
    const auto p = (dir / name).string();
    std::ofstream out(p, std::ios::binary);
    out.write(bytes.data(), std::streamsize(bytes.size()));
    return p;
  };
  auto u32 = [](std::vector<char>& b, uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(char(v >> (8 * i)));
  };

  CHECK_THROWS_WITH_AS(read_feature((dir / "absent.tff").string()),
                       doctest::Contains("cannot open"), std::runtime_error);

  std::vector<char> bad_magic = {'T', 'F', 'F', '2', 0};
  CHECK_THROWS_WITH_AS(read_feature(write_bytes("magic.tff", bad_magic)),
                       doctest::Contains("not a TFF1"), std::runtime_error);

  std::vector<char> bad_kind = {'T', 'F', 'F', '1', 9};
  u32(bad_kind, 2);
  u32(bad_kind, 2);
  u32(bad_kind, 0);
  CHECK_THROWS_WITH_AS(read_feature(write_bytes("kind.tff", bad_kind)),
                       doctest::Contains("bad feature kind"),
                       std::runtime_error);

  std::vector<char> huge = {'T', 'F', 'F', '1', 0};
  u32(huge, 1u << 13);
  u32(huge, 1u << 13);
  u32(huge, 0);
  CHECK_THROWS_WITH_AS(read_feature(write_bytes("huge.tff", huge)),
                       doctest::Contains("implausible feature shape"),
                       std::runtime_error);

  std::vector<char> trunc = {'T', 'F', 'F', '1', 2};
  u32(trunc, 4);
  u32(trunc, 4);
  u32(trunc, 1);
  for (int i = 0; i < 8; ++i) trunc.push_back(0);  // 2 of 16 floats
  CHECK_THROWS_WITH_AS(read_feature(write_bytes("trunc.tff", trunc)),
                       doctest::Contains("truncated"), std::runtime_error);
}

TEST_CASE("cache index round trips and validates its rows") {
  const auto dir = work_dir();
  const auto path = (dir / "index.csv").string();

  std::vector<CacheIndexRow> rows = {
      {"a_0", FeatureKind::STFT, "a_0.stft.tff", 0, "train"},
      {"a_0", FeatureKind::VQT, "a_0.vqt.tff", 0, "train"},
      {"b_1", FeatureKind::MFCC, "b_1.mfcc.tff", 3, "test"},
  };
  write_cache_index(path, rows);
  const auto back = read_cache_index(path);
  REQUIRE(back.size() == rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].segment_id == rows[i].segment_id);
    CHECK(back[i].kind == rows[i].kind);
    CHECK(back[i].path == rows[i].path);
    CHECK(back[i].label == rows[i].label);
    CHECK(back[i].partition == rows[i].partition);
  }

  auto write_text = [&](const char* name, const std::string& text) {
    const auto p = (dir / name).string();
    std::ofstream out(p);
    out << text;
    return p;
  };
  CHECK_THROWS_WITH_AS(
      read_cache_index(write_text(
          "nohdr.csv", "a_0,stft,a.tff,0,train\n")),
      doctest::Contains("missing its header"), ConfigError);
  CHECK_THROWS_WITH_AS(
      read_cache_index(write_text(
          "badlabel.csv",
          "segment_id,kind,path,label,partition\na_0,stft,a.tff,x,train\n")),
      doctest::Contains("bad label"), ConfigError);
  CHECK_THROWS_WITH_AS(
      read_cache_index(write_text(
          "badpart.csv",
          "segment_id,kind,path,label,partition\na_0,stft,a.tff,0,dev\n")),
      doctest::Contains("bad partition"), ConfigError);
}

TEST_CASE("dataset extraction fills a cache with one file per segment and kind") {
  const auto dir = work_dir() / "extract";
  fs::remove_all(dir);
  fs::create_directories(dir);

  audio::DatasetManifest man;
  for (int i = 0; i < 2; ++i) {
    const auto wav = (dir / ("rec" + std::to_string(i) + ".wav")).string();
    audio::write_wav_float32(wav, noise(6 * 16000, uint32_t(50 + i)), 16000);
    man.entries.push_back({"rec" + std::to_string(i), wav, i, 6.0});
  }

  audio::PartitionSpec part;
  part.train = {"rec0"};
  part.test = {"rec1"};

  FeatureConfig cfg;
  const std::vector<FeatureKind> kinds = {FeatureKind::STFT,
                                          FeatureKind::MFCC};
  const auto cache = (dir / "cache").string();
  const auto res = extract_dataset(man, part, kinds, cfg, cache);
  CHECK(res.n_segments == 4);  // two 6 s recordings, two 3 s segments each
  CHECK(res.n_files == 8);

  const auto rows = read_cache_index((fs::path(cache) / "index.csv").string());
  REQUIRE(rows.size() == 8);
  for (size_t i = 1; i < rows.size(); ++i) {
    const bool ordered =
        rows[i - 1].segment_id < rows[i].segment_id ||
        (rows[i - 1].segment_id == rows[i].segment_id &&
         rows[i - 1].kind < rows[i].kind);
    CHECK(ordered);
  }
  for (const auto& r : rows) {
    const auto f = read_feature((fs::path(cache) / r.path).string());
    CHECK(f.kind == r.kind);
    CHECK(f.label == r.label);
    const bool is_rec0 = r.segment_id.rfind("rec0", 0) == 0;
    CHECK(r.label == (is_rec0 ? 0 : 1));
    CHECK(r.partition == (is_rec0 ? "train" : "test"));
  }
}
