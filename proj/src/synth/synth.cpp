#include "sonar/synth/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>

#include "json.hpp"
#include "sonar/common.hpp"
#include "sonar/features/fft.hpp"

namespace sonar::synth {

namespace fs = std::filesystem;

namespace {

constexpr double kTargetRms = 0.1;

// Shared shaping filter for the two broadband classes.
constexpr double kShapeTaps[5] = {1.0, 0.35, 0.2, 0.1, 0.05};

// Gain-block length for the broadband classes, matching one 3 s analysis
// segment at 16 kHz. A segment then sits at a single gain, so pooling along
// time inside a clip never sees level motion and only the across-segment
// level distribution carries class information.
constexpr size_t kScaleBlock = 48000;

// Block level laws in dB, matched in mean (0) and variance (4 dB^2). Class C
// is two-point at +-2 dB; class D is uniform on +-2*sqrt(3) dB. A monotone
// level readout sees matched moments, while a binned readout sees C's mass
// piled on two narrow spots against D's flat spread.
constexpr double kLevelDbC = 2.0;
constexpr double kLevelDbHalfWidthD = 3.4641016151377544;

double block_level_db(Rng& rng, bool heavy_tailed) {
  if (heavy_tailed) {
    return kLevelDbHalfWidthD * (2.0 * rand_unit(rng) - 1.0);
  }
  return rand_unit(rng) < 0.5 ? -kLevelDbC : kLevelDbC;
}

Rng signal_rng(uint32_t seed, int cls, int idx) {
  std::seed_seq seq{seed, uint32_t(cls), uint32_t(idx)};
  return Rng(seq);
}

// Economy three-pole pink noise filter (Kellet).
struct PinkFilter {
  double b0 = 0, b1 = 0, b2 = 0;
  double step(double white) {
    b0 = 0.99765 * b0 + white * 0.0990460;
    b1 = 0.96300 * b1 + white * 0.2965164;
    b2 = 0.57000 * b2 + white * 1.0526913;
    return b0 + b1 + b2 + white * 0.1848;
  }
};

void normalize_rms(std::vector<double>& x) {
  double sq = 0;
  for (double v : x) sq += v * v;
  double rms = std::sqrt(sq / double(x.size()));
  if (rms <= 0) throw ConfigError("synth: produced an all-zero signal");
  double g = kTargetRms / rms;
  for (double& v : x) v *= g;
}

std::vector<double> tonal_signal(Rng& rng, size_t n, double f0, int rate) {
  std::vector<double> x(n, 0.0);
  constexpr int kHarmonics = 4;
  for (int k = 1; k <= kHarmonics; ++k) {
    double amp = 1.0 / k;
    double phase = rand_unit(rng) * 2.0 * std::numbers::pi;
    double w = 2.0 * std::numbers::pi * f0 * k / rate;
    for (size_t i = 0; i < n; ++i) x[i] += amp * std::sin(w * double(i) + phase);
  }
  // Tone power ~ 0.711; pink filter output variance for unit white input is
  // close to 1, so this gain lands near equal tone and noise power.
  PinkFilter pink;
  for (size_t i = 0; i < n; ++i) x[i] += 0.85 * pink.step(rand_normal(rng));
  normalize_rms(x);
  return x;
}

std::vector<double> broadband_signal(Rng& rng, size_t n, bool heavy_tailed) {
  // Both broadband classes hold a constant gain across each block and draw
  // block levels from laws with matched mean and variance, so mean and
  // spread readouts of segment level see nothing; the classes differ in the
  // shape of the level distribution. Inside a block, class D samples are
  // Laplacian where class C is Gaussian, which separates the raw sample
  // kurtosis at identical spectra.
  const double db_to_log_power = std::numbers::ln10 / 10.0;
  const double b = 1.0 / std::sqrt(2.0);  // unit-variance Laplacian
  std::vector<double> white(n);
  double amp = 1.0;
  for (size_t i = 0; i < n; ++i) {
    if (i % kScaleBlock == 0) {
      amp = std::exp(0.5 * db_to_log_power * block_level_db(rng, heavy_tailed));
    }
    white[i] = amp * (heavy_tailed ? rand_laplace(rng, b) : rand_normal(rng));
  }
  std::vector<double> x(n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    double acc = 0;
    for (size_t k = 0; k < std::size(kShapeTaps); ++k)
      if (i >= k) acc += kShapeTaps[k] * white[i - k];
    x[i] = acc;
  }
  normalize_rms(x);
  return x;
}

std::vector<double> make_signal(const SynthSpec& spec, int cls, int idx) {
  Rng rng = signal_rng(spec.seed, cls, idx);
  size_t n = size_t(std::llround(spec.signal_duration_s * audio::kTargetRate));
  switch (cls) {
    case 0: return tonal_signal(rng, n, 400.0, audio::kTargetRate);
    case 1: return tonal_signal(rng, n, 900.0, audio::kTargetRate);
    case 2: return broadband_signal(rng, n, false);
    case 3: return broadband_signal(rng, n, true);
    default: throw ConfigError("synth: unknown class recipe");
  }
}

double spectral_centroid(const std::vector<double>& psd, int rate, int nfft) {
  double num = 0, den = 0;
  for (size_t i = 0; i < psd.size(); ++i) {
    double f = double(rate) * double(i) / double(nfft);
    num += f * psd[i];
    den += psd[i];
  }
  return den > 0 ? num / den : 0.0;
}

// Accuracy of a midpoint threshold between the two group means; takes the
// better polarity so the caller need not know which side is larger.
double threshold_accuracy(const std::vector<double>& a,
                          const std::vector<double>& b) {
  double ma = 0, mb = 0;
  for (double v : a) ma += v;
  for (double v : b) mb += v;
  ma /= double(a.size());
  mb /= double(b.size());
  double thr = 0.5 * (ma + mb);
  size_t hit = 0;
  for (double v : a) hit += v < thr;
  for (double v : b) hit += v >= thr;
  double acc = double(hit) / double(a.size() + b.size());
  return std::max(acc, 1.0 - acc);
}

}  // namespace

double excess_kurtosis(const std::vector<double>& x) {
  if (x.size() < 2) throw ConfigError("kurtosis needs at least 2 samples");
  double mean = 0;
  for (double v : x) mean += v;
  mean /= double(x.size());
  double m2 = 0, m4 = 0;
  for (double v : x) {
    double d = v - mean;
    double d2 = d * d;
    m2 += d2;
    m4 += d2 * d2;
  }
  m2 /= double(x.size());
  m4 /= double(x.size());
  if (m2 <= 0) return 0.0;
  return m4 / (m2 * m2) - 3.0;
}

std::vector<double> welch_psd(const std::vector<double>& x, int nfft, int hop) {
  if (nfft <= 0 || hop <= 0) throw ConfigError("welch: bad window parameters");
  if (x.size() < size_t(nfft)) throw ConfigError("welch: signal shorter than window");
  std::vector<double> window(nfft);
  for (int i = 0; i < nfft; ++i)
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / nfft);
  features::RealFft fft(nfft);
  std::vector<double> frame(nfft);
  std::vector<double> psd(size_t(nfft) / 2 + 1, 0.0);
  size_t count = 0;
  for (size_t start = 0; start + size_t(nfft) <= x.size(); start += size_t(hop)) {
    for (int i = 0; i < nfft; ++i) frame[i] = x[start + i] * window[i];
    auto spec = fft.forward(frame);
    for (size_t i = 0; i < psd.size(); ++i) psd[i] += std::norm(spec[i]);
    ++count;
  }
  for (double& v : psd) v /= double(count);
  return psd;
}

audio::DatasetManifest generate(const SynthSpec& spec,
                                const std::string& out_dir) {
  if (spec.n_signals_per_class < 1)
    throw ConfigError("synth: n_signals_per_class must be positive");
  if (spec.signal_duration_s <= 0)
    throw ConfigError("synth: signal_duration_s must be positive");

  fs::create_directories(fs::path(out_dir) / "wav");
  audio::DatasetManifest manifest;
  char name[64];
  for (int cls = 0; cls < audio::kNumClasses; ++cls) {
    for (int idx = 0; idx < spec.n_signals_per_class; ++idx) {
      std::vector<double> x = make_signal(spec, cls, idx);
      std::snprintf(name, sizeof name, "%s_%03d",
                    audio::kClassNames[size_t(cls)].c_str(), idx);
      fs::path rel = fs::path("wav") / (std::string(name) + ".wav");
      audio::write_wav_float32((fs::path(out_dir) / rel).string(), x,
                               audio::kTargetRate);
      audio::ManifestEntry e;
      e.record_id = name;
      e.path = rel.string();
      e.label = cls;
      e.duration_s = double(x.size()) / audio::kTargetRate;
      manifest.entries.push_back(std::move(e));
    }
  }
  audio::write_manifest((fs::path(out_dir) / "manifest.csv").string(), manifest);
  // The CSV keeps relative paths; the returned copy is directly decodable.
  audio::resolve_paths(manifest, out_dir);
  return manifest;
}

SanityReport sanity_probe(const audio::DatasetManifest& manifest) {
  constexpr int kNfft = 4096, kHop = 2048;
  const size_t n_bins = kNfft / 2 + 1;

  // Per-segment centroid and kurtosis, grouped by class; class-mean Welch
  // PSDs for the two broadband recipes.
  std::vector<std::vector<double>> centroids(audio::kNumClasses);
  std::vector<std::vector<double>> kurtoses(audio::kNumClasses);
  std::vector<double> psd_c(n_bins, 0.0), psd_d(n_bins, 0.0);
  size_t count_c = 0, count_d = 0;

  for (const auto& e : manifest.entries) {
    audio::AudioSignal sig = audio::decode_wav(e.path);
    auto segments = audio::segment_signal(sig, 3.0);
    for (const auto& seg : segments) {
      auto psd = welch_psd(seg.samples, kNfft, kHop);
      centroids[size_t(e.label)].push_back(
          spectral_centroid(psd, sig.sample_rate, kNfft));
      kurtoses[size_t(e.label)].push_back(excess_kurtosis(seg.samples));
      if (e.label == 2) {
        for (size_t i = 0; i < n_bins; ++i) psd_c[i] += psd[i];
        ++count_c;
      } else if (e.label == 3) {
        for (size_t i = 0; i < n_bins; ++i) psd_d[i] += psd[i];
        ++count_d;
      }
    }
  }
  if (count_c == 0 || count_d == 0)
    throw ConfigError("sanity probe: corpus is missing a broadband class");

  SanityReport rep;
  for (size_t i = 0; i < n_bins; ++i) {
    double gap = std::fabs(10.0 * std::log10((psd_c[i] / double(count_c)) /
                                             (psd_d[i] / double(count_d))));
    rep.max_band_gap_db = std::max(rep.max_band_gap_db, gap);
  }

  auto mean_of = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / double(v.size());
  };
  rep.kurtosis_gap = mean_of(kurtoses[3]) - mean_of(kurtoses[2]);

  std::vector<double> tonal, broadband;
  for (int c : {0, 1})
    tonal.insert(tonal.end(), centroids[size_t(c)].begin(), centroids[size_t(c)].end());
  for (int c : {2, 3})
    broadband.insert(broadband.end(), centroids[size_t(c)].begin(),
                     centroids[size_t(c)].end());
  rep.group_accuracy = threshold_accuracy(tonal, broadband);
  rep.centroid_cd_accuracy = threshold_accuracy(centroids[2], centroids[3]);
  rep.kurtosis_cd_accuracy = threshold_accuracy(kurtoses[2], kurtoses[3]);

  rep.spectra_match = rep.max_band_gap_db < 1.0;
  rep.statistics_differ = rep.kurtosis_gap > 1.5;
  rep.group_separable = rep.group_accuracy >= 0.9;
  rep.centroid_blind = rep.centroid_cd_accuracy <= 0.6;
  rep.kurtosis_separates = rep.kurtosis_cd_accuracy >= 0.9;
  return rep;
}

std::string SanityReport::to_json() const {
  nlohmann::ordered_json j;
  j["max_band_gap_db"] = max_band_gap_db;
  j["kurtosis_gap"] = kurtosis_gap;
  j["group_accuracy"] = group_accuracy;
  j["centroid_cd_accuracy"] = centroid_cd_accuracy;
  j["kurtosis_cd_accuracy"] = kurtosis_cd_accuracy;
  j["spectra_match"] = spectra_match;
  j["statistics_differ"] = statistics_differ;
  j["group_separable"] = group_separable;
  j["centroid_blind"] = centroid_blind;
  j["kurtosis_separates"] = kurtosis_separates;
  j["pass"] = pass();
  return j.dump(2) + "\n";
}

}  // namespace sonar::synth
