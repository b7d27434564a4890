#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sonar/audio/audio.hpp"
#include "sonar/common.hpp"

namespace sonar::features {

struct FeatureConfig {
  int sample_rate = 16000;
  double window_ms = 250.0;
  double hop_ms = 64.0;
  int n_mels = 40;
  int n_mfcc = 16;
  int stft_bins = 48;
  int gfcc_bins = 64;
  int cqt_bins = 64;
  int vqt_bins = 64;
  int pad_time = 48;
  double db_floor = -80.0;  // also the top-dB clamp range
  double cqt_fmin = 32.70;
  int bins_per_octave = 12;
  double vqt_gamma = 4.66;

  int window_samples() const {
    return static_cast<int>(window_ms * sample_rate / 1000.0 + 0.5);
  }
  int hop_samples() const {
    return static_cast<int>(hop_ms * sample_rate / 1000.0 + 0.5);
  }
};

enum class FeatureKind : uint8_t { MS = 0, MFCC = 1, STFT = 2, GFCC = 3, CQT = 4, VQT = 5 };

inline constexpr std::array<FeatureKind, 6> kAllKinds = {
    FeatureKind::MS,   FeatureKind::MFCC, FeatureKind::STFT,
    FeatureKind::GFCC, FeatureKind::CQT,  FeatureKind::VQT};

const char* kind_name(FeatureKind k);
FeatureKind kind_from_name(const std::string& name);

// F x T row-major matrix of doubles; thin helper, not a linear-algebra type.
struct Matrix {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<double> v;

  Matrix() = default;
  Matrix(size_t r, size_t c) : rows(r), cols(c), v(r * c, 0.0) {}
  double& at(size_t r, size_t c) { return v[r * cols + c]; }
  double at(size_t r, size_t c) const { return v[r * cols + c]; }
};

struct TimeFrequencyFeature {
  FeatureKind kind = FeatureKind::STFT;
  size_t freq_bins = 0;    // padded F
  size_t time_frames = 0;  // padded T
  size_t raw_freq = 0;     // rows carrying real content
  size_t raw_time = 0;     // columns carrying real content
  bool normalized = false;
  int label = -1;
  std::vector<float> data;  // row-major F x T

  float& at(size_t f, size_t t) { return data[f * time_frames + t]; }
  float at(size_t f, size_t t) const { return data[f * time_frames + t]; }
};

// Expected padded and raw shapes per kind (freq, time).
std::array<size_t, 2> padded_shape(FeatureKind k, const FeatureConfig& cfg);
std::array<size_t, 2> raw_shape(FeatureKind k, const FeatureConfig& cfg);

// ---- stage functions (used by the extractors and directly testable) --------

// Windowed frames via reflect-centered framing: frame k covers input samples
// [k*hop - window/2, k*hop + window/2) with a periodic Hann window applied.
// Frame count for 48000 samples at hop 1024 is floor(48000/1024)+1 = 47.
std::vector<std::vector<double>> frame_signal(const std::vector<double>& x,
                                              const FeatureConfig& cfg);

size_t frame_count(size_t n_samples, const FeatureConfig& cfg);

// One-sided magnitude spectrum per frame: (window/2+1) x T.
Matrix magnitude_spectrogram(const std::vector<double>& x,
                             const FeatureConfig& cfg);

// Reduce a one-sided spectrum to `bands` rows by averaging bands centered on
// multiples of Nyquist/bands (edges at half-multiples, ends absorb remainder).
Matrix band_reduce(const Matrix& mag, int bands);

// Triangular HTK-mel filterbank, n_mels x n_fft_bins weights.
Matrix mel_filterbank(const FeatureConfig& cfg, int n_fft_bins);
std::vector<double> mel_center_freqs(const FeatureConfig& cfg);

// In-place amplitude -> dB: 20*log10(max(|x|, 10^(db_floor/20))), then clamp
// every entry to at least (max - |db_floor|).
void amplitude_to_db(Matrix& m, double db_floor);

// Orthonormal DCT-II of x, keeping the first `keep` coefficients.
std::vector<double> dct2(const std::vector<double>& x, size_t keep);
std::vector<double> idct2(const std::vector<double>& coeffs, size_t n);

// Gammatone filterbank: ERB-rate-spaced 4th-order filters on [50, 8000] Hz.
std::vector<double> gammatone_center_freqs(int n_channels, double fmin,
                                           double fmax);
// Impulse responses, one per channel, each `ir_len` samples, unit gain at fc.
std::vector<std::vector<double>> gammatone_filterbank(
    const std::vector<double>& center_freqs, int sample_rate, int ir_len);
// Per-frame channel energies (channels x T) of the filtered signal.
Matrix gammatone_energies(const std::vector<double>& x,
                          const FeatureConfig& cfg);

// Constant-Q / variable-Q magnitudes (bins x T); gamma = 0 gives plain CQT.
Matrix cq_magnitudes(const std::vector<double>& x, const FeatureConfig& cfg,
                     double gamma);
std::vector<double> cq_center_freqs(const FeatureConfig& cfg);

// ---- extractors -------------------------------------------------------------

TimeFrequencyFeature extract_feature(const std::vector<double>& samples,
                                     FeatureKind kind, const FeatureConfig& cfg);
TimeFrequencyFeature extract_feature(const audio::Segment& seg,
                                     FeatureKind kind, const FeatureConfig& cfg);

// ---- normalization ----------------------------------------------------------

struct FeatureStats {
  FeatureKind kind = FeatureKind::STFT;
  double mean = 0.0;
  double std_dev = 1.0;
  size_t count = 0;
};

// Global mean/std over the raw (unpadded) region of every feature given.
FeatureStats compute_stats(const std::vector<const TimeFrequencyFeature*>& fs);

// z-score the raw region with train stats; padded cells become exactly 0.
TimeFrequencyFeature normalize(const TimeFrequencyFeature& f,
                               const FeatureStats& stats);

// ---- cache ------------------------------------------------------------------

// Little-endian binary: "TFF1", u8 kind, u32 F, u32 T, u32 label, then
// F*T float32 row-major.
void write_feature(const std::string& path, const TimeFrequencyFeature& f);
TimeFrequencyFeature read_feature(const std::string& path);

struct CacheIndexRow {
  std::string segment_id;
  FeatureKind kind;
  std::string path;
  int label;
  std::string partition;  // train | val | test
};

void write_cache_index(const std::string& path,
                       const std::vector<CacheIndexRow>& rows);
std::vector<CacheIndexRow> read_cache_index(const std::string& path);

// Decode + resample + segment every manifest entry, extract the requested
// kinds, and fill a cache directory plus its index.csv.
struct ExtractResult {
  size_t n_segments = 0;
  size_t n_files = 0;
};
ExtractResult extract_dataset(const audio::DatasetManifest& manifest,
                              const audio::PartitionSpec& partition,
                              const std::vector<FeatureKind>& kinds,
                              const FeatureConfig& cfg,
                              const std::string& cache_dir);

}  // namespace sonar::features
