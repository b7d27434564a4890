#include <algorithm>
#include <filesystem>

#include "sonar/features/features.hpp"

namespace sonar::features {

namespace {

// Place an unpadded raw matrix into the padded float32 feature canvas.
TimeFrequencyFeature assemble(FeatureKind kind, const Matrix& raw,
                              const FeatureConfig& cfg) {
  const auto shape = padded_shape(kind, cfg);
  if (raw.rows > shape[0] || raw.cols > shape[1]) {
    throw std::runtime_error("feature exceeds its padded shape");
  }
  TimeFrequencyFeature f;
  f.kind = kind;
  f.freq_bins = shape[0];
  f.time_frames = shape[1];
  f.raw_freq = raw.rows;
  f.raw_time = raw.cols;
  f.data.assign(shape[0] * shape[1], 0.0f);
  for (size_t r = 0; r < raw.rows; ++r) {
    for (size_t c = 0; c < raw.cols; ++c) {
      f.at(r, c) = static_cast<float>(raw.at(r, c));
    }
  }
  return f;
}

// Grow an amplitude matrix to the padded shape before dB conversion, so the
// padded cells pass through the same floor/clamp as silent real cells.
Matrix pad_amplitude(const Matrix& m, const std::array<size_t, 2>& shape) {
  Matrix out(shape[0], shape[1]);
  for (size_t r = 0; r < m.rows; ++r) {
    for (size_t c = 0; c < m.cols; ++c) out.at(r, c) = m.at(r, c);
  }
  return out;
}

Matrix mel_amplitudes(const std::vector<double>& samples,
                      const FeatureConfig& cfg) {
  const Matrix mag = magnitude_spectrogram(samples, cfg);
  const Matrix fb = mel_filterbank(cfg, static_cast<int>(mag.rows));
  Matrix mel(static_cast<size_t>(cfg.n_mels), mag.cols);
  for (size_t j = 0; j < mel.rows; ++j) {
    for (size_t t = 0; t < mag.cols; ++t) {
      double acc = 0.0;
      for (size_t b = 0; b < mag.rows; ++b) {
        acc += fb.at(j, b) * mag.at(b, t) * mag.at(b, t);
      }
      mel.at(j, t) = std::sqrt(acc);
    }
  }
  return mel;
}

Matrix dct_columns(const Matrix& m, size_t keep) {
  Matrix out(keep, m.cols);
  std::vector<double> col(m.rows);
  for (size_t t = 0; t < m.cols; ++t) {
    for (size_t r = 0; r < m.rows; ++r) col[r] = m.at(r, t);
    const auto coeffs = dct2(col, keep);
    for (size_t k = 0; k < keep; ++k) out.at(k, t) = coeffs[k];
  }
  return out;
}

}  // namespace

TimeFrequencyFeature extract_feature(const std::vector<double>& samples,
                                     FeatureKind kind,
                                     const FeatureConfig& cfg) {
  switch (kind) {
    case FeatureKind::STFT: {
      Matrix banded = band_reduce(magnitude_spectrogram(samples, cfg),
                                  cfg.stft_bins);
      Matrix padded = pad_amplitude(banded, padded_shape(kind, cfg));
      amplitude_to_db(padded, cfg.db_floor);
      auto f = assemble(kind, padded, cfg);
      f.raw_freq = banded.rows;
      f.raw_time = banded.cols;
      return f;
    }
    case FeatureKind::MS: {
      Matrix mel = mel_amplitudes(samples, cfg);
      Matrix padded = pad_amplitude(mel, padded_shape(kind, cfg));
      amplitude_to_db(padded, cfg.db_floor);
      auto f = assemble(kind, padded, cfg);
      f.raw_freq = mel.rows;
      f.raw_time = mel.cols;
      return f;
    }
    case FeatureKind::MFCC: {
      Matrix mel = mel_amplitudes(samples, cfg);
      amplitude_to_db(mel, cfg.db_floor);
      return assemble(kind, dct_columns(mel, cfg.n_mfcc), cfg);
    }
    case FeatureKind::GFCC: {
      Matrix e = gammatone_energies(samples, cfg);
      for (double& v : e.v) v = std::sqrt(v);
      amplitude_to_db(e, cfg.db_floor);
      return assemble(kind, dct_columns(e, e.rows), cfg);
    }
    case FeatureKind::CQT:
    case FeatureKind::VQT: {
      const double gamma = kind == FeatureKind::CQT ? 0.0 : cfg.vqt_gamma;
      Matrix mag = cq_magnitudes(samples, cfg, gamma);
      Matrix padded = pad_amplitude(mag, padded_shape(kind, cfg));
      amplitude_to_db(padded, cfg.db_floor);
      auto f = assemble(kind, padded, cfg);
      f.raw_freq = mag.rows;
      f.raw_time = mag.cols;
      return f;
    }
  }
  throw std::logic_error("unhandled feature kind");
}

TimeFrequencyFeature extract_feature(const audio::Segment& seg,
                                     FeatureKind kind,
                                     const FeatureConfig& cfg) {
  if (seg.samples.size() != audio::kSegmentSamples) {
    throw std::invalid_argument("extract_feature: segment must be 3 s at 16 kHz");
  }
  auto f = extract_feature(seg.samples, kind, cfg);
  f.label = seg.label;
  return f;
}

ExtractResult extract_dataset(const audio::DatasetManifest& manifest,
                              const audio::PartitionSpec& partition,
                              const std::vector<FeatureKind>& kinds,
                              const FeatureConfig& cfg,
                              const std::string& cache_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(cache_dir);
  std::vector<CacheIndexRow> rows;
  ExtractResult result;
  for (const auto& entry : manifest.entries) {
    auto sig = audio::decode_wav(entry.path, entry.record_id, entry.label);
    sig = audio::resample(sig, audio::kTargetRate);
    const auto segments = audio::segment_signal(sig);
    const char* part = audio::split_name(partition.split_of(entry.record_id));
    for (const auto& seg : segments) {
      ++result.n_segments;
      for (FeatureKind kind : kinds) {
        auto f = extract_feature(seg, kind, cfg);
        const std::string rel = seg.segment_id() + "." + kind_name(kind) + ".tff";
        write_feature((fs::path(cache_dir) / rel).string(), f);
        rows.push_back({seg.segment_id(), kind, rel, seg.label, part});
        ++result.n_files;
      }
    }
  }
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    if (a.segment_id != b.segment_id) return a.segment_id < b.segment_id;
    return a.kind < b.kind;
  });
  write_cache_index((fs::path(cache_dir) / "index.csv").string(), rows);
  return result;
}

}  // namespace sonar::features
