#pragma once

#include <string>
#include <vector>

#include "sonar/audio/audio.hpp"

namespace sonar::synth {

// Four recipes mapped onto the class list: two tonal classes that differ in
// fundamental frequency, and two broadband classes that share one shaping
// filter and differ only in amplitude statistics (Gaussian vs Laplacian).
struct SynthSpec {
  int n_signals_per_class = 40;
  double signal_duration_s = 30.0;
  uint32_t seed = 1234;
};

audio::DatasetManifest generate(const SynthSpec& spec,
                                const std::string& out_dir);

struct SanityReport {
  double max_band_gap_db = 0.0;       // worst Welch-band PSD gap, C vs D
  double kurtosis_gap = 0.0;          // mean excess kurtosis, D minus C
  double group_accuracy = 0.0;        // centroid threshold, tonal vs broadband
  double centroid_cd_accuracy = 0.0;  // centroid threshold on C vs D alone
  double kurtosis_cd_accuracy = 0.0;  // kurtosis threshold on C vs D alone

  bool spectra_match = false;       // gap < 1 dB in every band
  bool statistics_differ = false;   // kurtosis gap > 1.5
  bool group_separable = false;     // {A,B} vs {C,D} >= 90%
  bool centroid_blind = false;      // C vs D <= 60% from spectra alone
  bool kurtosis_separates = false;  // C vs D >= 90% from kurtosis

  bool pass() const {
    return spectra_match && statistics_differ && group_separable &&
           centroid_blind && kurtosis_separates;
  }
  std::string to_json() const;
};

// Reads the corpus back from disk and checks that the spectral-match /
// statistics-differ construction actually holds.
SanityReport sanity_probe(const audio::DatasetManifest& manifest);

// Per-signal helpers, exposed for tests.
double excess_kurtosis(const std::vector<double>& x);
std::vector<double> welch_psd(const std::vector<double>& x, int nfft, int hop);

}  // namespace sonar::synth
