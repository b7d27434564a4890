#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "sonar/common.hpp"

namespace sonar::audio {

inline constexpr int kTargetRate = 16000;
inline constexpr double kSegmentSeconds = 3.0;
inline constexpr size_t kSegmentSamples = 48000;
inline constexpr int kNumClasses = 4;

inline const std::array<std::string, 4> kClassNames = {
    "cargo", "passengership", "tanker", "tug"};

struct AudioSignal {
  std::string record_id;
  std::vector<double> samples;  // nominal range [-1, 1]
  int sample_rate = 0;
  int label = -1;

  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

struct Segment {
  std::string record_id;
  size_t index = 0;
  std::vector<double> samples;  // exactly kSegmentSamples
  int label = -1;

  std::string segment_id() const {
    return record_id + "_" + std::to_string(index);
  }
};

struct ManifestEntry {
  std::string record_id;
  std::string path;
  int label = -1;
  double duration_s = 0.0;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::array<std::string, 4> class_names = kClassNames;
};

struct PartitionSpec {
  uint32_t seed = 0;
  std::set<std::string> train;
  std::set<std::string> val;
  std::set<std::string> test;

  enum class Split { Train, Val, Test };
  Split split_of(const std::string& record_id) const;
};

const char* split_name(PartitionSpec::Split s);

// WAV decoding. Accepts PCM 16/24/32-bit integer and 32-bit float, mono or
// multichannel (averaged to mono). Anything else fails with a message.
AudioSignal decode_wav(const std::string& path);
AudioSignal decode_wav(const std::string& path, const std::string& record_id,
                       int label);

// Mono writers used by the synthesizer and tests.
void write_wav_float32(const std::string& path, const std::vector<double>& x,
                       int sample_rate);
void write_wav_pcm16(const std::string& path, const std::vector<double>& x,
                     int sample_rate);

// Band-limited rational resampling (windowed-sinc polyphase). Identity when
// the rates already match.
std::vector<double> resample(const std::vector<double>& x, int from_rate,
                             int to_rate);
AudioSignal resample(const AudioSignal& in, int target_rate);

// Consecutive non-overlapping 3 s windows; the trailing remainder is dropped.
std::vector<Segment> segment_signal(const AudioSignal& sig,
                                    double duration_s = kSegmentSeconds);

DatasetManifest read_manifest(const std::string& path);
void write_manifest(const std::string& path, const DatasetManifest& m);

// Joins relative entry paths onto base_dir so a manifest read from disk can
// be decoded from any working directory. Absolute paths pass through.
void resolve_paths(DatasetManifest& m, const std::string& base_dir);

// Signal-level stratified split. Per class: train = ceil(r0*n),
// val = floor(r1*n), test = remainder, after a seeded shuffle of the sorted
// record ids. This reproduces 428/90/91 on the 609-recording corpus.
PartitionSpec partition(const DatasetManifest& manifest,
                        const std::array<double, 3>& ratios, uint32_t seed);

PartitionSpec read_partition(const std::string& path);
void write_partition(const std::string& path, const PartitionSpec& spec);

}  // namespace sonar::audio
