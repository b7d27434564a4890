#include "sonar/audio/audio.hpp"

namespace sonar::audio {

std::vector<Segment> segment_signal(const AudioSignal& sig,
                                    double duration_s) {
  if (sig.sample_rate <= 0) {
    throw std::runtime_error("segment_signal: signal has no sample rate");
  }
  const size_t seg_len =
      static_cast<size_t>(duration_s * sig.sample_rate + 0.5);
  if (seg_len == 0) {
    throw std::runtime_error("segment_signal: duration too short");
  }
  std::vector<Segment> out;
  const size_t n = sig.samples.size() / seg_len;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    Segment s;
    s.record_id = sig.record_id;
    s.index = i;
    s.label = sig.label;
    s.samples.assign(sig.samples.begin() + i * seg_len,
                     sig.samples.begin() + (i + 1) * seg_len);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace sonar::audio
