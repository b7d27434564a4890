#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "sonar/audio/audio.hpp"

namespace sonar::audio {

namespace {

struct ByteReader {
  std::vector<uint8_t> bytes;
  size_t pos = 0;
  std::string path;

  void need(size_t n, const char* what) const {
    if (pos + n > bytes.size()) {
      throw std::runtime_error("truncated WAV file (" + std::string(what) +
                               "): " + path);
    }
  }
  uint32_t u32(const char* what) {
    need(4, what);
    uint32_t v = static_cast<uint32_t>(bytes[pos]) |
                 static_cast<uint32_t>(bytes[pos + 1]) << 8 |
                 static_cast<uint32_t>(bytes[pos + 2]) << 16 |
                 static_cast<uint32_t>(bytes[pos + 3]) << 24;
    pos += 4;
    return v;
  }
  uint16_t u16(const char* what) {
    need(2, what);
    uint16_t v = static_cast<uint16_t>(bytes[pos] | bytes[pos + 1] << 8);
    pos += 2;
    return v;
  }
  void tag(char out[4], const char* what) {
    need(4, what);
    std::memcpy(out, bytes.data() + pos, 4);
    pos += 4;
  }
};

double decode_sample(const uint8_t* p, uint16_t bits, uint16_t fmt) {
  if (fmt == 3) {  // IEEE float
    float f;
    std::memcpy(&f, p, 4);
    return static_cast<double>(f);
  }
  switch (bits) {
    case 16: {
      int16_t v = static_cast<int16_t>(p[0] | p[1] << 8);
      return v / 32768.0;
    }
    case 24: {
      int32_t v = p[0] | p[1] << 8 | p[2] << 16;
      if (v & 0x800000) v |= ~0xFFFFFF;
      return v / 8388608.0;
    }
    case 32: {
      int32_t v;
      std::memcpy(&v, p, 4);
      return v / 2147483648.0;
    }
    default:
      throw std::runtime_error("unreachable");
  }
}

}  // namespace

AudioSignal decode_wav(const std::string& path, const std::string& record_id,
                       int label) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open WAV file: " + path);
  ByteReader r;
  r.path = path;
  r.bytes.assign(std::istreambuf_iterator<char>(in),
                 std::istreambuf_iterator<char>());

  char id[4];
  r.tag(id, "RIFF tag");
  if (std::memcmp(id, "RIFF", 4) != 0) {
    throw std::runtime_error("not a RIFF/WAVE file: " + path);
  }
  r.u32("RIFF size");
  r.tag(id, "WAVE tag");
  if (std::memcmp(id, "WAVE", 4) != 0) {
    throw std::runtime_error("not a RIFF/WAVE file: " + path);
  }

  uint16_t fmt = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  bool have_fmt = false;
  const uint8_t* data = nullptr;
  size_t data_len = 0;

  while (r.pos + 8 <= r.bytes.size()) {
    r.tag(id, "chunk id");
    uint32_t size = r.u32("chunk size");
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (size < 16) throw std::runtime_error("malformed fmt chunk: " + path);
      size_t start = r.pos;
      fmt = r.u16("format");
      channels = r.u16("channels");
      rate = r.u32("rate");
      r.u32("byte rate");
      r.u16("block align");
      bits = r.u16("bits");
      if (fmt == 0xFFFE) {  // WAVE_FORMAT_EXTENSIBLE
        if (size < 40) {
          throw std::runtime_error("malformed extensible fmt chunk: " + path);
        }
        r.u16("cbSize");
        r.u16("valid bits");
        r.u32("channel mask");
        fmt = r.u16("subformat");  // first two GUID bytes carry the code
      }
      r.pos = start + size;
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      r.need(size, "data chunk");
      data = r.bytes.data() + r.pos;
      data_len = size;
      r.pos += size;
    } else {
      r.need(size, "chunk body");
      r.pos += size + (size & 1);
    }
  }

  if (!have_fmt || data == nullptr) {
    throw std::runtime_error("WAV file missing fmt or data chunk: " + path);
  }
  if (channels == 0 || rate == 0) {
    throw std::runtime_error("WAV file with zero channels or rate: " + path);
  }
  const bool int_pcm = fmt == 1 && (bits == 16 || bits == 24 || bits == 32);
  const bool float_pcm = fmt == 3 && bits == 32;
  if (!int_pcm && !float_pcm) {
    throw std::runtime_error(
        "unsupported WAV encoding (format " + std::to_string(fmt) + ", " +
        std::to_string(bits) + "-bit) in " + path +
        "; expected 16/24/32-bit integer PCM or 32-bit float");
  }

  const size_t bytes_per = bits / 8;
  const size_t frame_bytes = bytes_per * channels;
  const size_t frames = data_len / frame_bytes;
  if (frames == 0) throw std::runtime_error("WAV file has no samples: " + path);

  AudioSignal sig;
  sig.record_id = record_id;
  sig.label = label;
  sig.sample_rate = static_cast<int>(rate);
  sig.samples.resize(frames);
  for (size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    const uint8_t* p = data + i * frame_bytes;
    for (uint16_t c = 0; c < channels; ++c) {
      acc += decode_sample(p + c * bytes_per, bits, fmt);
    }
    sig.samples[i] = acc / channels;
  }
  return sig;
}

AudioSignal decode_wav(const std::string& path) {
  return decode_wav(path, path, -1);
}

namespace {

void put_u32(std::ofstream& out, uint32_t v) {
  char b[4] = {char(v), char(v >> 8), char(v >> 16), char(v >> 24)};
  out.write(b, 4);
}
void put_u16(std::ofstream& out, uint16_t v) {
  char b[2] = {char(v), char(v >> 8)};
  out.write(b, 2);
}

void write_wav(const std::string& path, const std::vector<double>& x,
               int sample_rate, bool as_float) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot create WAV file: " + path);
  const uint16_t bits = as_float ? 32 : 16;
  const uint32_t data_bytes = static_cast<uint32_t>(x.size() * bits / 8);
  const uint32_t fact_bytes = as_float ? 12 : 0;
  out.write("RIFF", 4);
  put_u32(out, 4 + 24 + fact_bytes + 8 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put_u32(out, 16);
  put_u16(out, as_float ? 3 : 1);
  put_u16(out, 1);
  put_u32(out, static_cast<uint32_t>(sample_rate));
  put_u32(out, static_cast<uint32_t>(sample_rate * bits / 8));
  put_u16(out, static_cast<uint16_t>(bits / 8));
  put_u16(out, bits);
  if (as_float) {
    out.write("fact", 4);
    put_u32(out, 4);
    put_u32(out, static_cast<uint32_t>(x.size()));
  }
  out.write("data", 4);
  put_u32(out, data_bytes);
  if (as_float) {
    for (double v : x) {
      float f = static_cast<float>(v);
      char b[4];
      std::memcpy(b, &f, 4);
      out.write(b, 4);
    }
  } else {
    for (double v : x) {
      double c = v < -1.0 ? -1.0 : (v > 1.0 ? 1.0 : v);
      int32_t q = static_cast<int32_t>(std::lrint(c * 32767.0));
      put_u16(out, static_cast<uint16_t>(q));
    }
  }
  if (!out) throw std::runtime_error("failed writing WAV file: " + path);
}

}  // namespace

void write_wav_float32(const std::string& path, const std::vector<double>& x,
                       int sample_rate) {
  write_wav(path, x, sample_rate, true);
}

void write_wav_pcm16(const std::string& path, const std::vector<double>& x,
                     int sample_rate) {
  write_wav(path, x, sample_rate, false);
}

}  // namespace sonar::audio
