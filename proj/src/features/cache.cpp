#include <cstring>
#include <fstream>

#include "sonar/csv.hpp"
#include "sonar/features/features.hpp"

namespace sonar::features {

namespace {
void put_u32(std::ofstream& out, uint32_t v) {
  char b[4] = {char(v), char(v >> 8), char(v >> 16), char(v >> 24)};
  out.write(b, 4);
}
uint32_t get_u32(std::ifstream& in, const std::string& path) {
  uint8_t b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) {
    throw std::runtime_error("truncated feature cache file: " + path);
  }
  return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
         static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
}
}  // namespace

void write_feature(const std::string& path, const TimeFrequencyFeature& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot create feature cache file: " + path);
  out.write("TFF1", 4);
  out.put(static_cast<char>(f.kind));
  put_u32(out, static_cast<uint32_t>(f.freq_bins));
  put_u32(out, static_cast<uint32_t>(f.time_frames));
  put_u32(out, static_cast<uint32_t>(f.label));
  static_assert(sizeof(float) == 4);
  out.write(reinterpret_cast<const char*>(f.data.data()),
            static_cast<std::streamsize>(f.data.size() * 4));
  if (!out) throw std::runtime_error("failed writing feature cache file: " + path);
}

TimeFrequencyFeature read_feature(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open feature cache file: " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "TFF1", 4) != 0) {
    throw std::runtime_error("not a TFF1 feature cache file: " + path);
  }
  const int kind_byte = in.get();
  if (kind_byte < 0 || kind_byte > 5) {
    throw std::runtime_error("bad feature kind in cache file: " + path);
  }
  TimeFrequencyFeature f;
  f.kind = static_cast<FeatureKind>(kind_byte);
  f.freq_bins = get_u32(in, path);
  f.time_frames = get_u32(in, path);
  f.label = static_cast<int>(get_u32(in, path));
  if (f.freq_bins == 0 || f.time_frames == 0 ||
      f.freq_bins * f.time_frames > (1u << 24)) {
    throw std::runtime_error("implausible feature shape in cache file: " + path);
  }
  f.data.resize(f.freq_bins * f.time_frames);
  if (!in.read(reinterpret_cast<char*>(f.data.data()),
               static_cast<std::streamsize>(f.data.size() * 4))) {
    throw std::runtime_error("truncated feature cache file: " + path);
  }
  // Raw extents are implied by the kind; only the mel row pad and the time
  // pad column differ from the stored shape.
  FeatureConfig cfg;
  const auto raw = raw_shape(f.kind, cfg);
  f.raw_freq = std::min(f.freq_bins, raw[0]);
  f.raw_time = std::min(f.time_frames, raw[1]);
  return f;
}

void write_cache_index(const std::string& path,
                       const std::vector<CacheIndexRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot create cache index: " + path);
  out << "segment_id,kind,path,label,partition\n";
  for (const auto& r : rows) {
    out << r.segment_id << ',' << kind_name(r.kind) << ',' << r.path << ','
        << r.label << ',' << r.partition << '\n';
  }
  if (!out) throw std::runtime_error("failed writing cache index: " + path);
}

std::vector<CacheIndexRow> read_cache_index(const std::string& path) {
  const auto raw = read_csv(path, 5);
  if (raw.empty() || raw.front()[0] != "segment_id") {
    throw ConfigError("cache index " + path +
                      " is missing its header; rerun the extract stage");
  }
  std::vector<CacheIndexRow> rows;
  for (size_t i = 1; i < raw.size(); ++i) {
    const auto& r = raw[i];
    CacheIndexRow row;
    row.segment_id = r[0];
    row.kind = kind_from_name(r[1]);
    row.path = r[2];
    try {
      row.label = std::stoi(r[3]);
    } catch (const std::exception&) {
      throw ConfigError("cache index " + path + " line " +
                        std::to_string(i + 1) + ": bad label '" + r[3] + "'");
    }
    if (r[4] != "train" && r[4] != "val" && r[4] != "test") {
      throw ConfigError("cache index " + path + " line " +
                        std::to_string(i + 1) + ": bad partition '" + r[4] + "'");
    }
    row.partition = r[4];
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace sonar::features
