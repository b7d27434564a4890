#include <filesystem>
#include <fstream>
#include <set>

#include "sonar/audio/audio.hpp"
#include "sonar/csv.hpp"

namespace sonar::audio {

namespace {

int parse_label(const std::string& s, const std::string& path, size_t line) {
  for (int i = 0; i < kNumClasses; ++i) {
    if (s == kClassNames[i]) return i;
  }
  if (s.size() == 1 && s[0] >= '0' && s[0] < '0' + kNumClasses) {
    return s[0] - '0';
  }
  throw ConfigError("manifest " + path + " line " + std::to_string(line) +
                    ": unknown label '" + s + "'");
}

}  // namespace

DatasetManifest read_manifest(const std::string& path) {
  auto rows = read_csv(path, 4);
  if (rows.empty()) {
    throw ConfigError("manifest " + path + " is empty");
  }
  const auto& head = rows.front();
  if (head[0] != "record_id" || head[1] != "path" || head[2] != "label" ||
      head[3] != "duration_s") {
    throw ConfigError("manifest " + path +
                      ": expected header record_id,path,label,duration_s");
  }
  DatasetManifest m;
  std::set<std::string> seen;
  for (size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    ManifestEntry e;
    e.record_id = row[0];
    e.path = row[1];
    e.label = parse_label(row[2], path, i + 1);
    try {
      e.duration_s = std::stod(row[3]);
    } catch (const std::exception&) {
      throw ConfigError("manifest " + path + " line " + std::to_string(i + 1) +
                        ": bad duration '" + row[3] + "'");
    }
    if (e.record_id.empty()) {
      throw ConfigError("manifest " + path + " line " + std::to_string(i + 1) +
                        ": empty record_id");
    }
    if (!seen.insert(e.record_id).second) {
      throw ConfigError("manifest " + path + ": duplicate record_id '" +
                        e.record_id + "'");
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

void write_manifest(const std::string& path, const DatasetManifest& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot create manifest: " + path);
  out << "record_id,path,label,duration_s\n";
  char buf[32];
  for (const auto& e : m.entries) {
    std::snprintf(buf, sizeof buf, "%.6f", e.duration_s);
    out << e.record_id << ',' << e.path << ',' << m.class_names[e.label]
        << ',' << buf << '\n';
  }
  if (!out) throw std::runtime_error("failed writing manifest: " + path);
}

void resolve_paths(DatasetManifest& m, const std::string& base_dir) {
  for (auto& e : m.entries) {
    std::filesystem::path p(e.path);
    if (!p.is_absolute()) e.path = (std::filesystem::path(base_dir) / p).string();
  }
}

}  // namespace sonar::audio
