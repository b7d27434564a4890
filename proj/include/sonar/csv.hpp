#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sonar/common.hpp"

namespace sonar {

// Minimal strict CSV: no quoting, no embedded commas. Good enough for the
// manifest/index/report files this project emits.

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  if (!out.empty() && !out.back().empty() && out.back().back() == '\r') {
    out.back().pop_back();
  }
  return out;
}

inline std::vector<std::vector<std::string>> read_csv(const std::string& path,
                                                      size_t expected_cols) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open CSV file: " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv_line(line);
    if (fields.size() != expected_cols) {
      throw std::runtime_error("malformed CSV row in " + path + ": expected " +
                               std::to_string(expected_cols) + " fields, got " +
                               std::to_string(fields.size()));
    }
    rows.push_back(std::move(fields));
  }
  return rows;
}

}  // namespace sonar
