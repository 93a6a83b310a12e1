#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dsse/common.hpp"

namespace dsse::csv {

// Minimal CSV: comma-separated, no quoting (all fields in this project are
// identifiers or numbers). Writers emit '\n' line endings.

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int col(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return int(i);
    throw ValidationError(ValidationError::Kind::Schema, "missing CSV column: " + name);
  }
};

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline Table read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(ValidationError::Kind::Schema, "cannot open " + path);
  Table t;
  std::string line;
  if (!std::getline(in, line))
    throw ValidationError(ValidationError::Kind::Schema, "empty CSV: " + path);
  t.header = split_line(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto row = split_line(line);
    if (row.size() != t.header.size())
      throw ValidationError(ValidationError::Kind::Schema,
                            "ragged CSV row in " + path + ": " + line);
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline double to_double(const std::string& s) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ValidationError(ValidationError::Kind::Schema, "bad number in CSV: " + s);
  return v;
}

/// Fixed-format double so reruns are byte-identical across locales.
inline std::string fmt(double v, int prec = 9) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

class Writer {
 public:
  explicit Writer(const std::string& path) : out_(path) {
    if (!out_) throw ValidationError(ValidationError::Kind::Schema, "cannot write " + path);
  }

  void row(const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

}  // namespace dsse::csv
