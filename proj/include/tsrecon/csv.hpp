#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "tsrecon/errors.hpp"

namespace tsrecon {

// Shortest round-trip representation; keeps written artifacts byte-stable
// across reruns and exact under re-ingestion.
inline std::string fmt_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s, const std::string& context) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw_parse("non-numeric value '" + s + "' in " + context);
  return v;
}

inline long parse_long(const std::string& s, const std::string& context) {
  long v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw_parse("non-integer value '" + s + "' in " + context);
  return v;
}

struct CsvFile {
  std::map<std::string, std::string> metadata;  // leading "# key: value" lines
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name, const std::string& path) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return static_cast<int>(i);
    throw_parse(path + ": missing required column '" + name + "'");
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
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

inline CsvFile read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_io("cannot open " + path);
  CsvFile csv;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header_seen && line[0] == '#') {
      auto colon = line.find(':');
      if (colon != std::string::npos) {
        std::string key = line.substr(1, colon - 1);
        std::string value = line.substr(colon + 1);
        auto trim = [](std::string& s) {
          while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.erase(s.begin());
          while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.pop_back();
        };
        trim(key);
        trim(value);
        csv.metadata[key] = value;
      }
      continue;
    }
    if (!header_seen) {
      csv.columns = split_csv_line(line);
      header_seen = true;
      continue;
    }
    auto fields = split_csv_line(line);
    if (fields.size() != csv.columns.size())
      throw_parse(path + ": row with " + std::to_string(fields.size()) + " fields, expected " +
                  std::to_string(csv.columns.size()));
    csv.rows.push_back(std::move(fields));
  }
  if (!header_seen) throw_parse(path + ": empty file, no header");
  return csv;
}

class CsvWriter {
public:
  explicit CsvWriter(const std::string& path) : path_(path), out_(path) {
    if (!out_) throw_io("cannot write " + path);
  }
  void metadata(const std::string& key, const std::string& value) {
    out_ << "# " << key << ": " << value << "\n";
  }
  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ << ',';
      out_ << fields[i];
    }
    out_ << '\n';
  }
  void close() {
    out_.close();
    if (!out_) throw_io("failed writing " + path_);
  }

private:
  std::string path_;
  std::ofstream out_;
};

}  // namespace tsrecon
