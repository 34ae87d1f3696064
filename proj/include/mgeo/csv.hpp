#pragma once

#include <cstdint>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "mgeo/common.hpp"

namespace mgeo {

// Shortest round-trippable decimal form; deterministic across runs.
inline std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  double back = 0;
  std::sscanf(buf, "%lf", &back);
  if (back == x) {
    // try shorter representations for readability
    for (int prec = 1; prec <= 16; ++prec) {
      char s[40];
      std::snprintf(s, sizeof s, "%.*g", prec, x);
      std::sscanf(s, "%lf", &back);
      if (back == x) return s;
    }
  }
  return buf;
}

// Minimal CSV assembler: header row, data rows, trailing metadata comment.
class CsvBuilder {
 public:
  explicit CsvBuilder(std::vector<std::string> header) {
    for (size_t i = 0; i < header.size(); ++i) {
      if (i) out_ << ',';
      out_ << header[i];
    }
    out_ << '\n';
  }
  void row(const std::vector<std::string>& fields) {
    for (size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ << ',';
      out_ << fields[i];
    }
    out_ << '\n';
  }
  // every emitted CSV ends with "# seed=..., version=..." (+ optional extras)
  std::string finish(uint64_t seed, const std::string& extra = "") {
    out_ << "# seed=" << seed << ", version=" << kVersion;
    if (!extra.empty()) out_ << ", " << extra;
    out_ << '\n';
    return out_.str();
  }

 private:
  std::ostringstream out_;
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace mgeo
