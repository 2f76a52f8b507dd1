#include "mmg/csv.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace mmg::csv {

std::string num(double v) {
  if (v == 0.0) v = 0.0;  // normalize -0
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

Writer::Writer(std::vector<std::string> header) : header_(std::move(header)) {}

Writer& Writer::cell(const std::string& s) {
  current_.push_back(s);
  return *this;
}
Writer& Writer::cell(double v) { return cell(num(v)); }
Writer& Writer::cell(int v) { return cell(std::to_string(v)); }

void Writer::end_row() {
  if (current_.size() != header_.size())
    throw std::logic_error("csv row width mismatch");
  rows_.push_back(std::move(current_));
  current_.clear();
}

std::string Writer::str() const {
  std::string out;
  auto join = [&out](const std::vector<std::string>& cols) {
    for (size_t i = 0; i < cols.size(); ++i) {
      if (i) out += ',';
      out += cols[i];
    }
    out += '\n';
  };
  join(header_);
  for (const auto& r : rows_) join(r);
  return out;
}

void Writer::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << str();
}

}  // namespace mmg::csv
