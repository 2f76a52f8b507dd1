#pragma once

#include <string>
#include <vector>

namespace mmg::csv {

/// 6 significant digits, no trailing noise; integral values stay plain.
std::string num(double v);

class Writer {
 public:
  explicit Writer(std::vector<std::string> header);

  Writer& cell(const std::string& s);
  Writer& cell(double v);
  Writer& cell(int v);
  void end_row();

  /// Joined document (header + rows).
  std::string str() const;
  void save(const std::string& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
  std::vector<std::string> current_;
};

}  // namespace mmg::csv
