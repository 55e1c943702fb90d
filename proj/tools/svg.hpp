#pragma once

#include <string>
#include <vector>

namespace cli {

struct Series {
  std::string label;
  std::string color;
  bool line = true;  // polyline when true, point markers otherwise
  bool dashed = false;
  std::vector<double> xs;
  std::vector<double> ys;
};

struct Plot {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  std::vector<Series> series;

  std::string render() const;
};

// Writes text to path, throwing io_failure on any stream error.
void write_file(const std::string& path, const std::string& text);

}  // namespace cli
