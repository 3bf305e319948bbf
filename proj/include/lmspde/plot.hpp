#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lmspde {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool markers = true;
  bool dashed = false;
};

struct PlotSpec {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  bool log_x = false;
  bool log_y = false;
  int width = 640;
  int height = 420;
};

/// Minimal line plot; nonpositive values are dropped on log axes, non-finite ones always.
void write_svg(const PlotSpec& spec, const std::vector<PlotSeries>& series, std::ostream& out);
void write_svg(const PlotSpec& spec, const std::vector<PlotSeries>& series, const std::string& file);

}  // namespace lmspde
