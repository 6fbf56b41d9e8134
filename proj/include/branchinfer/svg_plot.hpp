#pragma once

#include <string>
#include <vector>

#include "branchinfer/evaluation.hpp"

namespace branchinfer::plot {

// Deflection vs time: shaded band, median line and dashed ground truth.
std::string band_svg(const evaluation::TrajectoryBand& band, const std::vector<double>& gt,
                     const std::string& title);

struct BarSeries {
  std::string name;
  std::vector<double> values;  // one per category
};

std::string bar_chart_svg(const std::vector<std::string>& categories,
                          const std::vector<BarSeries>& series, const std::string& title,
                          const std::string& y_label);

}  // namespace branchinfer::plot
