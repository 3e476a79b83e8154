#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace adamtrack {

struct Series {
  std::string label;
  std::vector<double> t;
  std::vector<double> mean;
  std::vector<double> sem;  // empty or all zero: no band
};

struct PlotSpec {
  std::string title;
  std::string xlabel = "step";
  std::string ylabel = "metric";
  int width = 640;
  int height = 420;
};

/// Log-y line chart with +-1 SEM bands and a legend. Pure function of its
/// inputs.
std::string render_svg(const std::vector<Series>& series, const PlotSpec& spec);

/// Groups run CSVs by the optimizer prefix of their file name and averages
/// `column` across files in each group.
std::vector<Series> series_from_csvs(
    const std::vector<std::filesystem::path>& paths, const std::string& column);

}  // namespace adamtrack
