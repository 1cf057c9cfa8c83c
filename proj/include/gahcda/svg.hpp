#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace gahcda::svg {

struct Bar {
  std::string label;
  double value = 0.0;
  double error = 0.0;  ///< half-length of the whisker
};

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

std::string bar_chart(const std::string& title, const std::string& y_label, const std::vector<Bar>& bars);
std::string line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                       const std::vector<Series>& series);

void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace gahcda::svg
