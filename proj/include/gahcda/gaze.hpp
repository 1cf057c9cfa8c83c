#pragma once

#include <filesystem>
#include <istream>
#include <ostream>

#include "gahcda/core.hpp"

namespace gahcda {

/// Max-normalized gaze density. All values >= 0; peak is 1 for nonempty input.
class GazeHeatmap : public Grid<float> {
 public:
  GazeHeatmap() = default;
  GazeHeatmap(int height, int width, std::vector<float> values);
};

/// Per-pixel loss weight in [floor, 1].
class WeightMask : public Grid<float> {
 public:
  WeightMask() = default;
  WeightMask(int height, int width, std::vector<float> values);

  static WeightMask ones(int height, int width);
};

/// Default Gaussian width: 5% of the frame width.
double default_gaze_sigma(int width) noexcept;

/// Sum of isotropic Gaussians centred at (x*(width-1), y*(height-1)), divided
/// by its maximum. Empty trajectories give an all-zero heatmap.
GazeHeatmap rasterize_heatmap(const GazeTrajectory& trajectory, int height, int width, double sigma);

/// w = floor + (1 - floor) * h.
WeightMask regularize_to_weights(const GazeHeatmap& heatmap, double w_floor);

// GZH1 container: "GZH1", u32 height, u32 width (LE), then float32 LE values.
void write_gzh1(std::ostream& out, const Grid<float>& grid);
Grid<float> read_gzh1(std::istream& in);
void save_gzh1(const std::filesystem::path& path, const Grid<float>& grid);
Grid<float> load_gzh1(const std::filesystem::path& path);

}  // namespace gahcda
