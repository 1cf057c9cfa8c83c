#include "gahcda/gaze.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "gahcda/binary_io.hpp"

namespace gahcda {

GazeHeatmap::GazeHeatmap(int height, int width, std::vector<float> values)
    : Grid<float>(height, width, std::move(values)) {
  for (float v : values_) {
    if (!(v >= 0.0f) || !std::isfinite(v)) throw DataError("gaze heatmap values must be finite and >= 0");
  }
}

WeightMask::WeightMask(int height, int width, std::vector<float> values)
    : Grid<float>(height, width, std::move(values)) {
  for (float v : values_) {
    if (!(v > 0.0f && v <= 1.0f)) throw ValidationError("bad weight mask");
  }
}

WeightMask WeightMask::ones(int height, int width) {
  return WeightMask(height, width, std::vector<float>(static_cast<std::size_t>(height) * width, 1.0f));
}

double default_gaze_sigma(int width) noexcept { return 0.05 * width; }

GazeHeatmap rasterize_heatmap(const GazeTrajectory& trajectory, int height, int width, double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ValidationError("bad kernel width");
  if (height < Image::kMinSide || width < Image::kMinSide) {
    throw ValidationError("heatmap must be at least 16x16");
  }
  const std::size_t n = static_cast<std::size_t>(height) * width;
  if (trajectory.empty()) return GazeHeatmap(height, width, std::vector<float>(n, 0.0f));

  // Accumulate in a canonical sample order so the result does not depend on
  // the order samples were recorded in.
  std::vector<std::pair<double, double>> centres;
  centres.reserve(trajectory.size());
  for (const auto& s : trajectory.samples()) centres.emplace_back(s.x * (width - 1), s.y * (height - 1));
  std::sort(centres.begin(), centres.end());

  const double inv_two_var = 1.0 / (2.0 * sigma * sigma);
  std::vector<double> acc(n, 0.0);
  std::vector<double> col_term(width);
  for (const auto& [cx, cy] : centres) {
    for (int c = 0; c < width; ++c) col_term[c] = std::exp(-(c - cx) * (c - cx) * inv_two_var);
    for (int r = 0; r < height; ++r) {
      const double row_term = std::exp(-(r - cy) * (r - cy) * inv_two_var);
      double* row = acc.data() + static_cast<std::size_t>(r) * width;
      for (int c = 0; c < width; ++c) row[c] += row_term * col_term[c];
    }
  }
  const double peak = *std::max_element(acc.begin(), acc.end());
  std::vector<float> values(n, 0.0f);
  if (peak > 0.0) {
    for (std::size_t i = 0; i < n; ++i) values[i] = static_cast<float>(acc[i] / peak);
  }
  return GazeHeatmap(height, width, std::move(values));
}

WeightMask regularize_to_weights(const GazeHeatmap& heatmap, double w_floor) {
  if (!(w_floor > 0.0 && w_floor <= 1.0)) throw ValidationError("bad weight floor");
  std::vector<float> w(heatmap.size());
  const auto h = heatmap.values();
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double v = w_floor + (1.0 - w_floor) * std::min(1.0, static_cast<double>(h[i]));
    w[i] = static_cast<float>(std::clamp(v, w_floor, 1.0));
  }
  return WeightMask(heatmap.height(), heatmap.width(), std::move(w));
}

void write_gzh1(std::ostream& out, const Grid<float>& grid) {
  std::vector<std::uint8_t> buf;
  buf.reserve(12 + 4 * grid.size());
  binio::put_bytes(buf, "GZH1");
  binio::put_u32(buf, static_cast<std::uint32_t>(grid.height()));
  binio::put_u32(buf, static_cast<std::uint32_t>(grid.width()));
  for (float v : grid.values()) binio::put_f32(buf, v);
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error("failed writing GZH1 stream");
}

Grid<float> read_gzh1(std::istream& in) {
  const auto bytes = binio::slurp(in);
  binio::Reader reader(bytes, "GZH1");
  if (reader.bytes(4) != "GZH1") throw DataError("GZH1: bad magic");
  const auto h = reader.u32();
  const auto w = reader.u32();
  const std::size_t n = static_cast<std::size_t>(h) * w;
  if (reader.remaining() != 4 * n) throw DataError("GZH1: payload size does not match header");
  std::vector<float> values(n);
  for (auto& v : values) v = reader.f32();
  return Grid<float>(static_cast<int>(h), static_cast<int>(w), std::move(values));
}

void save_gzh1(const std::filesystem::path& path, const Grid<float>& grid) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_gzh1(out, grid);
}

Grid<float> load_gzh1(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return read_gzh1(in);
}

}  // namespace gahcda
