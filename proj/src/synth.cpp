#include "gahcda/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "gahcda/metrics.hpp"

namespace gahcda {

void validate(const SynthConfig& c, int stride) {
  auto bad = [](bool cond) {
    if (cond) throw ValidationError("degenerate shape config");
  };
  if (c.image_size < Image::kMinSide || c.image_size % stride != 0) {
    throw ValidationError("image_size must be >= 16 and divisible by " + std::to_string(stride));
  }
  if (c.n_source < 1 || c.n_target < 1) throw ValidationError("dataset sizes must be >= 1");
  bad(!(c.semi_axis_min > 0.0) || c.semi_axis_max < c.semi_axis_min || c.semi_axis_max > 0.5);
  bad(!(c.wall_min > 0.0) || c.wall_max < c.wall_min);
  bad(c.wall_min >= c.semi_axis_min * c.image_size);
  bad(!(c.area_min >= 0.0) || c.area_max < c.area_min || c.area_max > 1.0);
  bad(c.center_jitter < 0.0 || c.center_jitter > 0.5);
  for (double v : {c.background_level, c.wall_level, c.cavity_level, c.clutter_level}) {
    if (v < 0.0 || v > 1.0) throw ValidationError("intensity levels must be in [0,1]");
  }
  for (double v : {c.source_noise, c.speckle, c.offset, c.blur_sigma, c.target_noise, c.gaze_jitter}) {
    if (!(v >= 0.0)) throw ValidationError("noise and shift parameters must be >= 0");
  }
  if (c.speckle > 1.0) throw ValidationError("speckle strength must be <= 1");
  if (!(c.gamma > 0.0)) throw ValidationError("gamma must be > 0");
  if (c.clutter_blobs < 0 || c.gaze_samples < 0) throw ValidationError("counts must be >= 0");
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t item_seed(std::uint64_t seed, DomainRole role, std::size_t index, std::uint64_t stream) {
  return splitmix64(splitmix64(splitmix64(seed) ^ (role == DomainRole::source ? 0x5eedULL : 0x7a76ULL)) ^
                    (index * 0x100000001b3ULL) ^ (stream << 56));
}

struct Ellipse {
  double cy, cx, a, b, theta;

  /// Normalised radial coordinate; 1 on the outline.
  double rho(double y, double x, double shrink = 0.0) const {
    const double dy = y - cy, dx = x - cx;
    const double u = std::cos(theta) * dx + std::sin(theta) * dy;
    const double v = -std::sin(theta) * dx + std::cos(theta) * dy;
    const double aa = a - shrink, bb = b - shrink;
    return std::sqrt((u * u) / (aa * aa) + (v * v) / (bb * bb));
  }
};

struct Shape {
  Ellipse outer;
  double wall;
};

SegMask rasterize(const Shape& s, int n) {
  std::vector<std::uint8_t> px(static_cast<std::size_t>(n) * n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const bool inside_outer = s.outer.rho(r, c) <= 1.0;
      const bool inside_inner = s.outer.rho(r, c, s.wall) <= 1.0;
      px[static_cast<std::size_t>(r) * n + c] = inside_outer && !inside_inner;
    }
  }
  return SegMask(n, n, std::move(px));
}

Shape sample_shape(const SynthConfig& cfg, std::mt19937_64& rng, SegMask& mask) {
  const double n = cfg.image_size;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto in_range = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  const double area_px = n * n;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Shape s;
    s.outer.cy = (n - 1) / 2.0 + in_range(-cfg.center_jitter, cfg.center_jitter) * n;
    s.outer.cx = (n - 1) / 2.0 + in_range(-cfg.center_jitter, cfg.center_jitter) * n;
    s.outer.a = in_range(cfg.semi_axis_min, cfg.semi_axis_max) * n;
    s.outer.b = in_range(cfg.semi_axis_min, cfg.semi_axis_max) * n;
    s.outer.theta = in_range(0.0, std::numbers::pi);
    s.wall = in_range(cfg.wall_min, cfg.wall_max);
    mask = rasterize(s, cfg.image_size);
    const double frac = mask.foreground_count() / area_px;
    if (frac >= cfg.area_min && frac <= cfg.area_max && mask.foreground_count() > 0) return s;
  }
  throw ValidationError("degenerate shape config");
}

std::vector<double> gaussian_blur(const std::vector<double>& img, int n, double sigma) {
  if (sigma <= 0.0) return img;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0.0;
  for (int k = -radius; k <= radius; ++k) total += kernel[k + radius] = std::exp(-k * k / (2.0 * sigma * sigma));
  for (auto& k : kernel) k /= total;
  auto clampi = [n](int i) { return std::clamp(i, 0, n - 1); };
  std::vector<double> tmp(img.size()), out(img.size());
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) acc += kernel[k + radius] * img[r * n + clampi(c + k)];
      tmp[r * n + c] = acc;
    }
  }
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) acc += kernel[k + radius] * tmp[clampi(r + k) * n + c];
      out[r * n + c] = acc;
    }
  }
  return out;
}

/// Clean piecewise-constant scene: background, clutter, wall, cavity.
std::vector<double> render_scene(const SynthConfig& cfg, const Shape& shape, std::mt19937_64& rng) {
  const int n = cfg.image_size;
  std::vector<double> img(static_cast<std::size_t>(n) * n, cfg.background_level);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int b = 0; b < cfg.clutter_blobs; ++b) {
    const double cy = unit(rng) * (n - 1), cx = unit(rng) * (n - 1);
    const double radius = (0.04 + 0.05 * unit(rng)) * n;
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) {
        const double d2 = (r - cy) * (r - cy) + (c - cx) * (c - cx);
        const double bump = cfg.clutter_level * std::exp(-d2 / (2.0 * radius * radius));
        img[r * n + c] = std::max(img[r * n + c], cfg.background_level + bump);
      }
    }
  }
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const double outer = shape.outer.rho(r, c);
      const double inner = shape.outer.rho(r, c, shape.wall);
      if (inner <= 1.0) {
        img[r * n + c] = cfg.cavity_level;
      } else if (outer <= 1.0) {
        img[r * n + c] = cfg.wall_level;
      }
    }
  }
  return img;
}

/// Scales to the per-image peak and quantises to 16 bits so the in-memory
/// image equals what load_dataset reads back from disk.
Image quantized_image(const std::vector<double>& raw, int n) {
  double peak = 0.0;
  for (double v : raw) peak = std::max(peak, v);
  std::vector<double> q(raw.size(), 0.0);
  if (peak > 0.0) {
    for (std::size_t i = 0; i < raw.size(); ++i) q[i] = std::round(raw[i] / peak * 65535.0);
  }
  return normalize_image(n, n, q);
}

}  // namespace

GazeTrajectory synthesize_gaze(const SegMask& truth, const SynthConfig& cfg, std::uint64_t seed,
                               const std::string& frame_id) {
  const auto boundary = surface_pixels(truth);
  if (boundary.empty()) throw DataError("no structure to gaze at");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, boundary.size() - 1);
  std::normal_distribution<double> jitter(0.0, 1.0);
  const int h = truth.height(), w = truth.width();
  std::vector<GazeSample> samples;
  samples.reserve(cfg.gaze_samples);
  for (int i = 0; i < cfg.gaze_samples; ++i) {
    const std::size_t p = boundary[pick(rng)];
    double row = static_cast<double>(p / w), col = static_cast<double>(p % w);
    const double dy = jitter(rng), dx = jitter(rng);
    row = std::clamp(row + cfg.gaze_jitter * dy, 0.0, h - 1.0);
    col = std::clamp(col + cfg.gaze_jitter * dx, 0.0, w - 1.0);
    samples.push_back({200.0 * i, col / (w - 1), row / (h - 1)});
  }
  return GazeTrajectory(frame_id, std::move(samples));
}

DomainDataset generate_domain(const SynthConfig& cfg, DomainRole role) {
  validate(cfg);
  const int n = cfg.image_size;
  const int count = role == DomainRole::source ? cfg.n_source : cfg.n_target;
  std::vector<DomainDataset::Record> records;
  records.reserve(count);
  for (int i = 0; i < count; ++i) {
    std::mt19937_64 rng(item_seed(cfg.seed, role, i, 0));
    SegMask mask;
    const Shape shape = sample_shape(cfg, rng, mask);
    std::vector<double> img = render_scene(cfg, shape, rng);
    std::normal_distribution<double> normal(0.0, 1.0);
    if (role == DomainRole::source) {
      for (auto& v : img) v = std::clamp(v + cfg.source_noise * normal(rng), 0.0, 1.0);
    } else {
      if (cfg.speckle > 0.0) {
        std::uniform_real_distribution<double> unit(std::numeric_limits<double>::min(), 1.0);
        const double rayleigh_mean = std::sqrt(std::numbers::pi / 2.0);
        for (auto& v : img) {
          const double r = std::sqrt(-2.0 * std::log(unit(rng))) / rayleigh_mean;
          v *= (1.0 - cfg.speckle) + cfg.speckle * r;
        }
      }
      img = gaussian_blur(img, n, cfg.blur_sigma);
      for (auto& v : img) {
        v = std::pow(std::clamp(v, 0.0, 1.0), cfg.gamma) + cfg.offset + cfg.target_noise * normal(rng);
        v = std::clamp(v, 0.0, 1.0);
      }
    }

    DomainDataset::Record rec;
    char id[32];
    std::snprintf(id, sizeof id, "%s_%04d", role == DomainRole::source ? "src" : "tgt", i);
    rec.id = id;
    rec.image = quantized_image(img, n);
    if (role == DomainRole::target) {
      rec.gaze = synthesize_gaze(mask, cfg, item_seed(cfg.seed, role, i, 1), rec.id);
    }
    rec.mask = std::move(mask);
    records.push_back(std::move(rec));
  }
  return DomainDataset(role, std::move(records));
}

}  // namespace gahcda
