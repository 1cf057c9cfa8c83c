#pragma once

// Independent reference implementations used to check the library. These are
// written for clarity, not speed, and share no code with src/.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "gahcda/core.hpp"

namespace oracle {

inline gahcda::SegMask random_mask(std::mt19937_64& rng, int h, int w, double p) {
  std::bernoulli_distribution on(p);
  std::vector<std::uint8_t> px(static_cast<std::size_t>(h) * w);
  for (auto& v : px) v = on(rng);
  return gahcda::SegMask(h, w, std::move(px));
}

/// Random blob-ish mask: a few filled rectangles, so surfaces are not all noise.
inline gahcda::SegMask random_blobs(std::mt19937_64& rng, int h, int w) {
  std::uniform_int_distribution<int> count(1, 3), ry(0, h - 1), rx(0, w - 1), ext(1, 7);
  std::vector<std::uint8_t> px(static_cast<std::size_t>(h) * w, 0);
  const int n = count(rng);
  for (int b = 0; b < n; ++b) {
    const int r0 = ry(rng), c0 = rx(rng), eh = ext(rng), ew = ext(rng);
    for (int r = r0; r < std::min(h, r0 + eh); ++r) {
      for (int c = c0; c < std::min(w, c0 + ew); ++c) px[r * w + c] = 1;
    }
  }
  return gahcda::SegMask(h, w, std::move(px));
}

inline double dice_percent(const gahcda::SegMask& a, const gahcda::SegMask& b) {
  long both = 0, na = 0, nb = 0;
  for (int r = 0; r < a.height(); ++r) {
    for (int c = 0; c < a.width(); ++c) {
      const bool x = a(r, c) == 1, y = b(r, c) == 1;
      both += x && y;
      na += x;
      nb += y;
    }
  }
  if (na + nb == 0) return 100.0;
  return 200.0 * both / static_cast<double>(na + nb);
}

inline std::vector<std::pair<int, int>> surface(const gahcda::SegMask& m) {
  std::vector<std::pair<int, int>> out;
  const int h = m.height(), w = m.width();
  auto fg = [&](int r, int c) { return r >= 0 && r < h && c >= 0 && c < w && m(r, c) == 1; };
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!fg(r, c)) continue;
      if (!fg(r - 1, c) || !fg(r + 1, c) || !fg(r, c - 1) || !fg(r, c + 1)) out.emplace_back(r, c);
    }
  }
  return out;
}

/// All-pairs surface distance.
inline double assd(const gahcda::SegMask& a, const gahcda::SegMask& b) {
  const auto sa = surface(a), sb = surface(b);
  auto nearest = [](std::pair<int, int> p, const std::vector<std::pair<int, int>>& set) {
    double best = std::numeric_limits<double>::infinity();
    for (auto q : set) {
      const double dr = p.first - q.first, dc = p.second - q.second;
      best = std::min(best, std::sqrt(dr * dr + dc * dc));
    }
    return best;
  };
  double total = 0.0;
  for (auto p : sa) total += nearest(p, sb);
  for (auto p : sb) total += nearest(p, sa);
  return total / static_cast<double>(sa.size() + sb.size());
}

/// Dense attention written out with explicit loops. `q`, `kv` are n x d, row-major.
inline std::vector<double> attention(const std::vector<double>& q, const std::vector<double>& kv, int n, int d,
                                     std::vector<double>* weights = nullptr) {
  std::vector<double> out(static_cast<std::size_t>(n) * 2 * d);
  if (weights) weights->assign(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    std::vector<double> s(n);
    for (int j = 0; j < n; ++j) {
      double dot = 0.0;
      for (int k = 0; k < d; ++k) dot += q[i * d + k] * kv[j * d + k];
      s[j] = dot / std::sqrt(static_cast<double>(d));
    }
    double denom = 0.0;
    for (int j = 0; j < n; ++j) denom += std::exp(s[j]);
    for (int j = 0; j < n; ++j) s[j] = std::exp(s[j]) / denom;
    for (int k = 0; k < d; ++k) {
      out[i * 2 * d + k] = kv[i * d + k];
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += s[j] * kv[j * d + k];
      out[i * 2 * d + d + k] = acc;
    }
    if (weights) std::copy(s.begin(), s.end(), weights->begin() + static_cast<std::ptrdiff_t>(i) * n);
  }
  return out;
}

inline double bce(const std::vector<double>& p, const std::vector<std::uint8_t>& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += y[i] ? -std::log(p[i]) : -std::log(1.0 - p[i]);
  return s / static_cast<double>(p.size());
}

/// Unnormalised sum of Gaussians at pixel (r, c).
inline double gaussian_sum(const gahcda::GazeTrajectory& t, int h, int w, double sigma, int r, int c) {
  double acc = 0.0;
  for (const auto& s : t.samples()) {
    const double dx = c - s.x * (w - 1), dy = r - s.y * (h - 1);
    acc += std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
  }
  return acc;
}

/// |a - b| / max(|a|, |b|, floor).
inline double rel_err(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Central-difference check of `analytic[i]` against f over the coordinates
/// `idx` of `x`. Returns the worst relative error.
inline double check_gradient(std::vector<double>& x, const std::vector<double>& analytic,
                             const std::vector<std::size_t>& idx, const std::function<double()>& f,
                             double h = 1e-6, double floor = 1e-6) {
  double worst = 0.0;
  for (auto i : idx) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f();
    x[i] = saved - h;
    const double down = f();
    x[i] = saved;
    worst = std::max(worst, rel_err((up - down) / (2.0 * h), analytic[i], floor));
  }
  return worst;
}

struct PiecewiseCheck {
  double worst = 0.0;
  std::size_t smooth = 0;  ///< coordinates actually compared
  std::size_t kinks = 0;   ///< skipped: a ReLU/max switch lies within +-h
};

/// As check_gradient, for piecewise-linear networks: a coordinate whose left
/// and right one-sided slopes disagree sits on a kink and is skipped.
inline PiecewiseCheck check_gradient_piecewise(std::vector<double>& x, const std::vector<double>& analytic,
                                               const std::vector<std::size_t>& idx, const std::function<double()>& f,
                                               double h = 1e-5, double floor = 1e-3) {
  PiecewiseCheck out;
  for (auto i : idx) {
    const double saved = x[i];
    const double mid = f();
    x[i] = saved + h;
    const double up = f();
    x[i] = saved - h;
    const double down = f();
    x[i] = saved;
    const double right = (up - mid) / h, left = (mid - down) / h;
    if (rel_err(right, left, floor) > 1e-4) {
      ++out.kinks;
      continue;
    }
    ++out.smooth;
    out.worst = std::max(out.worst, rel_err((up - down) / (2.0 * h), analytic[i], floor));
  }
  return out;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("gahcda_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace oracle
