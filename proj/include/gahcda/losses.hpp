#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gahcda/backbone.hpp"
#include "gahcda/core.hpp"
#include "gahcda/gaze.hpp"

namespace gahcda {

struct LossWeights {
  double gaa = 1.0;
  double gb = 1.0;
  double dice = 1.0;
  double ce = 1.0;

  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

/// Rejects negative weights; `require_active` additionally rejects all-zero.
void validate(const LossWeights& weights, bool require_active);

/// Loss value plus d(loss)/d(prediction) for every pixel.
struct LossResult {
  double value = 0.0;
  std::vector<double> grad;
};

inline constexpr double kDiceSmoothing = 1.0;

// Flat forms: one entry per pixel, possibly spanning a whole batch. The mean
// is taken over every pixel passed in.

/// -(1/N) sum[y log(w p) + (1-y) log(1 - w p)], with w p clamped to [eps, 1-eps].
LossResult gaze_balance_loss(std::span<const double> pred, std::span<const std::uint8_t> target,
                             std::span<const float> weights, bool want_grad = true);

/// Pixel-mean binary cross-entropy; the w = 1 case of gaze_balance_loss.
LossResult cross_entropy_loss(std::span<const double> pred, std::span<const std::uint8_t> target,
                              bool want_grad = true);

/// 1 - (2 sum(p y) + s) / (sum(p) + sum(y) + s) with s = 1.
LossResult dice_loss(std::span<const double> pred, std::span<const std::uint8_t> target, bool want_grad = true);

double gaze_balance_loss(const Prediction& pred, const SegMask& pseudo, const WeightMask& w);
double cross_entropy_loss(const Prediction& pred, const SegMask& target);
double dice_loss(const Prediction& pred, const SegMask& target);

struct LossComponents {
  double gaa = 0.0;
  double gb = 0.0;
  double dice = 0.0;
  double ce = 0.0;
};

/// Weighted sum; throws NumericError("non-finite loss") on NaN/Inf components.
double total_loss(const LossComponents& components, const LossWeights& weights);

}  // namespace gahcda
