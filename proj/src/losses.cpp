#include "gahcda/losses.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace gahcda {

void validate(const LossWeights& w, bool require_active) {
  for (double v : {w.gaa, w.gb, w.dice, w.ce}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("loss weights must be finite and >= 0");
  }
  if (require_active && w.gaa == 0.0 && w.gb == 0.0 && w.dice == 0.0 && w.ce == 0.0) {
    throw ValidationError("no active objective");
  }
}

namespace {

void check_sizes(std::size_t a, std::size_t b) {
  if (a != b) throw ValidationError("shape mismatch");
}

}  // namespace

LossResult gaze_balance_loss(std::span<const double> pred, std::span<const std::uint8_t> target,
                             std::span<const float> weights, bool want_grad) {
  check_sizes(pred.size(), target.size());
  check_sizes(pred.size(), weights.size());
  if (pred.empty()) throw ValidationError("shape mismatch");
  const double n = static_cast<double>(pred.size());
  LossResult r;
  if (want_grad) r.grad.assign(pred.size(), 0.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double w = weights[i];
    if (!(w > 0.0 && w <= 1.0)) throw ValidationError("bad weight mask");
    const double raw = w * pred[i];
    const double q = std::clamp(raw, kProbEpsilon, 1.0 - kProbEpsilon);
    const bool y = target[i] != 0;
    sum += y ? -std::log(q) : -std::log1p(-q);
    if (want_grad && raw == q) r.grad[i] = w * (y ? -1.0 / q : 1.0 / (1.0 - q)) / n;
  }
  r.value = sum / n;
  return r;
}

LossResult cross_entropy_loss(std::span<const double> pred, std::span<const std::uint8_t> target,
                              bool want_grad) {
  const std::vector<float> ones(pred.size(), 1.0f);
  return gaze_balance_loss(pred, target, ones, want_grad);
}

LossResult dice_loss(std::span<const double> pred, std::span<const std::uint8_t> target, bool want_grad) {
  check_sizes(pred.size(), target.size());
  double inter = 0.0, p_sum = 0.0, y_sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double y = target[i] ? 1.0 : 0.0;
    inter += pred[i] * y;
    p_sum += pred[i];
    y_sum += y;
  }
  const double num = 2.0 * inter + kDiceSmoothing;
  const double den = p_sum + y_sum + kDiceSmoothing;
  LossResult r;
  r.value = 1.0 - num / den;
  if (want_grad) {
    r.grad.resize(pred.size());
    const double den2 = den * den;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double y = target[i] ? 1.0 : 0.0;
      r.grad[i] = -(2.0 * y * den - num) / den2;
    }
  }
  return r;
}

namespace {

void check_shape(const Prediction& p, const SegMask& y) {
  if (!same_shape(p, y)) throw ValidationError("shape mismatch");
}

}  // namespace

double gaze_balance_loss(const Prediction& pred, const SegMask& pseudo, const WeightMask& w) {
  check_shape(pred, pseudo);
  if (!same_shape(pred, w)) throw ValidationError("shape mismatch");
  return gaze_balance_loss(pred.values(), pseudo.values(), w.values(), false).value;
}

double cross_entropy_loss(const Prediction& pred, const SegMask& target) {
  check_shape(pred, target);
  return cross_entropy_loss(pred.values(), target.values(), false).value;
}

double dice_loss(const Prediction& pred, const SegMask& target) {
  check_shape(pred, target);
  return dice_loss(pred.values(), target.values(), false).value;
}

double total_loss(const LossComponents& c, const LossWeights& w) {
  if (!std::isfinite(c.gaa) || !std::isfinite(c.gb) || !std::isfinite(c.dice) || !std::isfinite(c.ce)) {
    std::ostringstream msg;
    msg << "non-finite loss (gaa=" << c.gaa << ", gb=" << c.gb << ", dice=" << c.dice << ", ce=" << c.ce << ")";
    throw NumericError(msg.str());
  }
  return w.gaa * c.gaa + w.gb * c.gb + w.dice * c.dice + w.ce * c.ce;
}

}  // namespace gahcda
