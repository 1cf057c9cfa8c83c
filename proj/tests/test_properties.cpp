// Randomised invariants that cut across modules.
#include <doctest.h>

#include "gahcda/backbone.hpp"
#include "gahcda/gaa.hpp"
#include "gahcda/losses.hpp"
#include "gahcda/metrics.hpp"
#include "gahcda/synth.hpp"
#include "oracles.hpp"

using namespace gahcda;

namespace {

SegMask shifted(const SegMask& m, int dr, int dc) {
  std::vector<std::uint8_t> px(m.size(), 0);
  for (int r = 0; r < m.height(); ++r) {
    for (int c = 0; c < m.width(); ++c) {
      const int rr = r + dr, cc = c + dc;
      if (m(r, c) && rr >= 0 && rr < m.height() && cc >= 0 && cc < m.width()) px[rr * m.width() + cc] = 1;
    }
  }
  return SegMask(m.height(), m.width(), std::move(px));
}

SegMask centered_blobs(std::mt19937_64& rng) {
  // Blobs confined to the middle 12x12 of a 24x24 frame so shifts by up to 4
  // never clip.
  const auto inner = oracle::random_blobs(rng, 12, 12);
  std::vector<std::uint8_t> px(24 * 24, 0);
  for (int r = 0; r < 12; ++r) {
    for (int c = 0; c < 12; ++c) px[(r + 6) * 24 + c + 6] = inner(r, c);
  }
  return SegMask(24, 24, std::move(px));
}

}  // namespace

TEST_CASE("datasets iterate identically twice") {
  SynthConfig cfg;
  cfg.n_source = 3;
  const auto ds = generate_domain(cfg, DomainRole::source);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(ds.id(i) == ds.id(i));
    CHECK(ds.image(i) == ds.image(i));
  }
}

TEST_CASE("normalize_image is idempotent") {
  std::mt19937_64 rng(61);
  std::uniform_real_distribution<double> u(0.0, 7.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> raw(256);
    for (auto& v : raw) v = u(rng);
    const auto once = normalize_image(16, 16, raw);
    const std::vector<double> again(once.values().begin(), once.values().end());
    CHECK(normalize_image(16, 16, again) == once);
  }
}

TEST_CASE("heatmaps ignore sample order and peak at one") {
  std::mt19937_64 rng(62);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::pair<double, double>> pts(1 + trial % 7);
    for (auto& p : pts) p = {u(rng), u(rng)};
    auto make = [&](const std::vector<std::pair<double, double>>& ps) {
      std::vector<GazeSample> s;
      for (std::size_t i = 0; i < ps.size(); ++i) s.push_back({200.0 * i, ps[i].first, ps[i].second});
      return GazeTrajectory("f", s);
    };
    const auto a = rasterize_heatmap(make(pts), 20, 24, 2.5);
    std::shuffle(pts.begin(), pts.end(), rng);
    const auto b = rasterize_heatmap(make(pts), 20, 24, 2.5);
    double worst = 0.0, peak = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      worst = std::max(worst, static_cast<double>(std::abs(a.values()[k] - b.values()[k])));
      peak = std::max(peak, static_cast<double>(a.values()[k]));
    }
    CHECK(worst < 1e-6);
    CHECK(std::abs(peak - 1.0) < 1e-9);
  }
}

TEST_CASE("weights are order-preserving and bounded") {
  std::mt19937_64 rng(63);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (double floor : {0.05, 0.2, 0.7, 1.0}) {
    std::vector<float> lo(256), hi(256);
    for (std::size_t k = 0; k < 256; ++k) {
      lo[k] = u(rng);
      hi[k] = std::min(1.0f, lo[k] + u(rng) * 0.3f);
    }
    const auto wl = regularize_to_weights(GazeHeatmap(16, 16, lo), floor);
    const auto wh = regularize_to_weights(GazeHeatmap(16, 16, hi), floor);
    for (std::size_t k = 0; k < 256; ++k) {
      CHECK(wl.values()[k] <= wh.values()[k]);
      CHECK(wl.values()[k] >= static_cast<float>(floor) - 1e-7f);
      CHECK(wh.values()[k] <= 1.0f);
    }
  }
}

TEST_CASE("network output shapes track the input") {
  for (int depth : {2, 3}) {
    const auto params = init_params(depth, 4, 64);
    for (int side : {16, 32, 48}) {
      if (side % (1 << depth)) continue;
      const auto out = forward(params, Image(side, side + 16, std::vector<float>(side * (side + 16), 0.3f)));
      CHECK(out.prediction.height() == side);
      CHECK(out.prediction.width() == side + 16);
      CHECK(out.bottleneck.height == side >> depth);
      CHECK(out.bottleneck.width == (side + 16) >> depth);
    }
  }
}

TEST_CASE("forward passes are bit-reproducible") {
  const auto params = init_params(3, 4, 65);
  SynthConfig cfg;
  cfg.n_target = 1;
  cfg.image_size = 32;
  const auto img = generate_domain(cfg, DomainRole::target).image(0);
  const auto a = forward(params, img), b = forward(params, img);
  CHECK(std::ranges::equal(a.prediction.values(), b.prediction.values()));
  CHECK(a.bottleneck.data == b.bottleneck.data);
}

TEST_CASE("softmax rows ignore a constant shift in the scores") {
  // Every key shares its last coordinate, so moving query i along that axis
  // adds the same constant to each of row i's scores.
  std::mt19937_64 rng(66);
  std::normal_distribution<double> g;
  const int n = 5, d = 4;
  Tokens<double> kv(n, d), q(n, d);
  for (auto& v : q.values) v = g(rng);
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < d - 1; ++k) kv(j, k) = g(rng);
    kv(j, d - 1) = 1.5;  // shared last coordinate
  }
  const auto base = cross_attention_fuse(q, kv);
  Tokens<double> q2 = q;
  q2(2, d - 1) += 3.0;  // row 2 scores all move by 3 * 1.5 / sqrt(d)
  const auto moved = cross_attention_fuse(q2, kv);
  for (int j = 0; j < n; ++j) CHECK(std::abs(base.attention(2, j) - moved.attention(2, j)) < 1e-6);
}

TEST_CASE("gaze balance weighting is monotone") {
  std::mt19937_64 rng(67);
  std::uniform_real_distribution<double> p(0.05, 0.95), w(0.1, 0.9);
  for (int trial = 0; trial < 200; ++trial) {
    const std::vector<double> pred{p(rng)};
    const float w1 = static_cast<float>(w(rng)), w2 = std::min(1.0f, w1 + 0.05f);
    const auto at = [&](std::uint8_t y, float wt) {
      return gaze_balance_loss(pred, std::vector<std::uint8_t>{y}, std::vector<float>{wt}, false).value;
    };
    CHECK(at(1, w2) < at(1, w1));
    CHECK(at(0, w2) > at(0, w1));
  }
}

TEST_CASE("loss gradients on random 8x8 inputs") {
  std::mt19937_64 rng(68);
  std::uniform_real_distribution<double> prob(0.02, 0.98);
  std::uniform_real_distribution<float> weight(0.2f, 1.0f);
  std::bernoulli_distribution label(0.5);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> pred(64);
    std::vector<std::uint8_t> y(64);
    std::vector<float> w(64);
    for (int i = 0; i < 64; ++i) {
      pred[i] = prob(rng);
      y[i] = label(rng);
      w[i] = weight(rng);
    }
    std::vector<std::size_t> idx(64);
    for (std::size_t i = 0; i < 64; ++i) idx[i] = i;
    const auto gb = gaze_balance_loss(pred, y, w), ce = cross_entropy_loss(pred, y), dc = dice_loss(pred, y);
    CHECK(oracle::check_gradient(pred, gb.grad, idx, [&] { return gaze_balance_loss(pred, y, w, false).value; }) <
          1e-4);
    CHECK(oracle::check_gradient(pred, ce.grad, idx, [&] { return cross_entropy_loss(pred, y, false).value; }) < 1e-4);
    CHECK(oracle::check_gradient(pred, dc.grad, idx, [&] { return dice_loss(pred, y, false).value; }) < 1e-4);
    CHECK(std::abs(gaze_balance_loss(pred, y, std::vector<float>(64, 1.0f)).value - ce.value) < 1e-9);
  }
}

TEST_CASE("total loss is linear in each weight") {
  const LossComponents c{0.3, 0.7, 0.11, 0.9};
  const LossWeights base{1.0, 1.0, 1.0, 1.0};
  const double t = total_loss(c, base);
  for (int k = 0; k < 4; ++k) {
    LossWeights twice = base;
    double* slot[] = {&twice.gaa, &twice.gb, &twice.dice, &twice.ce};
    const double term[] = {c.gaa, c.gb, c.dice, c.ce};
    *slot[k] = 2.0;
    CHECK(total_loss(c, twice) - t == doctest::Approx(term[k]).epsilon(1e-15));
  }
}

TEST_CASE("assd is translation invariant") {
  std::mt19937_64 rng(69);
  std::uniform_int_distribution<int> off(-4, 4);
  for (int trial = 0; trial < 30; ++trial) {
    const auto a = centered_blobs(rng), b = centered_blobs(rng);
    const int dr = off(rng), dc = off(rng);
    CHECK(assd(shifted(a, dr, dc), shifted(b, dr, dc)) == doctest::Approx(assd(a, b)).epsilon(1e-12));
    CHECK(dsc(shifted(a, dr, dc), shifted(b, dr, dc)) == dsc(a, b));
  }
}

TEST_CASE("generated images stay in range for any shift setting") {
  std::mt19937_64 rng(70);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    SynthConfig cfg;
    cfg.n_target = 2;
    cfg.image_size = 32;
    cfg.speckle = u(rng);
    cfg.gamma = 0.3 + 3.0 * u(rng);
    cfg.offset = u(rng);
    cfg.blur_sigma = 3.0 * u(rng);
    cfg.seed = trial;
    const auto ds = generate_domain(cfg, DomainRole::target);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      for (float v : ds.image(i).values()) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
      }
    }
  }
}
