#include <doctest.h>

#include "gahcda/metrics.hpp"
#include "gahcda/synth.hpp"
#include "oracles.hpp"

using namespace gahcda;

namespace {

SynthConfig small_config(int n_source = 6, int n_target = 6) {
  SynthConfig cfg;
  cfg.n_source = n_source;
  cfg.n_target = n_target;
  return cfg;
}

SegMask disk(int n, double cy, double cx, double radius) {
  std::vector<std::uint8_t> px(static_cast<std::size_t>(n) * n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) px[r * n + c] = (r - cy) * (r - cy) + (c - cx) * (c - cx) <= radius * radius;
  }
  return SegMask(n, n, std::move(px));
}

/// Pooled within-frame variance of the pixels inside the structure.
double structure_variance(const DomainDataset& ds) {
  double total = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& mask = *ds.evaluation_mask(i);
    const auto px = ds.image(i).values();
    double s = 0.0, s2 = 0.0, n = 0.0;
    for (std::size_t k = 0; k < px.size(); ++k) {
      if (!mask.values()[k]) continue;
      s += px[k];
      s2 += static_cast<double>(px[k]) * px[k];
      n += 1.0;
    }
    total += s2 / n - (s / n) * (s / n);
  }
  return total / static_cast<double>(ds.size());
}

}  // namespace

TEST_CASE("generation is deterministic in the seed") {
  const auto cfg = small_config();
  for (auto role : {DomainRole::source, DomainRole::target}) {
    const auto a = generate_domain(cfg, role), b = generate_domain(cfg, role);
    CHECK(a.content_hash() == b.content_hash());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a.image(i) == b.image(i));
      CHECK(*a.evaluation_mask(i) == *b.evaluation_mask(i));
    }
  }
  auto other = cfg;
  other.seed = cfg.seed + 1;
  CHECK(generate_domain(other, DomainRole::source).content_hash() !=
        generate_domain(cfg, DomainRole::source).content_hash());
}

TEST_CASE("items respect the area range and the image range") {
  auto cfg = small_config(30, 30);
  cfg.area_min = 0.08;
  cfg.area_max = 0.2;
  for (auto role : {DomainRole::source, DomainRole::target}) {
    const auto ds = generate_domain(cfg, role);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const double frac = ds.evaluation_mask(i)->foreground_count() / 4096.0;
      CHECK(frac >= cfg.area_min);
      CHECK(frac <= cfg.area_max);
      for (float v : ds.image(i).values()) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
      }
    }
  }
}

TEST_CASE("target items carry gaze, source items do not") {
  const auto cfg = small_config(2, 2);
  const auto src = generate_domain(cfg, DomainRole::source);
  const auto tgt = generate_domain(cfg, DomainRole::target);
  CHECK(src.role() == DomainRole::source);
  CHECK(tgt.target_item(0).gaze != nullptr);
  CHECK(tgt.target_item(0).gaze->size() == static_cast<std::size_t>(cfg.gaze_samples));
  CHECK(src.source_item(0).mask.foreground_count() > 0);
}

TEST_CASE("degenerate shape configs are rejected") {
  auto cfg = small_config();
  cfg.semi_axis_min = 0.3;
  cfg.semi_axis_max = 0.2;
  CHECK_THROWS_WITH_AS(generate_domain(cfg, DomainRole::source), "degenerate shape config", ValidationError);
  cfg = small_config();
  cfg.area_min = 0.9;
  CHECK_THROWS_WITH_AS(generate_domain(cfg, DomainRole::source), "degenerate shape config", ValidationError);
  cfg = small_config();
  cfg.image_size = 60;
  CHECK_THROWS_AS(generate_domain(cfg, DomainRole::source), ValidationError);
  cfg = small_config();
  cfg.blur_sigma = -1.0;
  CHECK_THROWS_AS(generate_domain(cfg, DomainRole::target), ValidationError);
}

TEST_CASE("speckle raises intensity variance inside the structure") {
  const auto cfg = small_config(100, 100);
  const double ratio = structure_variance(generate_domain(cfg, DomainRole::target)) /
                       structure_variance(generate_domain(cfg, DomainRole::source));
  CHECK(ratio > 1.0);
}

TEST_CASE("gaze timing and count") {
  auto cfg = small_config();
  cfg.gaze_samples = 10;
  const auto t = synthesize_gaze(disk(64, 32, 32, 12), cfg, 1);
  REQUIRE(t.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) CHECK(t.samples()[i].t_ms == 200.0 * i);
  CHECK(t.samples().back().t_ms == 1800.0);
  CHECK(synthesize_gaze(disk(64, 32, 32, 12), cfg, 1) == t);
}

TEST_CASE("zero jitter puts every sample on a boundary pixel") {
  auto cfg = small_config();
  cfg.gaze_jitter = 0.0;
  cfg.gaze_samples = 200;
  const auto mask = disk(64, 30.5, 33.0, 14.0);
  const auto boundary = surface_pixels(mask);
  const auto t = synthesize_gaze(mask, cfg, 3);
  for (const auto& s : t.samples()) {
    const auto r = static_cast<std::size_t>(std::lround(s.y * 63)), c = static_cast<std::size_t>(std::lround(s.x * 63));
    CHECK(std::find(boundary.begin(), boundary.end(), r * 64 + c) != boundary.end());
  }
}

TEST_CASE("jittered samples follow the folded-Gaussian distance law") {
  // A large disk keeps the outline locally straight at the jitter scale, so the
  // distance from a sample to the outline is |N(0, sigma^2)| projected on the
  // normal: mean sigma * sqrt(2 / pi).
  auto cfg = small_config();
  cfg.gaze_jitter = 3.0;
  cfg.gaze_samples = 1000;
  const int n = 256;
  const double cy = 127.5, cx = 127.5, radius = 90.0;
  const auto t = synthesize_gaze(disk(n, cy, cx, radius), cfg, 5);
  double total = 0.0;
  for (const auto& s : t.samples()) {
    const double y = s.y * (n - 1), x = s.x * (n - 1);
    // Distance to the sampled boundary pixel's ideal circle.
    total += std::abs(std::hypot(y - cy, x - cx) - radius);
  }
  const double mean = total / 1000.0;
  const double expect = cfg.gaze_jitter * std::sqrt(2.0 / std::numbers::pi);
  CHECK(std::abs(mean - expect) / expect < 0.2);
}

TEST_CASE("gaze needs a structure") {
  const SegMask empty(16, 16, std::vector<std::uint8_t>(256, 0));
  CHECK_THROWS_WITH_AS(synthesize_gaze(empty, small_config(), 1), "no structure to gaze at", DataError);
}
