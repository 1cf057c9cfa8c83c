#include <doctest.h>

#include <fstream>

#include "gahcda/metrics.hpp"
#include "oracles.hpp"

using namespace gahcda;

namespace {

SegMask square(int n, int r0, int c0, int side) {
  std::vector<std::uint8_t> px(static_cast<std::size_t>(n) * n, 0);
  for (int r = r0; r < r0 + side; ++r) {
    for (int c = c0; c < c0 + side; ++c) px[r * n + c] = 1;
  }
  return SegMask(n, n, std::move(px));
}

MetricReport run(const std::string& label, double mean_dsc) {
  return make_report(label, {ItemMetrics{"a", mean_dsc - 1.0, 2.0, {}}, ItemMetrics{"b", mean_dsc + 1.0, 4.0, {}}});
}

AblationTable table_of(double none, double gaa, double gbl, double full) {
  return tabulate_ablation({run("no-DA", none), run("GAA-only", gaa), run("GBL-only", gbl), run("full", full)});
}

}  // namespace

TEST_CASE("dsc and assd match brute-force oracles") {
  std::mt19937_64 rng(51);
  int compared_assd = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = trial % 2 ? oracle::random_blobs(rng, 16, 16) : oracle::random_mask(rng, 16, 16, 0.3);
    const auto b = trial % 3 ? oracle::random_blobs(rng, 16, 16) : oracle::random_mask(rng, 16, 16, 0.5);
    CHECK(dsc(a, b) == oracle::dice_percent(a, b));
    if (a.foreground_count() > 0 && b.foreground_count() > 0) {
      CHECK(std::abs(assd(a, b) - oracle::assd(a, b)) < 1e-9);
      ++compared_assd;
    }
  }
  CHECK(compared_assd >= 90);
}

TEST_CASE("surface pixels match the oracle") {
  std::mt19937_64 rng(52);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = oracle::random_blobs(rng, 16, 16);
    std::vector<std::size_t> expect;
    for (auto [r, c] : oracle::surface(m)) expect.push_back(static_cast<std::size_t>(r) * 16 + c);
    CHECK(surface_pixels(m) == expect);
  }
}

TEST_CASE("metric symmetry and identity") {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 30; ++trial) {
    const auto a = oracle::random_blobs(rng, 16, 16), b = oracle::random_blobs(rng, 16, 16);
    CHECK(dsc(a, b) == dsc(b, a));
    CHECK(assd(a, b) == doctest::Approx(assd(b, a)).epsilon(1e-12));
    CHECK(dsc(a, a) == 100.0);
    CHECK(assd(a, a) == 0.0);
  }
}

TEST_CASE("hand-checked cases") {
  const auto sq = square(16, 4, 4, 4);
  const auto moved = square(16, 4, 5, 4);
  CHECK(dsc(sq, moved) == doctest::Approx(75.0));
  CHECK(assd(sq, moved) == doctest::Approx(oracle::assd(sq, moved)));
  const SegMask empty(16, 16, std::vector<std::uint8_t>(256, 0));
  CHECK(dsc(empty, empty) == 100.0);
  CHECK(dsc(sq, empty) == 0.0);
  CHECK_THROWS_WITH_AS(assd(sq, empty), "undefined surface distance", DataError);
  CHECK_THROWS_AS(dsc(sq, SegMask(16, 8, std::vector<std::uint8_t>(128, 0))), ValidationError);
}

TEST_CASE("empty masks are flagged and excluded from the surface summary") {
  const auto sq = square(16, 2, 2, 5);
  const SegMask empty(16, 16, std::vector<std::uint8_t>(256, 0));
  auto missed = evaluate_item("x", empty, sq);
  CHECK(missed.dsc == 0.0);
  CHECK_FALSE(missed.assd.has_value());
  CHECK(std::find(missed.flags.begin(), missed.flags.end(), "empty-prediction") != missed.flags.end());
  auto good = evaluate_item("y", sq, sq);
  CHECK(good.flags.empty());
  const auto r = make_report("r", {missed, good});
  CHECK(r.dsc.mean == doctest::Approx(50.0));
  CHECK(r.dsc.std == doctest::Approx(50.0));  // population std
  CHECK(r.assd.count == 1);
}

TEST_CASE("summary uses the population standard deviation") {
  const auto s = summarize({2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0});
  CHECK(s.mean == doctest::Approx(5.0));
  CHECK(s.std == doctest::Approx(2.0));
  CHECK(s.count == 8);
  CHECK(summarize({}).count == 0);
}

TEST_CASE("report json round trip") {
  auto r = make_report("full", {ItemMetrics{"a", 91.5, 1.25, {}}, ItemMetrics{"b", 0.0, std::nullopt, {"empty-prediction"}}},
                       {{"seed", 3}});
  const auto back = report_from_json(report_to_json(r));
  CHECK(back.label == "full");
  REQUIRE(back.items.size() == 2);
  CHECK(back.items[0].assd == r.items[0].assd);
  CHECK_FALSE(back.items[1].assd.has_value());
  CHECK(back.items[1].flags == r.items[1].flags);
  CHECK(back.dsc.mean == r.dsc.mean);
  CHECK(back.metadata["seed"] == 3);

  const auto dir = oracle::scratch_dir("report_csv");
  write_report_csv(r, dir / "m.csv");
  std::ifstream in(dir / "m.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "item,dsc,assd,flags");
}

TEST_CASE("ablation tabulation") {
  const auto t = table_of(70.0, 72.0, 74.0, 76.0);
  REQUIRE(t.rows.size() == 4);
  CHECK(t.rows[0].label == "no-DA");
  CHECK(t.rows[3].delta_vs_baseline == doctest::Approx(6.0));
  CHECK_THROWS_WITH_AS(tabulate_ablation({run("no-DA", 1.0), run("full", 2.0)}),
                       doctest::Contains("incomplete ablation set"), ValidationError);
  const auto dir = oracle::scratch_dir("ablation");
  write_ablation_csv(t, dir / "a.csv");
  write_ablation_chart(t, dir / "a.svg");
  CHECK(std::filesystem::file_size(dir / "a.svg") > 0);
}

TEST_CASE("ablation ordering") {
  CHECK(check_ablation_ordering(table_of(70, 72, 74, 76)).passed);
  CHECK(check_ablation_ordering(table_of(70, 72, 74, 76)).warnings.empty());

  const auto tie = check_ablation_ordering(table_of(70, 72, 74, 73.7));
  CHECK(tie.passed);
  CHECK(tie.warnings.size() == 1);

  const auto bad = check_ablation_ordering(table_of(70, 69, 74, 76));
  CHECK_FALSE(bad.passed);
  CHECK(bad.failures.size() == 1);
  CHECK(bad.failures[0].find("no-DA") != std::string::npos);
}
