#include <doctest.h>

#include <fstream>

#include "gahcda/checkpoint.hpp"
#include "gahcda/synth.hpp"
#include "gahcda/trainer.hpp"
#include "oracles.hpp"

using namespace gahcda;

namespace {

RunConfig tiny_config() {
  RunConfig cfg;
  apply_profile(cfg, "desk");
  cfg.teacher = {2, 2, 1e-3};
  cfg.adapt = {2, 2, 1e-4};
  cfg.backbone = UNetArch{2, 4, 1};
  cfg.synth.image_size = 16;
  cfg.synth.n_source = 5;
  cfg.synth.n_target = 5;
  cfg.synth.wall_min = 2.0;
  cfg.synth.wall_max = 3.0;
  cfg.synth.gaze_samples = 8;
  return cfg;
}

struct Fixture {
  RunConfig cfg = tiny_config();
  DomainDataset source = generate_domain(cfg.synth, DomainRole::source);
  DomainDataset target = generate_domain(cfg.synth, DomainRole::target);
};

}  // namespace

TEST_CASE("teacher training writes a full manifest") {
  Fixture f;
  std::vector<std::string> lines;
  const auto run = train_teacher(f.source, f.cfg, [&](const std::string& s) { lines.push_back(s); });
  CHECK(run.params.arch == f.cfg.backbone);
  CHECK(run.params.weights.all_finite());
  REQUIRE(run.manifest.losses.size() == 2);
  CHECK(run.manifest.kind == "teacher");
  CHECK(run.manifest.data_hashes.count("source") == 1);
  CHECK(run.manifest.losses[0].gb == 0.0);
  CHECK(run.manifest.losses[0].gaa == 0.0);
  CHECK_FALSE(lines.empty());

  const auto dir = oracle::scratch_dir("manifest");
  write_manifest(run.manifest, dir / "manifest.json");
  const auto back = read_manifest(dir / "manifest.json");
  CHECK(back.kind == "teacher");
  CHECK(back.losses.size() == 2);
  CHECK(back.losses[1].total == run.manifest.losses[1].total);
  CHECK(back.config == run.manifest.config);
  write_loss_csv(run.manifest.losses, dir / "loss.csv");
  std::ifstream in(dir / "loss.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "epoch,l_gaa,l_gb,l_dice,l_ce,total");
}

TEST_CASE("training is deterministic") {
  Fixture f;
  const auto a = train_teacher(f.source, f.cfg), b = train_teacher(f.source, f.cfg);
  CHECK(checkpoint_hash(a.params) == checkpoint_hash(b.params));
  auto other = f.cfg;
  other.seed = 1;
  CHECK(checkpoint_hash(train_teacher(f.source, other).params) != checkpoint_hash(a.params));

  const auto pseudo = generate_pseudo_labels(a.params, f.target, 0.5);
  const auto x = adapt_student(a.params, f.target, pseudo, f.cfg);
  const auto y = adapt_student(a.params, f.target, pseudo, f.cfg);
  CHECK(checkpoint_hash(x.student) == checkpoint_hash(y.student));
  CHECK(x.gaa == y.gaa);
}

TEST_CASE("pseudo-labels threshold with >=") {
  Fixture f;
  const auto teacher = train_teacher(f.source, f.cfg).params;
  const auto labels = generate_pseudo_labels(teacher, f.target, 0.5);
  REQUIRE(labels.size() == f.target.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto prob = forward(teacher, f.target.image(i)).prediction;
    for (std::size_t k = 0; k < prob.size(); ++k) CHECK((prob.values()[k] >= 0.5) == (labels[i].values()[k] == 1));
  }
  CHECK(pseudo_label_hash(labels) == pseudo_label_hash(generate_pseudo_labels(teacher, f.target, 0.5)));
  CHECK_THROWS_AS(generate_pseudo_labels(teacher, f.target, 1.0), ValidationError);
}

TEST_CASE("adaptation moves the student and never the teacher") {
  Fixture f;
  const auto teacher = train_teacher(f.source, f.cfg).params;
  const auto before = serialize_checkpoint(Checkpoint{teacher, std::nullopt, {}});
  const auto pseudo = generate_pseudo_labels(teacher, f.target, 0.5);
  auto cfg = f.cfg;
  cfg.adapt.epochs = 1;
  const auto run = adapt_student(teacher, f.target, pseudo, cfg);
  CHECK(serialize_checkpoint(Checkpoint{teacher, std::nullopt, {}}) == before);
  CHECK_FALSE(run.student == teacher);
  CHECK(run.manifest.kind == "adapt");
  CHECK(run.manifest.extra["pseudo_label_hash"] == pseudo_label_hash(pseudo));
  CHECK(run.manifest.extra["pseudo_label_hash_verified"] == true);
  CHECK(run.manifest.extra["teacher_checkpoint_hash"] == checkpoint_hash(teacher));

  // Every logged total is the weighted sum of the logged terms.
  for (const auto& e : run.manifest.losses) {
    const double expect = cfg.lambdas.gaa * e.gaa + cfg.lambdas.gb * e.gb + cfg.lambdas.dice * e.dice +
                          cfg.lambdas.ce * e.ce;
    CHECK(std::abs(e.total - expect) < 1e-6);
    CHECK(e.gaa >= 0.0);
  }
}

TEST_CASE("empty pseudo-labels are flagged") {
  Fixture f;
  const auto teacher = init_params(2, 4, 1);
  std::vector<SegMask> empty;
  for (std::size_t i = 0; i < f.target.size(); ++i) empty.emplace_back(16, 16, std::vector<std::uint8_t>(256, 0));
  auto cfg = f.cfg;
  cfg.adapt.epochs = 1;
  const auto run = adapt_student(teacher, f.target, empty, cfg);
  bool flagged = false;
  for (const auto& w : run.manifest.warnings) flagged |= w.find("empty pseudo-label") != std::string::npos;
  CHECK(flagged);
}

TEST_CASE("adaptation needs gaze for every item") {
  Fixture f;
  std::vector<DomainDataset::Record> recs;
  for (std::size_t i = 0; i < f.target.size(); ++i) {
    recs.push_back({f.target.id(i), f.target.image(i), std::nullopt, std::nullopt});
  }
  const DomainDataset blind(DomainRole::target, std::move(recs));
  const auto teacher = init_params(2, 4, 1);
  const auto pseudo = generate_pseudo_labels(teacher, blind, 0.5);
  CHECK_THROWS_WITH_AS(adapt_student(teacher, blind, pseudo, f.cfg), doctest::Contains("gaze required for adaptation"),
                       DataError);
  CHECK_THROWS_AS(adapt_student(teacher, f.target, {}, f.cfg), ValidationError);
}

TEST_CASE("RMSProp step by hand") {
  ParamSet p({NamedTensor{"w", {2}, {1.0f, -2.0f}}});
  RmsProp opt(RmsPropConfig{0.9, 1e-8, 0.0}, 0.01);
  opt.step(p, {{0.5f, -1.0f}});
  // v = 0.1 g^2, so each first update is lr * g / (sqrt(0.1) |g|).
  const double step = 0.01 / std::sqrt(0.1);
  CHECK(p[0].values[0] == doctest::Approx(1.0 - step).epsilon(1e-6));
  CHECK(p[0].values[1] == doctest::Approx(-2.0 + step).epsilon(1e-6));
  opt.step(p, {{0.5f, 0.0f}});
  // v = 0.9 * 0.025 + 0.1 * 0.25 = 0.0475
  CHECK(p[0].values[0] == doctest::Approx(1.0 - step - 0.01 * 0.5 / std::sqrt(0.0475)).epsilon(1e-6));
  CHECK(p[0].values[1] == doctest::Approx(-2.0 + step).epsilon(1e-6));

  ParamSet q({NamedTensor{"w", {1}, {0.0f}}});
  RmsProp mom(RmsPropConfig{0.0, 1e-8, 0.5}, 0.1);
  mom.step(q, {{2.0f}});
  mom.step(q, {{2.0f}});
  CHECK(q[0].values[0] == doctest::Approx(-0.1 - 0.15).epsilon(1e-5));
}

TEST_CASE("smoothed loss warning") {
  std::vector<EpochLoss> falling, rising;
  for (int e = 0; e < 10; ++e) {
    falling.push_back({e, 0, 0, 0, 0, 1.0 / (e + 1)});
    rising.push_back({e, 0, 0, 0, 0, e < 5 ? 1.0 : 2.0});
  }
  CHECK_FALSE(smoothed_loss_warning(falling).has_value());
  CHECK(smoothed_loss_warning(rising).has_value());
  CHECK_FALSE(smoothed_loss_warning({}).has_value());
}

TEST_CASE("ablation modes") {
  CHECK(parse_modes("all") == std::vector<std::string>{"no-DA", "GAA-only", "GBL-only", "full"});
  CHECK(parse_modes("full,no-DA") == std::vector<std::string>{"full", "no-DA"});
  CHECK_THROWS_AS(parse_modes("full,both"), ValidationError);
  const LossWeights base{2, 3, 1, 1};
  CHECK(mode_weights("full", base) == base);
  CHECK(mode_weights("GAA-only", base).gb == 0.0);
  CHECK(mode_weights("GAA-only", base).gaa == 2.0);
  CHECK(mode_weights("GBL-only", base).gaa == 0.0);
  CHECK(mode_weights("GBL-only", base).gb == 3.0);
}

TEST_CASE("ablate writes one run per seed and mode") {
  Fixture f;
  f.cfg.adapt.epochs = 1;
  const auto dir = oracle::scratch_dir("ablate");
  const auto reports = ablate(f.source, f.target, f.cfg, parse_modes("all"), 2, dir);
  REQUIRE(reports.size() == 8);
  CHECK(reports[0].label == "no-DA");
  CHECK(reports[0].metadata["seed"] == f.cfg.seed);
  CHECK(reports[4].metadata["seed"] == f.cfg.seed + 1);
  CHECK(std::filesystem::exists(dir / "seed1" / "full" / "manifest.json"));
  CHECK(std::filesystem::exists(dir / "seed0" / "teacher" / "checkpoint.gzck"));
  const auto table = tabulate_ablation(reports);
  CHECK(table.rows[3].dsc.count == 2);
  // no-DA is the teacher itself, so its holdout score equals a direct evaluation.
  CHECK(reports[0].items.size() == split_train_holdout(f.target.size()).second.size());
}

TEST_CASE("evaluation needs ground truth") {
  Fixture f;
  const auto params = init_params(2, 4, 3);
  const auto r = evaluate(params, f.target, "t");
  CHECK(r.items.size() == f.target.size());
  std::vector<DomainDataset::Record> recs;
  recs.push_back({"x", f.target.image(0), std::nullopt, *f.target.target_item(0).gaze});
  CHECK_THROWS_AS(evaluate(params, DomainDataset(DomainRole::target, std::move(recs)), "t"), DataError);
}

TEST_CASE("feature dumps") {
  Fixture f;
  const auto teacher = train_teacher(f.source, f.cfg).params;
  const auto pseudo = generate_pseudo_labels(teacher, f.target, 0.5);
  const auto student = adapt_student(teacher, f.target, pseudo, f.cfg).student;
  const auto dir = oracle::scratch_dir("dump");
  dump_features(teacher, f.target.image(0), dir / "teacher");
  dump_features(student, f.target.image(0), dir / "student");
  const auto bt = load_feature_map(dir / "teacher" / "bottleneck.gzf");
  const auto dt = load_feature_map(dir / "teacher" / "decoder.gzf");
  CHECK(bt.channels == f.cfg.backbone.bottleneck_channels());
  CHECK(dt.channels == f.cfg.backbone.base_channels);
  CHECK(dt.height == 16);
  CHECK(load_feature_map(dir / "student" / "decoder.gzf").data != dt.data);
}
