#include <doctest.h>

#include <fstream>

#include "gahcda/config.hpp"
#include "oracles.hpp"

using namespace gahcda;

TEST_CASE("reference profile is the default") {
  const RunConfig cfg;
  CHECK(cfg.teacher.epochs == 200);
  CHECK(cfg.teacher.batch_size == 32);
  CHECK(cfg.teacher.learning_rate == 1e-5);
  CHECK(cfg.adapt == cfg.teacher);
  CHECK(cfg.pseudo_threshold == 0.5);
  CHECK(cfg.w_floor == 0.2);
  CHECK_NOTHROW(validate(cfg));
}

TEST_CASE("desk profile shrinks the schedule") {
  RunConfig cfg;
  apply_profile(cfg, "desk");
  CHECK(cfg.profile == "desk");
  CHECK(cfg.teacher.epochs < 200);
  CHECK(cfg.adapt.epochs < 200);
  CHECK_NOTHROW(validate(cfg));
  CHECK_THROWS_WITH_AS(apply_profile(cfg, "fast"), doctest::Contains("unknown profile"), ValidationError);
}

TEST_CASE("overrides") {
  RunConfig cfg;
  apply_override(cfg, "adapt.learning_rate=2e-4");
  apply_override(cfg, "lambda.gb=0.5");
  apply_override(cfg, "strict=false");
  apply_override(cfg, "sweep.values=0,1.5");
  apply_override(cfg, "synth.seed=99");
  CHECK(cfg.adapt.learning_rate == 2e-4);
  CHECK(cfg.lambdas.gb == 0.5);
  CHECK_FALSE(cfg.strict);
  CHECK(cfg.sweep_values == std::vector<double>{0.0, 1.5});
  CHECK(cfg.synth.seed == 99u);
  CHECK_THROWS_WITH_AS(apply_override(cfg, "adapt.lr=1"), doctest::Contains("unknown config key 'adapt.lr'"),
                       ValidationError);
  CHECK_THROWS_AS(apply_override(cfg, "teacher.epochs=ten"), ValidationError);
  CHECK_THROWS_AS(apply_override(cfg, "noequals"), ValidationError);
}

TEST_CASE("validation rejects bad values") {
  RunConfig cfg;
  cfg.adapt.learning_rate = 0.0;
  CHECK_THROWS_WITH_AS(validate(cfg), "learning rate must be > 0", ValidationError);
  cfg = RunConfig{};
  cfg.teacher.epochs = 0;
  CHECK_THROWS_AS(validate(cfg), ValidationError);
  cfg = RunConfig{};
  cfg.pseudo_threshold = 1.0;
  CHECK_THROWS_AS(validate(cfg), ValidationError);
  cfg = RunConfig{};
  cfg.w_floor = 0.0;
  CHECK_THROWS_WITH_AS(validate(cfg), "bad weight floor", ValidationError);
  cfg = RunConfig{};
  cfg.lambdas = LossWeights{0, 0, 0, 0};
  CHECK_THROWS_WITH_AS(validate(cfg), "no active objective", ValidationError);
}

TEST_CASE("TOML and JSON files load the same config") {
  const auto dir = oracle::scratch_dir("config_files");
  {
    std::ofstream toml(dir / "c.toml");
    toml << "profile = \"desk\"\nseed = 4\n[adapt]\nepochs = 3\n[lambda]\ngb = 0.25\n[synth]\nblur_sigma = 0.5\n";
    std::ofstream json(dir / "c.json");
    json << R"({"lambda.gb": 0.25, "adapt": {"epochs": 3}, "seed": 4, "profile": "desk", "synth.blur_sigma": 0.5})";
  }
  const auto a = load_config(dir / "c.toml"), b = load_config(dir / "c.json");
  CHECK(a == b);
  CHECK(a.profile == "desk");
  CHECK(a.adapt.epochs == 3);  // applied after the profile
  CHECK(a.lambdas.gb == 0.25);
  CHECK(a.synth.blur_sigma == 0.5);
  CHECK(config_from_json(config_to_json(a)) == a);

  {
    std::ofstream bad(dir / "bad.toml");
    bad << "[adapt]\nlearnig_rate = 1.0\n";
  }
  CHECK_THROWS_WITH_AS(load_config(dir / "bad.toml"), doctest::Contains("learnig_rate"), ValidationError);
  CHECK_THROWS_AS(load_config(dir / "missing.toml"), ValidationError);
}

TEST_CASE("config hash ignores the output directory only") {
  RunConfig a, b;
  b.output_dir = "elsewhere";
  CHECK(config_hash(a) == config_hash(b));
  b.seed = 1;
  CHECK(config_hash(a) != config_hash(b));
  CHECK(config_hash(a).size() == 40);
}

TEST_CASE("every key is described") {
  const auto text = describe_config_keys(RunConfig{});
  for (const auto& key : config_keys()) CHECK(text.find(key.name) != std::string::npos);
  CHECK(text.find("adapt.learning_rate") != std::string::npos);
}
