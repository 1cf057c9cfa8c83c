#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "gahcda/config.hpp"

namespace {

struct Result {
  int code = -1;
  std::string output;
};

Result run(const std::string& args) {
  const std::string cmd = std::string(GAHCDA_CLI_PATH) + " " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe)) r.output += buf.data();
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::filesystem::path fresh_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("gahcda_cli_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

const char* kTiny =
    "--set synth.image_size=16 --set synth.n_source=3 --set synth.n_target=3 --set synth.wall_min=2 "
    "--set synth.wall_max=3 --set backbone.depth=2 --set backbone.base_channels=4 --set teacher.epochs=1 "
    "--set teacher.batch_size=2 --set adapt.epochs=1 --set adapt.batch_size=2 -q";

}  // namespace

TEST_CASE("every subcommand's help lists every config key") {
  for (const char* sub : {"gen-synth", "train-teacher", "pseudo-label", "adapt", "evaluate", "ablate", "sweep", "plot",
                          "dump-features"}) {
    const auto r = run(std::string(sub) + " --help");
    CHECK(r.code == 0);
    for (const auto& key : gahcda::config_keys()) CHECK_MESSAGE(r.output.find(key.name) != std::string::npos, sub);
  }
}

TEST_CASE("usage errors exit with 1") {
  CHECK(run("").code == 1);
  CHECK(run("gen-synth --bogus").code == 1);
  const auto r = run("gen-synth --set adapt.lr=1");
  CHECK(r.code == 1);
  CHECK(r.output.find("unknown config key") != std::string::npos);
  CHECK(run("evaluate --checkpoint x --domain moon").code == 1);
}

TEST_CASE("runtime failures exit with 2") {
  const auto dir = fresh_dir("missing");
  const auto r = run("evaluate --checkpoint " + (dir / "nope.gzck").string() + " " + kTiny);
  CHECK(r.code == 2);
  CHECK(r.output.find("error:") != std::string::npos);
}

TEST_CASE("gen-synth then teacher, pseudo-label, adapt and evaluate") {
  const auto dir = fresh_dir("pipeline");
  const std::string tiny = kTiny;
  REQUIRE(run("gen-synth " + tiny + " --out " + (dir / "data").string()).code == 0);
  CHECK(std::filesystem::exists(dir / "data" / "source" / "images"));
  CHECK(std::filesystem::exists(dir / "data" / "target" / "gaze"));
  CHECK(std::filesystem::exists(dir / "data" / "manifest.json"));

  const std::string data = " --data " + (dir / "data").string();
  REQUIRE(run("train-teacher " + tiny + data + " --out " + (dir / "teacher").string()).code == 0);
  const auto teacher = dir / "teacher" / "teacher.gzck";
  REQUIRE(std::filesystem::exists(teacher));
  CHECK(std::filesystem::exists(dir / "teacher" / "loss.csv"));

  REQUIRE(run("pseudo-label " + tiny + data + " --teacher " + teacher.string() + " --out " + (dir / "pseudo").string())
              .code == 0);
  CHECK(std::filesystem::exists(dir / "pseudo" / "manifest.json"));

  const auto r = run("adapt " + tiny + data + " --teacher " + teacher.string() + " --pseudo " +
                     (dir / "pseudo").string() + " --out " + (dir / "adapt").string());
  REQUIRE(r.code == 0);
  const auto student = dir / "adapt" / "student.gzck";
  CHECK(std::filesystem::exists(student));

  CHECK(run("evaluate " + tiny + data + " --checkpoint " + student.string() + " --split all --out " +
            (dir / "eval").string())
            .code == 0);
  CHECK(run("dump-features " + tiny + data + " --checkpoint " + student.string() + " --item tgt_0000 --out " +
            (dir / "features").string())
            .code == 0);
}

TEST_CASE("re-running into a fresh directory reproduces hashes") {
  const std::string tiny = kTiny;
  const auto a = fresh_dir("rerun_a"), b = fresh_dir("rerun_b");
  REQUIRE(run("train-teacher " + tiny + " --out " + a.string()).code == 0);
  REQUIRE(run("train-teacher " + tiny + " --out " + b.string()).code == 0);
  auto hash = [](const std::filesystem::path& d) {
    std::ifstream in(d / "manifest.json");
    return nlohmann::json::parse(in).at("checkpoint").at("hash").get<std::string>();
  };
  CHECK(hash(a) == hash(b));
}
