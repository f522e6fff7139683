#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out, err;
};

Run loco_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "loco");
  std::ostringstream out, err;
  Run r;
  r.code = loco::run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::map<std::string, std::string> dir_bytes(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = slurp(e.path());
  return out;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("loco_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Budgets small enough for a unit test; every stage still runs.
const std::vector<std::string> kSmall{"--seed", "5", "--completion_steps", "60", "--codec_steps", "40",
                                      "--epochs", "2", "--hidden", "6", "--batch", "4"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

const fs::path& dataset() {
  static const fs::path path = [] {
    const fs::path dir = scratch("data");
    const auto r = loco_cli({"generate", "--out", (dir / "d.jsonl").string(), "--count", "10",
                             "--seed", "3"});
    REQUIRE(r.code == 0);
    return dir / "d.jsonl";
  }();
  return path;
}

void train_all(const fs::path& models) {
  const std::string data = dataset().string();
  for (const std::string cmd : {"train-completion", "train-local", "train-global", "train-entangled"}) {
    const auto r = loco_cli(with({cmd, "--data", data, "--models", models.string()}, kSmall));
    INFO(cmd << ": " << r.err);
    REQUIRE(r.code == 0);
  }
}

}  // namespace

TEST_CASE("generate is deterministic") {
  const fs::path dir = scratch("gen");
  for (const char* name : {"a.jsonl", "b.jsonl"}) {
    REQUIRE(loco_cli({"generate", "--out", (dir / name).string(), "--count", "4", "--seed", "8"}).code == 0);
  }
  CHECK(slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl"));
  CHECK_FALSE(slurp(dir / "a.jsonl").empty());
}

TEST_CASE("training and evaluation reruns are bit-identical") {
  const fs::path a = scratch("models_a"), b = scratch("models_b");
  train_all(a);
  train_all(b);
  const auto ba = dir_bytes(a), bb = dir_bytes(b);
  CHECK(ba.size() == 5);  // four checkpoints and the manifest
  CHECK(ba == bb);

  const fs::path out = scratch("eval");
  for (const std::string method : {"full", "decomposition_only", "entangled", "zero_velocity"}) {
    for (const char* tag : {"1", "2"}) {
      const auto r = loco_cli(with({"evaluate", "--data", dataset().string(), "--models", a.string(),
                                    "--method", method, "--out", (out / (method + tag + ".json")).string(),
                                    "--text", (out / (method + tag + ".txt")).string()},
                                   {"--seed", "5"}));
      INFO(method << ": " << r.err);
      REQUIRE(r.code == 0);
    }
    CHECK(slurp(out / (method + "1.json")) == slurp(out / (method + "2.json")));
    CHECK(slurp(out / (method + "1.txt")) == slurp(out / (method + "2.txt")));
  }

  // A different seed changes the checkpoints.
  const fs::path c = scratch("models_c");
  REQUIRE(loco_cli({"train-completion", "--data", dataset().string(), "--models", c.string(),
                    "--seed", "6", "--completion_steps", "60"})
              .code == 0);
  CHECK(slurp(c / "completion.ckpt") != ba.at("completion.ckpt"));
}

TEST_CASE("forecast and plot write their outputs") {
  const fs::path models = scratch("models_fp"), out = scratch("fp");
  train_all(models);
  auto r = loco_cli(with({"forecast", "--data", dataset().string(), "--models", models.string(),
                          "--out", (out / "f.jsonl").string()},
                         kSmall));
  REQUIRE(r.code == 0);
  std::istringstream lines(slurp(out / "f.jsonl"));
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) ++n;
  CHECK(n == 10);

  r = loco_cli({"plot", "--data", dataset().string(), "--method", "constant_velocity", "--out",
                (out / "p.svg").string()});
  REQUIRE(r.code == 0);
  const std::string svg = slurp(out / "p.svg");
  CHECK(svg.starts_with("<svg"));
  CHECK(svg.find("class=\"prediction\"") != std::string::npos);
}

TEST_CASE("errors exit nonzero with a diagnostic") {
  const fs::path dir = scratch("err");
  auto r = loco_cli({});
  CHECK(r.code != 0);

  r = loco_cli({"evaluate", "--data", dataset().string(), "--method", "no_such_method", "--out",
                (dir / "x.json").string()});
  CHECK(r.code != 0);
  CHECK(r.err.find("error:") != std::string::npos);

  r = loco_cli({"train-local", "--data", dataset().string(), "--models", (dir / "empty").string()});
  CHECK(r.code != 0);
  CHECK_FALSE(r.err.empty());

  std::ofstream(dir / "bad.json") << R"({"seed": 1, "learning_rate": 0.1})";
  r = loco_cli({"generate", "--config", (dir / "bad.json").string(), "--out", (dir / "g.jsonl").string()});
  CHECK(r.code != 0);
  CHECK(r.err.find("learning_rate") != std::string::npos);

  r = loco_cli({"generate", "--out", (dir / "g.jsonl").string(), "--alpha_c", "2.0"});
  CHECK(r.code != 0);

  r = loco_cli({"evaluate", "--data", (dir / "missing.jsonl").string(), "--method", "zero_velocity",
                "--out", (dir / "x.json").string()});
  CHECK(r.code != 0);

  std::ofstream(dir / "broken.jsonl") << "{\"schema_version\": 1}\n";
  r = loco_cli({"evaluate", "--data", (dir / "broken.jsonl").string(), "--method", "zero_velocity",
                "--out", (dir / "x.json").string()});
  CHECK(r.code != 0);
  CHECK(r.err.find(":1") != std::string::npos);
}

TEST_CASE("config file and flag overrides") {
  const fs::path dir = scratch("cfg");
  std::ofstream(dir / "c.json") << R"({"seed": 9, "t_p": 6, "t_f": 4})";
  REQUIRE(loco_cli({"generate", "--config", (dir / "c.json").string(), "--count", "2", "--out",
                    (dir / "a.jsonl").string()})
              .code == 0);
  REQUIRE(loco_cli({"generate", "--config", (dir / "c.json").string(), "--count", "2", "--seed", "10",
                    "--out", (dir / "b.jsonl").string()})
              .code == 0);
  CHECK(slurp(dir / "a.jsonl") != slurp(dir / "b.jsonl"));
  CHECK(slurp(dir / "a.jsonl").find("\"t_p\":6") != std::string::npos);
}
