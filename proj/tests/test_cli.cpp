#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "procrl/cli.hpp"
#include "procrl/config.hpp"
#include "procrl/errors.hpp"
#include "procrl/io.hpp"

using namespace procrl;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("procrl_cli_" + name);
  fs::remove_all(p);
  return p;
}

struct Invocation {
  int code = 0;
  std::string out;
  std::string err;
};

Invocation cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  Invocation r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

// Settings small enough for a unit test.
std::vector<std::string> tiny(const fs::path& run, const std::string& cmd) {
  return {cmd,
          "--run-dir", run.string(),
          "--seed", "3",
          "--set", "taskgen.count=20",
          "--set", "sft.epochs=2",
          "--set", "rl.steps=2",
          "--set", "rl.rollouts_per_step=8",
          "--set", "rl.num_checkpoints=2",
          "--set", "labeler.n_per_prompt=1",
          "--set", "labeler.K=2",
          "--set", "prm.epochs=1",
          "--set", "eval.n_samples=1",
          "--set", "eval.k_max=2"};
}

}  // namespace

TEST_CASE("taskgen with an empty corpus") {
  const fs::path run = fresh_dir("empty");
  const auto r = cli({"taskgen", "--run-dir", run.string(), "--set", "taskgen.count=0"});
  CHECK(r.code == kExitOk);
  CHECK(read_file(run / "taskgen" / "corpus.jsonl").empty());
  CHECK(fs::exists(run / "taskgen" / "config.json"));
  CHECK(fs::exists(run / "taskgen" / "stage.json"));
}

TEST_CASE("stages refuse to run before their inputs exist") {
  const fs::path run = fresh_dir("deps");
  CHECK(cli({"sft", "--run-dir", run.string()}).code == kExitMissingDependency);
  CHECK(cli({"rl-psgpo", "--run-dir", run.string()}).code == kExitMissingDependency);
  CHECK(cli({"eval", "--run-dir", run.string()}).code == kExitMissingDependency);
}

TEST_CASE("config errors exit with code 2") {
  const fs::path run = fresh_dir("cfg");
  CHECK(cli({"taskgen", "--run-dir", run.string(), "--set", "taskgen.nope=1"}).code == kExitConfig);
  CHECK(cli({"taskgen", "--run-dir", run.string(), "--set", "rl.reward.beta=-1"}).code ==
        kExitConfig);
  CHECK(cli({"taskgen", "--run-dir", run.string(), "--config", (run / "missing.json").string()})
            .code != kExitOk);
  CHECK(cli({"frobnicate"}).code == kExitConfig);
  CHECK(cli({}).code == kExitConfig);
}

TEST_CASE("config round trip") {
  RunConfig cfg;
  cfg.seed = 99;
  cfg.rl.steps = 7;
  cfg.sweep.n_per_prompt_grid = {0.5, 3};
  const auto j = config_to_json(cfg);
  const RunConfig back = config_from_json(j);
  CHECK(config_to_json(back) == j);
  CHECK(back.rl.steps == 7);

  nlohmann::json doc = nlohmann::json::object();
  apply_override(doc, "rl.reward.beta=0.5");
  apply_override(doc, "labeler.strategy=revised_only");
  CHECK(doc["rl"]["reward"]["beta"] == 0.5);
  CHECK(doc["labeler"]["strategy"] == "revised_only");
  CHECK_THROWS_AS(apply_override(doc, "no_equals_sign"), ConfigInvalid);
  CHECK(config_from_json(doc).rl.reward.beta == 0.5);
}

TEST_CASE("tiny pipeline through the CLI") {
  const fs::path run = fresh_dir("pipe");
  for (const std::string cmd : {"taskgen", "sft", "rl-baseline", "collect-prm-data", "train-prm",
                                "rl-psgpo", "eval", "report"}) {
    const auto r = cli(tiny(run, cmd));
    INFO(cmd << ": " << r.err);
    REQUIRE(r.code == kExitOk);
    CHECK(r.out == (run / cmd).string() + "\n");
  }
  CHECK(fs::exists(run / "rl-baseline" / "metrics.csv"));
  CHECK(fs::exists(run / "rl-baseline" / "ckpt_1" / "policy.bin"));
  CHECK(fs::exists(run / "train-prm" / "prm.bin"));
  CHECK(fs::exists(run / "rl-psgpo" / "dense" / "metrics.csv"));
  CHECK(fs::exists(run / "eval" / "eval.json"));
  CHECK(fs::exists(run / "report" / "report.json"));

  // The persisted config reproduces the stage.
  const fs::path copy = fresh_dir("pipe_copy");
  const fs::path cfg = run / "taskgen" / "config.json";
  CHECK(cli({"taskgen", "--run-dir", copy.string(), "--config", cfg.string()}).code == kExitOk);
  CHECK(read_file(copy / "taskgen" / "corpus.jsonl") == read_file(run / "taskgen" / "corpus.jsonl"));
}
