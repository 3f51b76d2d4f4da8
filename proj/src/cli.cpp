#include "procrl/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "procrl/errors.hpp"
#include "procrl/evalkit.hpp"
#include "procrl/io.hpp"
#include "procrl/svg.hpp"

namespace procrl {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void log(const std::string& msg) { std::clog << "[procrl] " << msg << std::endl; }

// Tracks the files a stage read so the run directory records what it was
// built from.
class Stage {
 public:
  Stage(const RunConfig& cfg, fs::path run_dir, std::string name, bool clear = true)
      : cfg_(cfg), run_dir_(std::move(run_dir)), name_(std::move(name)) {
    if (clear) fs::remove_all(dir());
    fs::create_directories(dir());
  }

  fs::path dir() const { return run_dir_ / name_; }

  // Fails with MissingDependency unless `stage` finished in this run dir.
  void require(const std::string& stage) const {
    const fs::path manifest = run_dir_ / stage / "stage.json";
    if (!fs::is_regular_file(manifest)) {
      throw MissingDependency("stage '" + name_ + "' needs '" + stage + "' to run first (" +
                              manifest.string() + " not found)");
    }
    const json m = json::parse(read_file(manifest), nullptr, false);
    if (m.is_discarded() || m.value("format_version", -1) != kStageFormatVersion) {
      throw MissingDependency("stage '" + stage + "' output has an unsupported format version");
    }
  }

  // Path of an input artifact; records its digest.
  fs::path input(const std::string& rel) {
    const fs::path p = run_dir_ / rel;
    if (!fs::is_regular_file(p)) throw MissingDependency("missing input " + p.string());
    inputs_[rel] = file_digest(p);
    return p;
  }

  void write(const std::string& rel, std::string_view contents) {
    write_file(dir() / rel, contents);
    outputs_.push_back(rel);
  }

  void save(const std::string& rel, const DenseNet& net, const std::string& role) {
    save_checkpoint(dir() / rel, net, role);
    outputs_.push_back(rel);
  }

  void finish() {
    write_file(dir() / "config.json", config_to_json(cfg_).dump(2) + "\n");
    json inputs = json::object();
    for (const auto& [k, v] : inputs_) inputs[k] = v;
    write_file(dir() / "inputs.json", inputs.dump(2) + "\n");
    std::sort(outputs_.begin(), outputs_.end());
    json outputs = json::object();
    for (const std::string& o : outputs_) outputs[o] = file_digest(dir() / o);
    write_file(dir() / "stage.json",
               json{{"stage", name_}, {"format_version", kStageFormatVersion},
                    {"outputs", outputs}}
                       .dump(2) +
                   "\n");
  }

 private:
  const RunConfig& cfg_;
  fs::path run_dir_;
  std::string name_;
  std::map<std::string, std::string> inputs_;
  std::vector<std::string> outputs_;
};

std::vector<Task> load_tasks(Stage& stage, const std::string& rel) {
  return load_corpus(stage.input(rel));
}

PolicyModel load_policy(Stage& stage, const std::string& rel) {
  return PolicyModel::from_net(load_checkpoint(stage.input(rel), "policy"));
}

ValueModel load_value(Stage& stage, const std::string& rel) {
  return ValueModel::from_net(load_checkpoint(stage.input(rel), "value"));
}

double greedy_pass(const PolicyModel& policy, std::span<const Task> tasks, std::uint64_t seed) {
  if (tasks.empty()) return 0.0;
  return pass_at_1(policy, tasks, EvalConfig{1, 0.0, 1.0, seed}).pass_at_1;
}

std::string loss_csv(const std::string& column, std::span<const double> values) {
  std::string out = "index," + column + "\n";
  for (std::size_t i = 0; i < values.size(); ++i) {
    out += std::to_string(i) + "," + format_double(values[i]) + "\n";
  }
  return out;
}

// Writes the policy/value checkpoints, metrics and summary of one RL run.
void write_rl_outputs(Stage& stage, const std::string& prefix, const RlResult& r) {
  stage.write(prefix + "metrics.csv", metrics_to_csv(r.metrics));
  stage.save(prefix + "policy.bin", r.policy.net, "policy");
  stage.save(prefix + "value.bin", r.value.net, "value");
  for (const RlCheckpoint& c : r.checkpoints) {
    const std::string d = prefix + "ckpt_" + std::to_string(c.step) + "/";
    stage.save(d + "policy.bin", c.policy.net, "policy");
    stage.save(d + "value.bin", c.value.net, "value");
  }
  json summary = {{"reference_digest_start", r.reference_digest_start},
                  {"reference_digest_end", r.reference_digest_end},
                  {"initial_value_prm_gap", r.initial_value_prm_gap},
                  {"checkpoints", json::array()}};
  for (const RlCheckpoint& c : r.checkpoints) summary["checkpoints"].push_back(c.step);
  if (!r.metrics.empty()) {
    const MetricsRow& last = r.metrics.back();
    summary["final"] = {{"pass_rate", last.pass_rate}, {"mean_len", last.mean_len},
                        {"mean_nop", last.mean_nop}, {"mean_kl", last.mean_kl}};
  }
  stage.write(prefix + "summary.json", summary.dump(2) + "\n");
}

std::vector<PolicyModel> baseline_checkpoints(Stage& stage) {
  const json summary = json::parse(read_file(stage.input("rl-baseline/summary.json")));
  std::vector<PolicyModel> out;
  for (const auto& step : summary.at("checkpoints")) {
    out.push_back(load_policy(
        stage, "rl-baseline/ckpt_" + std::to_string(step.get<int>()) + "/policy.bin"));
  }
  if (out.empty()) throw MissingDependency("rl-baseline produced no checkpoints");
  return out;
}

RlConfig rl_config_for(const RunConfig& cfg, RlMode mode) {
  RlConfig rl = cfg.rl;
  rl.mode = mode;
  rl.reward.neutral_labels_used_upstream = cfg.collect.neutral_labels;
  return rl;
}

}  // namespace

void stage_taskgen(const RunConfig& cfg, const fs::path& run_dir) {
  Stage stage(cfg, run_dir, "taskgen");
  log("taskgen: generating " + std::to_string(cfg.taskgen.count) + " tasks");
  const std::vector<Task> corpus = generate_corpus(cfg.taskgen, cfg.seed);
  const auto [train, heldout] = split_corpus(corpus, cfg.train_fraction, cfg.seed);
  stage.write("corpus.jsonl", corpus_to_jsonl(corpus));
  stage.write("train.jsonl", corpus_to_jsonl(train));
  stage.write("heldout.jsonl", corpus_to_jsonl(heldout));
  stage.finish();
}

void stage_sft(const RunConfig& cfg, const fs::path& run_dir) {
  Stage stage(cfg, run_dir, "sft");
  stage.require("taskgen");
  const std::vector<Task> train = load_tasks(stage, "taskgen/train.jsonl");
  std::vector<std::pair<Task, Program>> pairs;
  for (const Task& t : train) pairs.emplace_back(t, t.reference);

  PolicyModel policy = PolicyModel::init(cfg.seed);
  const double before = greedy_pass(policy, train, cfg.seed);
  log("sft: " + std::to_string(pairs.size()) + " pairs, " + std::to_string(cfg.sft.epochs) +
      " epochs");
  const SftResult fit = sft_train(policy, pairs, cfg.sft, cfg.seed);
  const double after = greedy_pass(policy, train, cfg.seed);
  log("sft: greedy train pass@1 " + format_double(before) + " -> " + format_double(after));

  stage.save("policy.bin", policy.net, "policy");
  stage.write("loss.csv", loss_csv("loss", fit.epoch_loss));
  stage.write("summary.json", json{{"greedy_train_pass_at_1_init", before},
                                   {"greedy_train_pass_at_1", after},
                                   {"pairs", pairs.size()}}
                                      .dump(2) +
                                  "\n");
  stage.finish();
}

void stage_rl_baseline(const RunConfig& cfg, const fs::path& run_dir) {
  Stage stage(cfg, run_dir, "rl-baseline");
  stage.require("taskgen");
  stage.require("sft");
  const std::vector<Task> train = load_tasks(stage, "taskgen/train.jsonl");
  const PolicyModel sft = load_policy(stage, "sft/policy.bin");
  log("rl-baseline: " + std::to_string(cfg.rl.steps) + " steps");
  const RlResult r = train_rl(rl_config_for(cfg, RlMode::kSparseBaseline), train, sft,
                              ValueModel::init(cfg.seed), nullptr, cfg.seed);
  write_rl_outputs(stage, "", r);
  stage.finish();
}

void stage_collect(const RunConfig& cfg, const fs::path& run_dir) {
  Stage stage(cfg, run_dir, "collect-prm-data");
  stage.require("taskgen");
  stage.require("rl-baseline");
  const std::vector<Task> train = load_tasks(stage, "taskgen/train.jsonl");
  const std::vector<PolicyModel> ckpts = baseline_checkpoints(stage);
  log("collect-prm-data: " + std::to_string(ckpts.size()) + " checkpoints x " +
      std::to_string(train.size()) + " tasks x " + std::to_string(cfg.collect.n_per_prompt));
  const PrmDataset data = collect_prm_dataset(ckpts, train, cfg.collect, cfg.seed);
  stage.write("prm_data.jsonl", records_to_jsonl(data.records));
  stage.write("summary.json", dataset_summary(data.records).dump(2) + "\n");
  stage.finish();
}

void stage_train_prm(const RunConfig& cfg, const fs::path& run_dir) {
  Stage stage(cfg, run_dir, "train-prm");
  stage.require("taskgen");
  stage.require("rl-baseline");
  stage.require("collect-prm-data");
  const std::vector<Task> train = load_tasks(stage, "taskgen/train.jsonl");
  const ValueModel init = load_value(stage, "rl-baseline/value.bin");
  const auto records =
      records_from_jsonl(read_file(stage.input("collect-prm-data/prm_data.jsonl")));
  const auto selected = select(records, strategy_from_name(cfg.strategy));
  log("train-prm: " + std::to_string(selected.size()) + " records (" + cfg.strategy + ")");
  const PrmTrainResult fit = train_prm(selected, train, init, cfg.prm, cfg.seed);
  stage.save("prm.bin", fit.model.net, "prm");
  stage.write("loss.csv", loss_csv("loss", fit.epoch_loss));
  stage.write("selected_summary.json", dataset_summary(selected).dump(2) + "\n");
  stage.finish();
}

void stage_rl_psgpo(const RunConfig& cfg, const fs::path& run_dir) {
  Stage stage(cfg, run_dir, "rl-psgpo");
  stage.require("taskgen");
  stage.require("sft");
  stage.require("train-prm");
  const std::vector<Task> train = load_tasks(stage, "taskgen/train.jsonl");
  const PolicyModel sft = load_policy(stage, "sft/policy.bin");
  const PrmModel prm =
      PrmModel::from_net(load_checkpoint(stage.input("train-prm/prm.bin"), "prm"));
  for (const std::string& name : cfg.psgpo_modes) {
    const RlMode mode = rl_mode_from_name(name);
    log("rl-psgpo: mode " + name + ", " + std::to_string(cfg.rl.steps) + " steps");
    const RlResult r = train_rl(rl_config_for(cfg, mode), train, sft,
                                ValueModel::init(cfg.seed), &prm, cfg.seed);
    write_rl_outputs(stage, name + "/", r);
  }
  stage.finish();
}

void stage_eval(const RunConfig& cfg, const fs::path& run_dir) {
  Stage stage(cfg, run_dir, "eval");
  stage.require("taskgen");
  stage.require("sft");
  const std::vector<Task> heldout = load_tasks(stage, "taskgen/heldout.jsonl");
  if (heldout.empty()) throw ConfigInvalid("held-out split is empty; lower taskgen.train_fraction");

  std::vector<std::pair<std::string, PolicyModel>> policies;
  policies.emplace_back("sft", load_policy(stage, "sft/policy.bin"));
  if (fs::is_regular_file(run_dir / "rl-baseline/stage.json")) {
    policies.emplace_back("sparse_baseline", load_policy(stage, "rl-baseline/policy.bin"));
  }
  if (fs::is_regular_file(run_dir / "rl-psgpo/stage.json")) {
    for (const char* m : {"dense", "value_init", "dense_and_value_init"}) {
      if (fs::is_regular_file(run_dir / "rl-psgpo" / m / "policy.bin")) {
        policies.emplace_back(m, load_policy(stage, std::string("rl-psgpo/") + m + "/policy.bin"));
      }
    }
  }

  json doc = {{"split", "heldout"}, {"tasks", heldout.size()}, {"policies", json::array()},
              {"length_delta", json::array()}};
  std::map<std::string, PassAt1Result> results;
  for (const auto& [name, policy] : policies) {
    log("eval: " + name);
    PassAt1Result pass = pass_at_1(policy, heldout, cfg.eval);
    json entry = pass_result_to_json(pass);
    entry["name"] = name;
    entry["best_of_k"] = best_of_k_curve(policy, heldout, cfg.best_of_k);
    doc["policies"].push_back(std::move(entry));
    results.emplace(name, std::move(pass));
  }
  if (results.count("sparse_baseline")) {
    for (const auto& [name, policy] : policies) {
      if (name == "sft" || name == "sparse_baseline") continue;
      json d = length_delta_to_json(length_stratified_delta(
          results.at(name), results.at("sparse_baseline"), cfg.length_bins));
      d["comparison"] = name + " - sparse_baseline";
      doc["length_delta"].push_back(std::move(d));
    }
  }
  stage.write("eval.json", doc.dump(2) + "\n");
  stage.finish();
}

void stage_report(const RunConfig& cfg, const fs::path& run_dir,
                  const std::vector<fs::path>& extra_runs) {
  std::vector<fs::path> runs{run_dir};
  runs.insert(runs.end(), extra_runs.begin(), extra_runs.end());
  // Render into a scratch directory first so the report never reads itself.
  const fs::path scratch = run_dir / ".report.tmp";
  fs::remove_all(scratch);
  render_report(runs, scratch);
  Stage stage(cfg, run_dir, "report");
  for (const auto& e : fs::directory_iterator(scratch)) {
    fs::rename(e.path(), stage.dir() / e.path().filename());
  }
  fs::remove_all(scratch);
  stage.finish();
}

namespace {

// Records of the first n responses per prompt; fractional n keeps a single
// response on a seeded subsample of round(n * |tasks|) prompts.
std::vector<PrefixLabelRecord> subsample(std::span<const PrefixLabelRecord> records, double n,
                                         std::span<const Task> tasks, std::uint64_t seed) {
  std::vector<PrefixLabelRecord> out;
  if (n >= 1.0) {
    for (const auto& r : records) {
      if (r.response_id < static_cast<int>(n)) out.push_back(r);
    }
    return out;
  }
  std::vector<std::string> ids;
  for (const Task& t : tasks) ids.push_back(t.id);
  Rng rng = substream(seed, {tag(StreamTag::kSubsample)});
  for (std::size_t i = ids.size(); i > 1; --i) {
    std::swap(ids[i - 1], ids[static_cast<std::size_t>(
                              uniform_int(rng, 0, static_cast<std::int64_t>(i - 1)))]);
  }
  const auto keep = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(n * static_cast<double>(ids.size()))));
  ids.resize(std::min(keep, ids.size()));
  std::sort(ids.begin(), ids.end());
  for (const auto& r : records) {
    if (r.response_id == 0 && std::binary_search(ids.begin(), ids.end(), r.task_id)) {
      out.push_back(r);
    }
  }
  return out;
}

std::size_t prompt_count(std::span<const PrefixLabelRecord> records) {
  std::vector<std::pair<int, std::string>> keys;
  for (const auto& r : records) keys.emplace_back(r.checkpoint_id, r.task_id);
  std::sort(keys.begin(), keys.end());
  return static_cast<std::size_t>(std::unique(keys.begin(), keys.end()) - keys.begin());
}

struct ArmResult {
  std::size_t records = 0;
  std::size_t prompts = 0;
  std::optional<double> pass_at_1;
  std::optional<double> final_train_pass;
};

}  // namespace

void stage_sweep(const RunConfig& cfg, const fs::path& run_dir) {
  Stage stage(cfg, run_dir, "sweep");
  stage.require("taskgen");
  stage.require("sft");
  stage.require("rl-baseline");
  const std::vector<Task> train = load_tasks(stage, "taskgen/train.jsonl");
  const std::vector<Task> heldout = load_tasks(stage, "taskgen/heldout.jsonl");
  if (heldout.empty()) throw ConfigInvalid("held-out split is empty; lower taskgen.train_fraction");
  const PolicyModel sft = load_policy(stage, "sft/policy.bin");
  const ValueModel init = load_value(stage, "rl-baseline/value.bin");

  double max_n = static_cast<double>(cfg.collect.n_per_prompt);
  for (double n : cfg.sweep.n_per_prompt_grid) max_n = std::max(max_n, std::ceil(n));
  const int needed = static_cast<int>(max_n);

  // Response streams are independent per response id, so a larger
  // collection contains the smaller ones exactly.
  std::vector<PrefixLabelRecord> records;
  if (fs::is_regular_file(run_dir / "collect-prm-data/stage.json") &&
      cfg.collect.n_per_prompt >= needed) {
    records = records_from_jsonl(read_file(stage.input("collect-prm-data/prm_data.jsonl")));
  } else {
    CollectConfig cc = cfg.collect;
    cc.n_per_prompt = needed;
    log("sweep: collecting " + std::to_string(needed) + " responses per prompt");
    records = collect_prm_dataset(baseline_checkpoints(stage), train, cc, cfg.seed)
                  .records;
    stage.write("prm_data.jsonl", records_to_jsonl(records));
  }

  RlConfig rl = rl_config_for(cfg, rl_mode_from_name(cfg.sweep.mode));
  if (cfg.sweep.rl_steps > 0) rl.steps = cfg.sweep.rl_steps;

  auto run_arm = [&](const std::string& arm, std::span<const PrefixLabelRecord> data) {
    ArmResult res;
    res.records = data.size();
    res.prompts = prompt_count(data);
    stage.write("labels_" + arm + ".json", dataset_summary(data).dump(2) + "\n");
    if (data.empty()) {
      log("sweep: arm " + arm + " has no records; skipped");
      return res;
    }
    log("sweep: arm " + arm + " (" + std::to_string(data.size()) + " records)");
    const PrmTrainResult fit = train_prm(data, train, init, cfg.prm, cfg.seed);
    const RlResult r = train_rl(rl, train, sft, ValueModel::init(cfg.seed), &fit.model, cfg.seed);
    stage.write(arm + "/metrics.csv", metrics_to_csv(r.metrics));
    res.pass_at_1 = pass_at_1(r.policy, heldout, cfg.eval).pass_at_1;
    if (!r.metrics.empty()) res.final_train_pass = r.metrics.back().pass_rate;
    return res;
  };
  auto cell = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };

  json report = {{"mode", cfg.sweep.mode}, {"rl_steps", rl.steps},
                 {"strategies", json::array()}, {"scaling", json::array()}};

  const auto full = subsample(records, static_cast<double>(cfg.collect.n_per_prompt), train,
                              cfg.seed);
  std::string strategies_csv = "strategy,records,prompts,heldout_pass_at_1,final_train_pass_rate\n";
  Series strat_series{"heldout pass@1", {}, {}};
  for (std::size_t i = 0; i < cfg.sweep.strategies.size(); ++i) {
    const std::string& name = cfg.sweep.strategies[i];
    const auto selected = select(full, strategy_from_name(name));
    const ArmResult res = run_arm("strategy_" + name, selected);
    strategies_csv += name + "," + std::to_string(res.records) + "," +
                      std::to_string(res.prompts) + "," + cell(res.pass_at_1) + "," +
                      cell(res.final_train_pass) + "\n";
    strat_series.x.push_back(static_cast<double>(i));
    strat_series.y.push_back(res.pass_at_1.value_or(std::nan("")));
    report["strategies"].push_back(
        {{"strategy", name}, {"records", res.records}, {"prompts", res.prompts},
         {"heldout_pass_at_1", res.pass_at_1 ? json(*res.pass_at_1) : json(nullptr)}});
  }
  stage.write("strategies.csv", strategies_csv);
  stage.write("strategies.svg", render_svg({"Selection strategy vs held-out Pass@1",
                                            "strategy index", "pass@1", /*bars=*/true},
                                           {strat_series}));

  std::string scaling_csv = "n_per_prompt,records,prompts,heldout_pass_at_1,final_train_pass_rate\n";
  Series scale_series{"heldout pass@1", {}, {}};
  const SelectionStrategy strategy = strategy_from_name(cfg.strategy);
  for (double n : cfg.sweep.n_per_prompt_grid) {
    const auto data = select(subsample(records, n, train, cfg.seed), strategy);
    const ArmResult res = run_arm("n_" + format_double(n), data);
    scaling_csv += format_double(n) + "," + std::to_string(res.records) + "," +
                   std::to_string(res.prompts) + "," + cell(res.pass_at_1) + "," +
                   cell(res.final_train_pass) + "\n";
    scale_series.x.push_back(n);
    scale_series.y.push_back(res.pass_at_1.value_or(std::nan("")));
    report["scaling"].push_back(
        {{"n_per_prompt", n}, {"records", res.records}, {"prompts", res.prompts},
         {"heldout_pass_at_1", res.pass_at_1 ? json(*res.pass_at_1) : json(nullptr)}});
  }
  stage.write("scaling.csv", scaling_csv);
  stage.write("scaling.svg", render_svg({"PRM data scale vs held-out Pass@1",
                                         "responses per prompt", "pass@1"},
                                        {scale_series}));
  stage.write("report.json", report.dump(2) + "\n");
  stage.finish();
}

void run_pipeline(const RunConfig& cfg, const fs::path& run_dir) {
  stage_taskgen(cfg, run_dir);
  stage_sft(cfg, run_dir);
  stage_rl_baseline(cfg, run_dir);
  stage_collect(cfg, run_dir);
  stage_train_prm(cfg, run_dir);
  stage_rl_psgpo(cfg, run_dir);
  stage_eval(cfg, run_dir);
  stage_report(cfg, run_dir);
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Process-supervised RL workbench for a toy program-synthesis task"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string run_dir_flag;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> extra_runs;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--set", overrides, "dotted.key=value override (repeatable)");
    sub->add_option("--run-dir", run_dir_flag, "run directory (default $PROCRL_RUN_DIR or ./run)");
    sub->add_option("--seed", seed, "global seed");
  };
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"taskgen", "generate and split the task corpus"},
      {"sft", "behaviour-clone reference programs"},
      {"rl-baseline", "PPO with the unit-test reward only"},
      {"collect-prm-data", "label baseline checkpoint responses by binary search"},
      {"train-prm", "fit the process reward model"},
      {"rl-psgpo", "PPO with PRM dense rewards and/or value init"},
      {"eval", "held-out Pass@1, Best-of-K and length deltas"},
      {"report", "render CSV/JSON/SVG reports"},
      {"sweep", "selection-strategy and data-scaling sweeps"},
  };
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    add_common(sub);
    subs[name] = sub;
  }
  subs["report"]->add_option("runs", extra_runs, "additional run directories to include");

  std::vector<std::string> argv_store{"procrl"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (std::string& s : argv_store) argv.push_back(s.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    json doc = json::object();
    if (!config_path.empty()) {
      doc = json::parse(read_file(config_path), nullptr, false);
      if (doc.is_discarded()) throw ConfigInvalid("config file is not valid JSON: " + config_path);
    }
    for (const std::string& o : overrides) apply_override(doc, o);
    if (seed) doc["seed"] = *seed;
    const RunConfig cfg = config_from_json(doc);

    fs::path run_dir = "run";
    if (!run_dir_flag.empty()) {
      run_dir = run_dir_flag;
    } else if (const char* env = std::getenv("PROCRL_RUN_DIR"); env && *env) {
      run_dir = env;
    }
    fs::create_directories(run_dir);

    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "taskgen") stage_taskgen(cfg, run_dir);
    else if (cmd == "sft") stage_sft(cfg, run_dir);
    else if (cmd == "rl-baseline") stage_rl_baseline(cfg, run_dir);
    else if (cmd == "collect-prm-data") stage_collect(cfg, run_dir);
    else if (cmd == "train-prm") stage_train_prm(cfg, run_dir);
    else if (cmd == "rl-psgpo") stage_rl_psgpo(cfg, run_dir);
    else if (cmd == "eval") stage_eval(cfg, run_dir);
    else if (cmd == "report") {
      std::vector<fs::path> extra(extra_runs.begin(), extra_runs.end());
      stage_report(cfg, run_dir, extra);
    } else if (cmd == "sweep") stage_sweep(cfg, run_dir);
    out << (run_dir / cmd).string() << "\n";
    return kExitOk;
  } catch (const ConfigInvalid& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const MissingDependency& e) {
    err << "missing dependency: " << e.what() << "\n";
    return kExitMissingDependency;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace procrl
