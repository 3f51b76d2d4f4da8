#include "procrl/config.hpp"

#include <algorithm>
#include <cmath>

#include "procrl/errors.hpp"

namespace procrl {

using nlohmann::json;

json config_to_json(const RunConfig& c) {
  const TaskgenConfig& t = c.taskgen;
  const RewardConfig& r = c.rl.reward;
  const PpoConfig& p = c.rl.ppo;
  return json{
      {"seed", c.seed},
      {"adam",
       {{"beta1", c.sft.adam.beta1}, {"beta2", c.sft.adam.beta2}, {"eps", c.sft.adam.eps}}},
      {"taskgen",
       {{"count", t.count},
        {"min_len", t.min_len},
        {"max_len", t.max_len},
        {"arity_mix", t.arity_mix},
        {"tests_per_task", t.tests_per_task},
        {"input_min", t.input_min},
        {"input_max", t.input_max},
        {"length_decay", t.length_decay},
        {"train_fraction", c.train_fraction}}},
      {"sft",
       {{"epochs", c.sft.epochs},
        {"batch_size", c.sft.batch_size},
        {"lr", c.sft.adam.lr},
        {"max_grad_norm", c.sft.max_grad_norm}}},
      {"rl",
       {{"steps", c.rl.steps},
        {"rollouts_per_step", c.rl.rollouts_per_step},
        {"num_checkpoints", c.rl.num_checkpoints},
        {"policy_lr", c.rl.policy_adam.lr},
        {"value_lr", c.rl.value_adam.lr},
        {"temperature", c.rl.rollout_decode.temperature},
        {"top_p", c.rl.rollout_decode.top_p},
        {"psgpo_modes", c.psgpo_modes},
        {"reward",
         {{"lambda_fail", r.lambda_fail},
          {"lambda_pass", r.lambda_pass},
          {"beta", r.beta},
          {"length_normalization", r.length_normalization},
          {"gamma", r.gamma},
          {"gae_lambda", r.gae_lambda},
          {"clip_eps", r.clip_eps}}},
        {"ppo",
         {{"epochs", p.epochs},
          {"minibatch_size", p.minibatch_size},
          {"max_grad_norm", p.max_grad_norm},
          {"entropy_coef", p.entropy_coef},
          {"standardize_advantages", p.standardize_advantages}}}}},
      {"labeler",
       {{"n_per_prompt", c.collect.n_per_prompt},
        {"K", c.collect.K},
        {"step_group_size", c.collect.group_size},
        {"neutral_labels", c.collect.neutral_labels},
        {"temperature", c.collect.response_decode.temperature},
        {"top_p", c.collect.response_decode.top_p},
        {"strategy", c.strategy}}},
      {"prm",
       {{"epochs", c.prm.epochs}, {"batch_size", c.prm.batch_size}, {"lr", c.prm.adam.lr}}},
      {"eval",
       {{"n_samples", c.eval.n_samples},
        {"temperature", c.eval.temperature},
        {"top_p", c.eval.top_p},
        {"k_max", c.best_of_k.k_max},
        {"bok_temperature", c.best_of_k.temperature},
        {"bok_top_p", c.best_of_k.top_p},
        {"length_bins", c.length_bins}}},
      {"sweep",
       {{"strategies", c.sweep.strategies},
        {"n_per_prompt_grid", c.sweep.n_per_prompt_grid},
        {"mode", c.sweep.mode},
        {"rl_steps", c.sweep.rl_steps}}},
  };
}

namespace {

// Recursively overlays `patch` onto `base`, rejecting keys base lacks.
void overlay(json& base, const json& patch, const std::string& path) {
  if (!patch.is_object()) throw ConfigInvalid("config section '" + path + "' must be an object");
  for (const auto& [key, value] : patch.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (!base.contains(key)) throw ConfigInvalid("unknown config key '" + where + "'");
    json& slot = base[key];
    if (slot.is_object()) {
      overlay(slot, value, where);
    } else {
      slot = value;
    }
  }
}

template <typename T>
T field(const json& j, const char* section, const char* key) {
  try {
    return j.at(section).at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigInvalid(std::string("config ") + section + "." + key + ": " + e.what());
  }
}

template <typename T>
T nested(const json& j, const char* a, const char* b, const char* key) {
  try {
    return j.at(a).at(b).at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigInvalid(std::string("config ") + a + "." + b + "." + key + ": " + e.what());
  }
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigInvalid(what);
}

}  // namespace

RunConfig config_from_json(const json& patch) {
  json doc = config_to_json(RunConfig{});
  overlay(doc, patch, "");

  RunConfig c;
  try {
    c.seed = doc.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ConfigInvalid(std::string("config seed: ") + e.what());
  }
  AdamConfig adam;
  adam.beta1 = field<double>(doc, "adam", "beta1");
  adam.beta2 = field<double>(doc, "adam", "beta2");
  adam.eps = field<double>(doc, "adam", "eps");
  auto with_lr = [&](double lr) {
    AdamConfig a = adam;
    a.lr = lr;
    return a;
  };

  const auto count = field<std::int64_t>(doc, "taskgen", "count");
  require(count >= 0, "taskgen.count must be >= 0");
  c.taskgen.count = static_cast<std::size_t>(count);
  c.taskgen.min_len = field<int>(doc, "taskgen", "min_len");
  c.taskgen.max_len = field<int>(doc, "taskgen", "max_len");
  c.taskgen.arity_mix = field<double>(doc, "taskgen", "arity_mix");
  c.taskgen.tests_per_task = field<int>(doc, "taskgen", "tests_per_task");
  c.taskgen.input_min = field<int>(doc, "taskgen", "input_min");
  c.taskgen.input_max = field<int>(doc, "taskgen", "input_max");
  c.taskgen.length_decay = field<double>(doc, "taskgen", "length_decay");
  c.train_fraction = field<double>(doc, "taskgen", "train_fraction");

  c.sft.epochs = field<int>(doc, "sft", "epochs");
  c.sft.batch_size = field<int>(doc, "sft", "batch_size");
  c.sft.adam = with_lr(field<double>(doc, "sft", "lr"));
  c.sft.max_grad_norm = field<double>(doc, "sft", "max_grad_norm");

  c.rl.steps = field<int>(doc, "rl", "steps");
  c.rl.rollouts_per_step = field<int>(doc, "rl", "rollouts_per_step");
  c.rl.num_checkpoints = field<int>(doc, "rl", "num_checkpoints");
  c.rl.policy_adam = with_lr(field<double>(doc, "rl", "policy_lr"));
  c.rl.value_adam = with_lr(field<double>(doc, "rl", "value_lr"));
  c.rl.rollout_decode.temperature = field<double>(doc, "rl", "temperature");
  c.rl.rollout_decode.top_p = field<double>(doc, "rl", "top_p");
  c.psgpo_modes = field<std::vector<std::string>>(doc, "rl", "psgpo_modes");
  RewardConfig& r = c.rl.reward;
  r.lambda_fail = nested<double>(doc, "rl", "reward", "lambda_fail");
  r.lambda_pass = nested<double>(doc, "rl", "reward", "lambda_pass");
  r.beta = nested<double>(doc, "rl", "reward", "beta");
  r.length_normalization = nested<bool>(doc, "rl", "reward", "length_normalization");
  r.gamma = nested<double>(doc, "rl", "reward", "gamma");
  r.gae_lambda = nested<double>(doc, "rl", "reward", "gae_lambda");
  r.clip_eps = nested<double>(doc, "rl", "reward", "clip_eps");
  PpoConfig& p = c.rl.ppo;
  p.epochs = nested<int>(doc, "rl", "ppo", "epochs");
  p.minibatch_size = nested<int>(doc, "rl", "ppo", "minibatch_size");
  p.max_grad_norm = nested<double>(doc, "rl", "ppo", "max_grad_norm");
  p.entropy_coef = nested<double>(doc, "rl", "ppo", "entropy_coef");
  p.standardize_advantages = nested<bool>(doc, "rl", "ppo", "standardize_advantages");

  c.collect.n_per_prompt = field<int>(doc, "labeler", "n_per_prompt");
  c.collect.K = field<int>(doc, "labeler", "K");
  c.collect.group_size = field<int>(doc, "labeler", "step_group_size");
  c.collect.neutral_labels = field<bool>(doc, "labeler", "neutral_labels");
  c.collect.response_decode.temperature = field<double>(doc, "labeler", "temperature");
  c.collect.response_decode.top_p = field<double>(doc, "labeler", "top_p");
  c.strategy = field<std::string>(doc, "labeler", "strategy");

  c.prm.epochs = field<int>(doc, "prm", "epochs");
  c.prm.batch_size = field<int>(doc, "prm", "batch_size");
  c.prm.adam = with_lr(field<double>(doc, "prm", "lr"));

  c.eval.n_samples = field<int>(doc, "eval", "n_samples");
  c.eval.temperature = field<double>(doc, "eval", "temperature");
  c.eval.top_p = field<double>(doc, "eval", "top_p");
  c.eval.seed = c.seed;
  c.best_of_k.k_max = field<int>(doc, "eval", "k_max");
  c.best_of_k.temperature = field<double>(doc, "eval", "bok_temperature");
  c.best_of_k.top_p = field<double>(doc, "eval", "bok_top_p");
  c.best_of_k.seed = c.seed;
  c.length_bins = field<std::vector<double>>(doc, "eval", "length_bins");

  c.sweep.strategies = field<std::vector<std::string>>(doc, "sweep", "strategies");
  c.sweep.n_per_prompt_grid = field<std::vector<double>>(doc, "sweep", "n_per_prompt_grid");
  c.sweep.mode = field<std::string>(doc, "sweep", "mode");
  c.sweep.rl_steps = field<int>(doc, "sweep", "rl_steps");

  validate_config(c);
  return c;
}

void validate_config(const RunConfig& c) {
  const TaskgenConfig& t = c.taskgen;
  require(t.min_len >= 1 && t.min_len <= t.max_len && t.max_len < kMaxProgramLength,
          "taskgen lengths need 1 <= min_len <= max_len < 24");
  require(t.arity_mix >= 0.0 && t.arity_mix <= 1.0, "taskgen.arity_mix must lie in [0, 1]");
  require(t.length_decay > 0.0, "taskgen.length_decay must be positive");
  require(t.tests_per_task >= 1, "taskgen.tests_per_task must be >= 1");
  require(t.input_min < t.input_max, "taskgen.input_min must be below input_max");
  require(c.train_fraction > 0.0 && c.train_fraction <= 1.0,
          "taskgen.train_fraction must lie in (0, 1]");
  require(c.sft.epochs >= 0 && c.sft.batch_size >= 1, "sft epochs >= 0 and batch_size >= 1");
  require(c.rl.steps >= 0 && c.rl.rollouts_per_step >= 1 && c.rl.num_checkpoints >= 1,
          "rl.steps >= 0, rl.rollouts_per_step >= 1, rl.num_checkpoints >= 1");
  require(c.rl.ppo.epochs >= 1 && c.rl.ppo.minibatch_size >= 1,
          "rl.ppo.epochs and rl.ppo.minibatch_size must be >= 1");
  c.rl.reward.validate();
  for (const std::string& m : c.psgpo_modes) {
    const RlMode mode = rl_mode_from_name(m);
    require(mode != RlMode::kSparseBaseline, "rl.psgpo_modes must not list sparse_baseline");
  }
  require(c.collect.n_per_prompt >= 1 && c.collect.K >= 1 && c.collect.group_size >= 1,
          "labeler n_per_prompt, K and step_group_size must be >= 1");
  strategy_from_name(c.strategy);
  require(c.prm.epochs >= 0 && c.prm.batch_size >= 1, "prm epochs >= 0 and batch_size >= 1");
  require(c.eval.n_samples >= 1 && c.best_of_k.k_max >= 1, "eval n_samples and k_max >= 1");
  require(c.length_bins.size() >= 2 && std::is_sorted(c.length_bins.begin(), c.length_bins.end()) &&
              std::adjacent_find(c.length_bins.begin(), c.length_bins.end()) ==
                  c.length_bins.end(),
          "eval.length_bins needs >= 2 strictly increasing edges");
  for (const std::string& s : c.sweep.strategies) strategy_from_name(s);
  for (double n : c.sweep.n_per_prompt_grid) {
    require(n > 0.0 && (n < 1.0 || n == std::floor(n)),
            "sweep.n_per_prompt_grid entries must be whole numbers or fractions below 1");
  }
  require(rl_mode_from_name(c.sweep.mode) != RlMode::kSparseBaseline,
          "sweep.mode must use the PRM");
  require(c.sweep.rl_steps >= 0, "sweep.rl_steps must be >= 0");
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigInvalid("override '" + assignment + "' is not key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = raw;

  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
    if (part.empty()) throw ConfigInvalid("bad override key '" + key + "'");
    if (!node->is_object()) *node = json::object();
    if (dot == std::string::npos) {
      (*node)[part] = std::move(value);
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

}  // namespace procrl
