#include "procrl/rl.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "procrl/errors.hpp"
#include "procrl/io.hpp"
#include "procrl/parallel.hpp"

namespace procrl {

std::string_view rl_mode_name(RlMode mode) {
  switch (mode) {
    case RlMode::kSparseBaseline:
      return "sparse_baseline";
    case RlMode::kDense:
      return "dense";
    case RlMode::kValueInit:
      return "value_init";
    case RlMode::kDenseAndValueInit:
      return "dense_and_value_init";
  }
  return "sparse_baseline";
}

RlMode rl_mode_from_name(std::string_view name) {
  for (auto m : {RlMode::kSparseBaseline, RlMode::kDense, RlMode::kValueInit,
                 RlMode::kDenseAndValueInit}) {
    if (rl_mode_name(m) == name) return m;
  }
  throw ConfigInvalid("unknown RL mode '" + std::string(name) + "'");
}

bool mode_uses_dense(RlMode mode) {
  return mode == RlMode::kDense || mode == RlMode::kDenseAndValueInit;
}

bool mode_uses_value_init(RlMode mode) {
  return mode == RlMode::kValueInit || mode == RlMode::kDenseAndValueInit;
}

void RewardConfig::validate() const {
  if (lambda_fail < 0.0 || lambda_pass < 0.0) throw ConfigInvalid("lambda must be >= 0");
  if (beta < 0.0) throw ConfigInvalid("beta must be >= 0");
  if (!(gae_lambda > 0.0 && gae_lambda <= 1.0)) throw ConfigInvalid("gae_lambda must lie in (0, 1]");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigInvalid("gamma must lie in (0, 1]");
  if (!(clip_eps > 0.0)) throw ConfigInvalid("clip_eps must be positive");
}

RewardParts compose_reward_parts(std::span<const Token> response, int r_ut,
                                 std::span<const double> prm_scores,
                                 std::span<const double> logp,
                                 std::span<const double> ref_logp,
                                 const RewardConfig& cfg) {
  const std::size_t T = response.size();
  if (T == 0 || prm_scores.size() != T || logp.size() != T || ref_logp.size() != T) {
    throw LengthMismatch("reward inputs must all have the response length T >= 1");
  }
  RewardParts parts;
  parts.reward.resize(T);
  parts.dense.assign(T, 0.0);
  parts.kl.resize(T);
  const double weight = cfg.lambda_for(r_ut) *
                        (cfg.length_normalization ? 1.0 / static_cast<double>(T) : 1.0);
  for (std::size_t t = 0; t < T; ++t) {
    if (cfg.use_dense_reward) parts.dense[t] = weight * prm_scores[t];
    parts.kl[t] = logp[t] - ref_logp[t];
    parts.reward[t] = parts.dense[t] - cfg.beta * parts.kl[t];
  }
  parts.reward[T - 1] += static_cast<double>(r_ut);
  return parts;
}

std::vector<double> compose_rewards(std::span<const Token> response, int r_ut,
                                    std::span<const double> prm_scores,
                                    std::span<const double> logp,
                                    std::span<const double> ref_logp,
                                    const RewardConfig& cfg) {
  return compose_reward_parts(response, r_ut, prm_scores, logp, ref_logp, cfg).reward;
}

GaeResult gae(std::span<const double> rewards, std::span<const double> values,
              double gamma, double gae_lambda) {
  if (rewards.size() != values.size()) {
    throw LengthMismatch("rewards and values must have equal length");
  }
  const std::size_t T = rewards.size();
  GaeResult out;
  out.advantages.resize(T);
  out.returns.resize(T);
  double running = 0.0;
  for (std::size_t k = T; k-- > 0;) {
    const double next_value = k + 1 < T ? values[k + 1] : 0.0;
    const double delta = rewards[k] + gamma * next_value - values[k];
    running = delta + gamma * gae_lambda * running;
    out.advantages[k] = running;
    out.returns[k] = running + values[k];
  }
  return out;
}

void append_response(RolloutBatch& batch, const TaskFeatures& task,
                     const ResponseRecord& info, std::span<const Token> tokens,
                     std::span<const double> logp, std::span<const double> ref_logp,
                     std::span<const double> values, std::span<const double> rewards,
                     const GaeResult& gae_result) {
  ResponseRecord record = info;
  record.first_step = batch.size();
  record.length = tokens.size();
  std::vector<double> features(FeatureSpec::kDim);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    featurize(task, tokens.first(t), features);
    batch.features.insert(batch.features.end(), features.begin(), features.end());
    batch.actions.push_back(token_id(tokens[t]));
    batch.behavior_logp.push_back(logp[t]);
    batch.ref_logp.push_back(ref_logp[t]);
    batch.values.push_back(values[t]);
    batch.rewards.push_back(rewards[t]);
    batch.terminal.push_back(t + 1 == tokens.size());
    batch.advantages.push_back(gae_result.advantages[t]);
    batch.returns.push_back(gae_result.returns[t]);
  }
  batch.responses.push_back(std::move(record));
}

void standardize(std::span<double> values) {
  if (values.empty()) return;
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  for (double& v : values) v = (v - mean) / (sd + 1e-8);
}

double ppo_policy_loss(const PolicyModel& policy, const RolloutBatch& batch,
                       std::span<const std::size_t> indices, double clip_eps,
                       double entropy_coef, std::span<double> grads,
                       double* clip_fraction, double* approx_kl) {
  if (indices.empty()) return 0.0;
  ForwardCache cache;
  std::vector<double> grad_out(kVocabSize);
  const double inv = 1.0 / static_cast<double>(indices.size());
  double loss = 0.0;
  std::size_t clipped = 0;
  double kl = 0.0;
  for (std::size_t i : indices) {
    forward(policy.net, batch.features_of(i), cache);
    Logits logits{};
    std::copy(cache.output().begin(), cache.output().end(), logits.begin());
    const Distribution p = softmax(logits);
    const auto a = static_cast<std::size_t>(batch.actions[i]);
    const double logp = std::log(std::max(p[a], 1e-300));
    const double ratio = std::exp(logp - batch.behavior_logp[i]);
    const double adv = batch.advantages[i];
    const double clipped_ratio = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
    const double unclipped_obj = ratio * adv;
    const double clipped_obj = clipped_ratio * adv;
    const bool active = unclipped_obj <= clipped_obj;
    loss -= std::min(unclipped_obj, clipped_obj) * inv;
    if (!active) ++clipped;
    kl += (batch.behavior_logp[i] - logp) * inv;

    double entropy = 0.0;
    for (double q : p) {
      if (q > 0.0) entropy -= q * std::log(q);
    }
    loss -= entropy_coef * entropy * inv;

    for (int v = 0; v < kVocabSize; ++v) {
      const auto vi = static_cast<std::size_t>(v);
      double g = 0.0;
      // d(-r A)/dz_v = -A r (1[v = a] - p_v)
      if (active) g += adv * ratio * (p[vi] - (vi == a ? 1.0 : 0.0));
      // d(-c H)/dz_v = c p_v (log p_v + H)
      if (entropy_coef != 0.0 && p[vi] > 0.0) {
        g += entropy_coef * p[vi] * (std::log(p[vi]) + entropy);
      }
      grad_out[vi] = g * inv;
    }
    backward_accumulate(policy.net, cache, grad_out, grads);
  }
  if (clip_fraction) *clip_fraction = static_cast<double>(clipped) * inv;
  if (approx_kl) *approx_kl = kl;
  return loss;
}

double value_loss(const ValueModel& value, const RolloutBatch& batch,
                  std::span<const std::size_t> indices, std::span<double> grads) {
  if (indices.empty()) return 0.0;
  ForwardCache cache;
  const double inv = 1.0 / static_cast<double>(indices.size());
  double loss = 0.0;
  for (std::size_t i : indices) {
    forward(value.net, batch.features_of(i), cache);
    const double diff = cache.output()[0] - batch.returns[i];
    loss += diff * diff * inv;
    const double g = 2.0 * diff * inv;
    backward_accumulate(value.net, cache, std::span(&g, 1), grads);
  }
  return loss;
}

PpoStats ppo_update(PolicyModel& policy, ValueModel& value, RolloutBatch& batch,
                    const RewardConfig& reward, const PpoConfig& cfg,
                    AdamState& policy_adam, AdamState& value_adam,
                    std::uint64_t stream) {
  PpoStats stats;
  if (batch.size() == 0) return stats;
  if (cfg.standardize_advantages) standardize(batch.advantages);

  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> policy_grads(policy.net.params().size());
  std::vector<double> value_grads(value.net.params().size());
  const auto mb = static_cast<std::size_t>(std::max(1, cfg.minibatch_size));
  std::size_t updates = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng = substream(stream, {static_cast<std::uint64_t>(epoch)});
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(i - 1)));
      std::swap(order[i - 1], order[j]);
    }
    for (std::size_t start = 0; start < order.size(); start += mb) {
      const auto indices = std::span(order).subspan(start, std::min(mb, order.size() - start));
      std::fill(policy_grads.begin(), policy_grads.end(), 0.0);
      std::fill(value_grads.begin(), value_grads.end(), 0.0);
      double clip_fraction = 0.0;
      double approx_kl = 0.0;
      stats.policy_loss += ppo_policy_loss(policy, batch, indices, reward.clip_eps,
                                           cfg.entropy_coef, policy_grads, &clip_fraction,
                                           &approx_kl);
      stats.value_loss += value_loss(value, batch, indices, value_grads);
      stats.clip_fraction += clip_fraction;
      stats.approx_kl += approx_kl;
      clip_grad_norm(policy_grads, cfg.max_grad_norm);
      clip_grad_norm(value_grads, cfg.max_grad_norm);
      adam_step(policy.net, policy_grads, policy_adam);
      adam_step(value.net, value_grads, value_adam);
      ++updates;
    }
  }
  const double inv = 1.0 / static_cast<double>(std::max<std::size_t>(1, updates));
  stats.policy_loss *= inv;
  stats.value_loss *= inv;
  stats.clip_fraction *= inv;
  stats.approx_kl *= inv;
  return stats;
}

std::string metrics_to_csv(std::span<const MetricsRow> rows) {
  std::string out(kMetricsHeader);
  out += '\n';
  for (const MetricsRow& r : rows) {
    out += std::to_string(r.step) + ',' + r.mode + ',' + format_double(r.pass_rate) + ',' +
           format_double(r.mean_reward) + ',' + format_double(r.mean_dense) + ',' +
           format_double(r.mean_kl) + ',' + format_double(r.mean_len) + ',' +
           format_double(r.mean_nop) + ',' + format_double(r.policy_loss) + ',' +
           format_double(r.value_loss) + '\n';
  }
  return out;
}

std::vector<int> checkpoint_steps(int steps, int n) {
  std::vector<int> out;
  if (steps <= 0 || n <= 0) return out;
  for (int i = 1; i <= n; ++i) {
    const int s = static_cast<int>(std::lround(static_cast<double>(steps) * i / n));
    if (s >= 1 && (out.empty() || out.back() != s)) out.push_back(s);
  }
  return out;
}

namespace {

struct Rollout {
  std::size_t task_index = 0;
  Program tokens;
  std::vector<double> logp;
  std::vector<double> ref_logp;
  std::vector<double> values;
  std::vector<double> prm_scores;
  int r_ut = 0;
};

}  // namespace

RolloutBatch collect_rollouts(const PolicyModel& policy, const PolicyModel& reference,
                              const ValueModel& value, const PrmModel* prm,
                              std::span<const Task> tasks,
                              std::span<const TaskFeatures> encoded,
                              const RlConfig& cfg, int step, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(cfg.rollouts_per_step);
  std::vector<Rollout> rollouts(n);
  const bool dense = cfg.reward.use_dense_reward;
  if (dense && prm == nullptr) throw ConfigInvalid("dense rewards need a PRM");

  parallel_for(n, [&](std::size_t i) {
    Rng rng = substream(seed, {tag(StreamTag::kRollout), static_cast<std::uint64_t>(step), i});
    Rollout& r = rollouts[i];
    r.task_index = static_cast<std::size_t>(
        uniform_int(rng, 0, static_cast<std::int64_t>(tasks.size()) - 1));
    const TaskFeatures& task = encoded[r.task_index];
    SampledTokens sampled = sample_continuation(policy, task, {}, rng, cfg.rollout_decode);
    r.tokens = std::move(sampled.tokens);
    r.logp = std::move(sampled.logprobs);
    r.ref_logp = logprobs(reference, task, r.tokens);
    r.values.resize(r.tokens.size());
    r.prm_scores.assign(r.tokens.size(), 0.0);
    for (std::size_t t = 0; t < r.tokens.size(); ++t) {
      r.values[t] = value_of(value, task, std::span(r.tokens).first(t));
      if (dense) r.prm_scores[t] = score_prefix(*prm, task, std::span(r.tokens).first(t + 1));
    }
    r.r_ut = passes(r.tokens, tasks[r.task_index].tests) ? 1 : 0;
  });

  RolloutBatch batch;
  for (const Rollout& r : rollouts) {
    const RewardParts parts = compose_reward_parts(r.tokens, r.r_ut, r.prm_scores, r.logp,
                                                   r.ref_logp, cfg.reward);
    const GaeResult g = gae(parts.reward, r.values, cfg.reward.gamma, cfg.reward.gae_lambda);
    ResponseRecord info;
    info.task_id = tasks[r.task_index].id;
    info.r_ut = r.r_ut;
    info.reward_total = std::accumulate(parts.reward.begin(), parts.reward.end(), 0.0);
    info.dense_total = std::accumulate(parts.dense.begin(), parts.dense.end(), 0.0);
    info.kl_total = std::accumulate(parts.kl.begin(), parts.kl.end(), 0.0);
    info.nop_count = count_token(r.tokens, Token::kNop);
    append_response(batch, encoded[r.task_index], info, r.tokens, r.logp, r.ref_logp,
                    r.values, parts.reward, g);
  }
  return batch;
}

RlResult train_rl(const RlConfig& cfg, std::span<const Task> tasks,
                  const PolicyModel& sft_policy, const ValueModel& fresh_value,
                  const PrmModel* prm, std::uint64_t seed) {
  RlConfig run = cfg;
  run.reward.use_dense_reward = mode_uses_dense(cfg.mode);
  run.reward.use_value_init = mode_uses_value_init(cfg.mode);
  run.reward.validate();
  if ((run.reward.use_dense_reward || run.reward.use_value_init) && prm == nullptr) {
    throw ConfigInvalid(std::string("mode ") + std::string(rl_mode_name(cfg.mode)) +
                        " requires a trained PRM");
  }
  if (tasks.empty()) throw ConfigInvalid("RL needs at least one task");
  if (run.rollouts_per_step < 1 || run.steps < 0) {
    throw ConfigInvalid("rollouts_per_step must be >= 1 and steps >= 0");
  }

  const PolicyModel reference = sft_policy;
  RlResult result{sft_policy,
                  run.reward.use_value_init ? export_value_init(*prm) : fresh_value,
                  {}, {}, {}, {}, 0.0};
  result.reference_digest_start = hex64(fnv1a64(serialize_checkpoint(reference.net, "policy")));

  std::vector<TaskFeatures> encoded;
  encoded.reserve(tasks.size());
  for (const Task& t : tasks) encoded.push_back(encode_task(t));

  AdamState policy_adam(result.policy.net, run.policy_adam);
  AdamState value_adam(result.value.net, run.value_adam);
  const std::vector<int> ckpt_steps = checkpoint_steps(run.steps, run.num_checkpoints);
  const std::string mode(rl_mode_name(cfg.mode));

  for (int step = 0; step < run.steps; ++step) {
    RolloutBatch batch = collect_rollouts(result.policy, reference, result.value, prm, tasks,
                                          encoded, run, step, seed);
    if (step == 0 && prm != nullptr) {
      for (std::size_t i = 0; i < batch.size(); ++i) {
        const double raw = forward(prm->net, batch.features_of(i))[0];
        result.initial_value_prm_gap =
            std::max(result.initial_value_prm_gap, std::abs(batch.values[i] - raw));
      }
    }

    MetricsRow row;
    row.step = step;
    row.mode = mode;
    const double n = static_cast<double>(batch.responses.size());
    for (const ResponseRecord& r : batch.responses) {
      row.pass_rate += r.r_ut / n;
      row.mean_reward += r.reward_total / n;
      row.mean_dense += r.dense_total / n;
      row.mean_kl += r.kl_total / n;
      row.mean_len += static_cast<double>(r.length) / n;
      row.mean_nop += static_cast<double>(r.nop_count) / n;
    }

    const PpoStats stats = ppo_update(
        result.policy, result.value, batch, run.reward, run.ppo, policy_adam, value_adam,
        stream_key(seed, {tag(StreamTag::kPpo), static_cast<std::uint64_t>(step)}));
    row.policy_loss = stats.policy_loss;
    row.value_loss = stats.value_loss;
    result.metrics.push_back(row);

    if (std::find(ckpt_steps.begin(), ckpt_steps.end(), step + 1) != ckpt_steps.end()) {
      result.checkpoints.push_back(RlCheckpoint{step + 1, result.policy, result.value});
    }
    if (!result.policy.net.all_finite() || !result.value.net.all_finite()) {
      throw Error("non-finite parameters after PPO step " + std::to_string(step));
    }
  }
  result.reference_digest_end = hex64(fnv1a64(serialize_checkpoint(reference.net, "policy")));
  return result;
}

}  // namespace procrl
