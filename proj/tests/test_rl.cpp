#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "procrl/errors.hpp"
#include "procrl/io.hpp"
#include "procrl/rl.hpp"

using namespace procrl;

namespace {

const Program kFour{Token::kArg0, Token::kPush1, Token::kAdd, Token::kEnd};

std::vector<Task> small_corpus() {
  TaskgenConfig tc;
  tc.count = 8;
  return generate_corpus(tc, 21);
}

RlConfig small_rl(RlMode mode) {
  RlConfig cfg;
  cfg.mode = mode;
  cfg.steps = 3;
  cfg.rollouts_per_step = 8;
  cfg.num_checkpoints = 2;
  cfg.ppo.minibatch_size = 16;
  return cfg;
}

}  // namespace

TEST_CASE("worked reward values") {
  RewardConfig cfg;
  cfg.use_dense_reward = true;
  cfg.beta = 0.0;
  const std::vector<double> ones(4, 1.0), zeros(4, 0.0);

  const auto fail = compose_reward_parts(kFour, 0, ones, zeros, zeros, cfg);
  for (double r : fail.reward) CHECK(std::abs(r - 0.0625) <= 1e-12);
  CHECK(std::abs(std::accumulate(fail.dense.begin(), fail.dense.end(), 0.0) - 0.25) <= 1e-12);

  const auto pass = compose_rewards(kFour, 1, ones, zeros, zeros, cfg);
  CHECK(std::abs(pass.back() - 1.00625) <= 1e-12);
  CHECK(std::abs(pass.front() - 0.00625) <= 1e-12);

  cfg.length_normalization = false;
  const auto raw = compose_rewards(kFour, 0, ones, zeros, zeros, cfg);
  CHECK(std::abs(raw[0] - 0.25) <= 1e-12);

  cfg.use_dense_reward = false;
  const auto sparse = compose_rewards(kFour, 1, ones, zeros, zeros, cfg);
  CHECK(sparse == std::vector<double>{0, 0, 0, 1});
}

TEST_CASE("KL penalty") {
  RewardConfig cfg;
  cfg.beta = 0.5;
  const std::vector<double> s(4, 0.0);
  const std::vector<double> logp{-1.0, -2.0, -0.5, -0.1};
  // Identical policies: no penalty at all.
  const auto same = compose_reward_parts(kFour, 0, s, logp, logp, cfg);
  for (double r : same.reward) CHECK(r == 0.0);
  const std::vector<double> ref{-1.5, -2.0, -0.25, -0.1};
  const auto diff = compose_reward_parts(kFour, 0, s, logp, ref, cfg);
  CHECK(diff.reward[0] == doctest::Approx(-0.25));
  CHECK(diff.reward[2] == doctest::Approx(0.125));
  CHECK(diff.kl[1] == 0.0);
}

TEST_CASE("reward inputs must share the response length") {
  RewardConfig cfg;
  const std::vector<double> three(3, 0.0), four(4, 0.0);
  CHECK_THROWS_AS(compose_rewards(kFour, 0, three, four, four, cfg), LengthMismatch);
  CHECK_THROWS_AS(compose_rewards(kFour, 0, four, four, three, cfg), LengthMismatch);
  CHECK_THROWS_AS(compose_rewards(Program{}, 0, {}, {}, {}, cfg), LengthMismatch);
}

TEST_CASE("dense sum is bounded by lambda") {
  RewardConfig cfg;
  cfg.use_dense_reward = true;
  Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    const auto T = static_cast<std::size_t>(uniform_int(rng, 1, 24));
    const Program resp(T, Token::kDup);
    std::vector<double> s(T), z(T, 0.0);
    for (double& v : s) v = 2.0 * uniform01(rng) - 1.0;
    const int r_ut = static_cast<int>(uniform_int(rng, 0, 1));
    const auto parts = compose_reward_parts(resp, r_ut, s, z, z, cfg);
    double total = 0;
    for (double d : parts.dense) total += std::abs(d);
    CHECK(total <= cfg.lambda_for(r_ut) + 1e-12);
  }
}

TEST_CASE("GAE") {
  Rng rng(8);
  for (int i = 0; i < 200; ++i) {
    const auto T = static_cast<std::size_t>(uniform_int(rng, 1, 24));
    std::vector<double> r(T), v(T);
    for (std::size_t t = 0; t < T; ++t) {
      r[t] = uniform01(rng) * 2 - 1;
      v[t] = uniform01(rng) * 2 - 1;
    }
    const GaeResult g = gae(r, v, 1.0, 1.0);
    for (std::size_t t = 0; t < T; ++t) {
      const double tail = std::accumulate(r.begin() + static_cast<std::ptrdiff_t>(t), r.end(), 0.0);
      CHECK(std::abs(g.advantages[t] - (tail - v[t])) <= 1e-10);
      CHECK(std::abs(g.returns[t] - tail) <= 1e-10);
    }
  }
  // Single step: A = r - V regardless of gamma and lambda.
  const GaeResult one = gae(std::vector<double>{0.7}, std::vector<double>{0.2}, 0.9, 0.5);
  CHECK(one.advantages[0] == doctest::Approx(0.5));

  // Hand-computed two-step case with gamma = 0.5, lambda = 0.5.
  const GaeResult two = gae(std::vector<double>{1.0, 2.0}, std::vector<double>{0.5, 1.0}, 0.5, 0.5);
  // delta1 = 2 - 1 = 1; delta0 = 1 + 0.5 * 1 - 0.5 = 1; A0 = 1 + 0.25 * 1.
  CHECK(two.advantages[1] == doctest::Approx(1.0));
  CHECK(two.advantages[0] == doctest::Approx(1.25));
  CHECK_THROWS_AS(gae(std::vector<double>{1.0}, std::vector<double>{}, 1, 1), LengthMismatch);
}

TEST_CASE("standardize") {
  std::vector<double> v{1, 2, 3, 4};
  standardize(v);
  CHECK(std::accumulate(v.begin(), v.end(), 0.0) == doctest::Approx(0.0).epsilon(1e-12));
  double ss = 0;
  for (double x : v) ss += x * x;
  CHECK(ss / 4 == doctest::Approx(1.0).epsilon(1e-6));
  std::vector<double> flat(3, 2.0);
  standardize(flat);
  for (double x : flat) CHECK(x == 0.0);
}

TEST_CASE("policy gradient at ratio one equals vanilla policy gradient") {
  const PolicyModel policy = PolicyModel::init(3);
  const auto tasks = small_corpus();
  RolloutBatch batch;
  Rng rng(2);
  for (std::size_t i = 0; i < 4; ++i) {
    const TaskFeatures f = encode_task(tasks[i]);
    const SampledTokens s = sample_response(policy, tasks[i], rng, {1.0, 1.0});
    const auto lp = logprobs(policy, f, s.tokens);
    std::vector<double> adv(s.tokens.size());
    for (double& a : adv) a = uniform01(rng) * 2 - 1;
    GaeResult g{adv, adv};
    append_response(batch, f, ResponseRecord{}, s.tokens, lp, lp, adv, adv, g);
  }
  std::vector<std::size_t> idx(batch.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<double> grads(policy.net.params().size());
  ppo_policy_loss(policy, batch, idx, 0.2, 0.0, grads);

  // Oracle: central differences of -mean(A log pi(a)) using teacher-forced
  // log-probabilities.
  auto objective = [&](const PolicyModel& p) {
    double total = 0;
    std::size_t k = 0;
    for (std::size_t i = 0; i < 4; ++i) {
      const ResponseRecord& r = batch.responses[i];
      Program tokens;
      for (std::size_t t = 0; t < r.length; ++t) tokens.push_back(token_from_id(batch.actions[r.first_step + t]));
      const auto lp = logprobs(p, tasks[i], tokens);
      for (std::size_t t = 0; t < r.length; ++t, ++k) total -= batch.advantages[k] * lp[t];
    }
    return total / static_cast<double>(batch.size());
  };
  PolicyModel probe = policy;
  for (std::size_t i = 0; i < grads.size(); i += 211) {
    const double keep = probe.net.params()[i];
    const double h = 1e-5;
    probe.net.params()[i] = keep + h;
    const double up = objective(probe);
    probe.net.params()[i] = keep - h;
    const double down = objective(probe);
    probe.net.params()[i] = keep;
    CHECK(grads[i] == doctest::Approx((up - down) / (2 * h)).epsilon(1e-5).scale(1e-8));
  }

  // Zero advantages: no policy movement at all.
  std::fill(batch.advantages.begin(), batch.advantages.end(), 0.0);
  PolicyModel moved = policy;
  ValueModel value = ValueModel::init(5);
  AdamState pa(moved.net, {});
  AdamState va(value.net, {});
  PpoConfig ppo;
  ppo.standardize_advantages = false;
  ppo_update(moved, value, batch, RewardConfig{}, ppo, pa, va, 1);
  CHECK(moved.net == policy.net);
}

TEST_CASE("value loss") {
  const ValueModel v = ValueModel::init(2);
  const auto tasks = small_corpus();
  const TaskFeatures f = encode_task(tasks[0]);
  RolloutBatch batch;
  std::vector<double> values;
  for (std::size_t t = 0; t < kFour.size(); ++t) values.push_back(value_of(v, f, std::span(kFour).first(t)));
  const std::vector<double> z(kFour.size(), 0.0);
  append_response(batch, f, ResponseRecord{}, kFour, z, z, values, z, GaeResult{z, values});
  std::vector<std::size_t> idx{0, 1, 2, 3};
  std::vector<double> g(v.net.params().size());
  CHECK(value_loss(v, batch, idx, g) == doctest::Approx(0.0).scale(1e-20));
  for (double x : g) CHECK(std::abs(x) < 1e-15);
}

TEST_CASE("modes") {
  CHECK(rl_mode_from_name("dense_and_value_init") == RlMode::kDenseAndValueInit);
  CHECK(rl_mode_name(RlMode::kValueInit) == "value_init");
  CHECK_THROWS_AS(rl_mode_from_name("bogus"), ConfigInvalid);
  CHECK(mode_uses_dense(RlMode::kDense));
  CHECK_FALSE(mode_uses_value_init(RlMode::kDense));
  CHECK(checkpoint_steps(200, 4) == std::vector<int>{50, 100, 150, 200});
  CHECK(checkpoint_steps(3, 4) == std::vector<int>{1, 2, 3});

  const auto tasks = small_corpus();
  const PolicyModel sft = PolicyModel::init(1);
  const ValueModel v = ValueModel::init(2);
  CHECK_THROWS_AS(train_rl(small_rl(RlMode::kDense), tasks, sft, v, nullptr, 1), ConfigInvalid);
  CHECK_THROWS_AS(train_rl(small_rl(RlMode::kValueInit), tasks, sft, v, nullptr, 1), ConfigInvalid);
  RlConfig bad = small_rl(RlMode::kSparseBaseline);
  bad.reward.gae_lambda = 0.0;
  CHECK_THROWS_AS(train_rl(bad, tasks, sft, v, nullptr, 1), ConfigInvalid);
}

TEST_CASE("rollout bookkeeping") {
  const auto tasks = small_corpus();
  std::vector<TaskFeatures> enc;
  for (const Task& t : tasks) enc.push_back(encode_task(t));
  const PolicyModel pol = PolicyModel::init(1);
  const PolicyModel ref = PolicyModel::init(9);
  const PrmModel prm = PrmModel::from_value(ValueModel::init(4));
  RlConfig cfg = small_rl(RlMode::kDense);
  cfg.reward.use_dense_reward = true;
  cfg.reward.beta = 0.1;
  cfg.rollouts_per_step = 16;
  const RolloutBatch b = collect_rollouts(pol, ref, ValueModel::init(3), &prm, tasks, enc, cfg, 0, 5);
  CHECK(b.responses.size() == 16);
  for (const ResponseRecord& r : b.responses) {
    double sum = 0;
    for (std::size_t t = 0; t < r.length; ++t) sum += b.rewards[r.first_step + t];
    CHECK(sum == doctest::Approx(r.dense_total - 0.1 * r.kl_total + r.r_ut).epsilon(1e-12));
    CHECK(std::abs(r.dense_total) <= cfg.reward.lambda_for(r.r_ut) + 1e-12);
    CHECK(b.terminal[r.first_step + r.length - 1]);
  }
  const RolloutBatch again = collect_rollouts(pol, ref, ValueModel::init(3), &prm, tasks, enc, cfg, 0, 5);
  CHECK(again.actions == b.actions);
  CHECK(again.rewards == b.rewards);
}

TEST_CASE("training keeps the reference frozen and is deterministic") {
  const auto tasks = small_corpus();
  const PolicyModel sft = PolicyModel::init(1);
  const ValueModel v = ValueModel::init(2);
  const PrmModel prm = PrmModel::from_value(ValueModel::init(4));
  const RlConfig cfg = small_rl(RlMode::kDenseAndValueInit);
  const RlResult a = train_rl(cfg, tasks, sft, v, &prm, 7);
  const RlResult b = train_rl(cfg, tasks, sft, v, &prm, 7);
  CHECK(a.reference_digest_start == a.reference_digest_end);
  CHECK(a.reference_digest_start == hex64(fnv1a64(serialize_checkpoint(sft.net, "policy"))));
  CHECK(a.policy.net == b.policy.net);
  CHECK(a.value.net == b.value.net);
  CHECK(a.metrics.size() == 3);
  CHECK(a.checkpoints.size() == 2);
  CHECK(a.checkpoints.back().step == 3);
  // Value-init: the critic starts as the PRM, so the gap is exactly zero.
  CHECK(a.initial_value_prm_gap == 0.0);
  CHECK_FALSE(a.policy.net == sft.net);

  const std::string csv = metrics_to_csv(a.metrics);
  CHECK(csv.rfind(std::string(kMetricsHeader) + "\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
}
