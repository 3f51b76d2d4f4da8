#ifndef PROCRL_RL_HPP_
#define PROCRL_RL_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "procrl/policy.hpp"
#include "procrl/prm.hpp"

namespace procrl {

enum class RlMode { kSparseBaseline, kDense, kValueInit, kDenseAndValueInit };

std::string_view rl_mode_name(RlMode mode);
RlMode rl_mode_from_name(std::string_view name);
bool mode_uses_dense(RlMode mode);
bool mode_uses_value_init(RlMode mode);

struct RewardConfig {
  bool use_dense_reward = false;
  bool use_value_init = false;
  double lambda_fail = 0.25;
  double lambda_pass = 0.025;
  double beta = 0.01;
  bool length_normalization = true;
  // Provenance only: whether the PRM was trained with neutral labels.
  bool neutral_labels_used_upstream = true;
  double gamma = 1.0;
  double gae_lambda = 0.95;
  double clip_eps = 0.2;

  // Throws ConfigInvalid on out-of-range values.
  void validate() const;
  double lambda_for(int r_ut) const { return r_ut ? lambda_pass : lambda_fail; }
};

struct RewardParts {
  std::vector<double> reward;  // composed per-token reward
  std::vector<double> dense;   // PRM component of each token
  std::vector<double> kl;      // logp - ref_logp per token
};

// reward[t] = [dense] lambda(r_ut) / T * prm[t] - beta (logp[t] - ref[t]),
// plus r_ut on the final token. Without length normalization the 1/T factor
// is dropped. Throws LengthMismatch unless all arrays have length T >= 1.
RewardParts compose_reward_parts(std::span<const Token> response, int r_ut,
                                 std::span<const double> prm_scores,
                                 std::span<const double> logp,
                                 std::span<const double> ref_logp,
                                 const RewardConfig& cfg);
std::vector<double> compose_rewards(std::span<const Token> response, int r_ut,
                                    std::span<const double> prm_scores,
                                    std::span<const double> logp,
                                    std::span<const double> ref_logp,
                                    const RewardConfig& cfg);

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// Generalized advantage estimation over one episode; the value after the
// terminal token is 0.
GaeResult gae(std::span<const double> rewards, std::span<const double> values,
              double gamma, double gae_lambda);

struct ResponseRecord {
  std::string task_id;
  int r_ut = 0;
  std::size_t length = 0;
  std::size_t first_step = 0;  // index of its first token in RolloutBatch::steps
  double reward_total = 0.0;
  double dense_total = 0.0;
  double kl_total = 0.0;
  std::size_t nop_count = 0;
};

struct RolloutBatch {
  // Per token; features are kDim values per token, contiguous.
  std::vector<double> features;
  std::vector<int> actions;
  std::vector<double> behavior_logp;
  std::vector<double> ref_logp;
  std::vector<double> values;
  std::vector<double> rewards;
  std::vector<bool> terminal;
  std::vector<double> advantages;
  std::vector<double> returns;
  std::vector<ResponseRecord> responses;

  std::size_t size() const { return actions.size(); }
  std::span<const double> features_of(std::size_t i) const {
    return std::span(features).subspan(i * FeatureSpec::kDim, FeatureSpec::kDim);
  }
};

// Appends one finished response (rewards and GAE already computed).
void append_response(RolloutBatch& batch, const TaskFeatures& task,
                     const ResponseRecord& info, std::span<const Token> tokens,
                     std::span<const double> logp, std::span<const double> ref_logp,
                     std::span<const double> values, std::span<const double> rewards,
                     const GaeResult& gae_result);

struct PpoConfig {
  int epochs = 4;
  int minibatch_size = 512;
  double max_grad_norm = 1.0;
  double entropy_coef = 0.0;
  bool standardize_advantages = true;
};

struct PpoStats {
  double policy_loss = 0.0;  // mean over minibatches
  double value_loss = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
};

// Standardizes batch.advantages in place (mean 0, std 1, eps 1e-8).
void standardize(std::span<double> values);

// Clipped-surrogate loss -mean(min(r A, clip(r) A)) - c H over the given
// token indices, with its gradient added into grads.
double ppo_policy_loss(const PolicyModel& policy, const RolloutBatch& batch,
                       std::span<const std::size_t> indices, double clip_eps,
                       double entropy_coef, std::span<double> grads,
                       double* clip_fraction = nullptr, double* approx_kl = nullptr);
// mean((V - return)^2) over indices, gradient added into grads.
double value_loss(const ValueModel& value, const RolloutBatch& batch,
                  std::span<const std::size_t> indices, std::span<double> grads);

PpoStats ppo_update(PolicyModel& policy, ValueModel& value, RolloutBatch& batch,
                    const RewardConfig& reward, const PpoConfig& cfg,
                    AdamState& policy_adam, AdamState& value_adam,
                    std::uint64_t stream);

struct RlConfig {
  RlMode mode = RlMode::kSparseBaseline;
  RewardConfig reward;
  PpoConfig ppo;
  int steps = 200;
  int rollouts_per_step = 256;
  int num_checkpoints = 4;
  AdamConfig policy_adam{.lr = 3e-4};
  AdamConfig value_adam{.lr = 1e-3};
  DecodeConfig rollout_decode{1.0, 1.0};
};

struct MetricsRow {
  int step = 0;
  std::string mode;
  double pass_rate = 0.0;
  double mean_reward = 0.0;
  double mean_dense = 0.0;
  double mean_kl = 0.0;
  double mean_len = 0.0;
  double mean_nop = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
};

inline constexpr std::string_view kMetricsHeader =
    "step,mode,pass_rate,mean_reward,mean_dense,mean_kl,mean_len,mean_nop,policy_loss,value_loss";

std::string metrics_to_csv(std::span<const MetricsRow> rows);

struct RlCheckpoint {
  int step = 0;
  PolicyModel policy;
  ValueModel value;
};

struct RlResult {
  PolicyModel policy;
  ValueModel value;
  std::vector<MetricsRow> metrics;
  std::vector<RlCheckpoint> checkpoints;
  std::string reference_digest_start;
  std::string reference_digest_end;
  // Largest |V - prm raw| on the first batch before any update; 0 without
  // a PRM.
  double initial_value_prm_gap = 0.0;
};

// Steps at which checkpoints are taken: round(steps * i / n), i = 1..n.
std::vector<int> checkpoint_steps(int steps, int n);

// Collects rollouts for one step. Exposed for tests.
RolloutBatch collect_rollouts(const PolicyModel& policy, const PolicyModel& reference,
                              const ValueModel& value, const PrmModel* prm,
                              std::span<const Task> tasks,
                              std::span<const TaskFeatures> encoded,
                              const RlConfig& cfg, int step, std::uint64_t seed);

// PPO from the SFT policy, which also serves as the frozen KL reference.
// Dense modes require prm; value-init modes take their value network from
// export_value_init(*prm), the others from fresh_value. Throws ConfigInvalid
// when a required PRM is missing.
RlResult train_rl(const RlConfig& cfg, std::span<const Task> tasks,
                  const PolicyModel& sft_policy, const ValueModel& fresh_value,
                  const PrmModel* prm, std::uint64_t seed);

}  // namespace procrl

#endif  // PROCRL_RL_HPP_
