#ifndef PROCRL_POLICY_HPP_
#define PROCRL_POLICY_HPP_

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "procrl/features.hpp"
#include "procrl/net.hpp"
#include "procrl/taskgen.hpp"

namespace procrl {

inline constexpr int kHiddenWidth = 64;

std::vector<int> policy_dims();
std::vector<int> scalar_head_dims();

// Autoregressive token policy: features -> 64 -> 64 -> |V| logits.
struct PolicyModel {
  DenseNet net;

  static PolicyModel init(std::uint64_t seed);
  static PolicyModel from_net(DenseNet net);
};

// Scalar value head with the same body; layout identical to PrmModel.
struct ValueModel {
  DenseNet net;

  static ValueModel init(std::uint64_t seed);
  static ValueModel from_net(DenseNet net);
};

using Logits = std::array<double, kVocabSize>;
using Distribution = std::array<double, kVocabSize>;

Logits policy_logits(const PolicyModel& policy, const TaskFeatures& task,
                     std::span<const Token> prefix);
double value_of(const ValueModel& value, const TaskFeatures& task,
                std::span<const Token> prefix);

// Plain softmax of logits.
Distribution softmax(const Logits& logits);

inline constexpr double kGreedyTemperature = 1e-6;

// Sampling distribution after temperature scaling and nucleus truncation.
// The kept set is the shortest prefix of tokens sorted by probability
// (descending, ties by id ascending) whose mass reaches top_p; the result is
// renormalized over it. temperature < kGreedyTemperature gives a point mass
// on the argmax (lowest id among ties).
Distribution sampling_distribution(const Logits& logits, double temperature,
                                   double top_p);

struct DecodeConfig {
  double temperature = 1.0;
  double top_p = 1.0;
};

struct SampledTokens {
  Program tokens;
  // Log-probability of each sampled token under the distribution it was
  // actually drawn from.
  std::vector<double> logprobs;
};

// Extends prefix until END or kMaxProgramLength tokens. Returns only the
// appended tokens.
SampledTokens sample_continuation(const PolicyModel& policy, const Task& task,
                                  std::span<const Token> prefix, Rng& rng,
                                  const DecodeConfig& decode);
SampledTokens sample_continuation(const PolicyModel& policy,
                                  const TaskFeatures& task,
                                  std::span<const Token> prefix, Rng& rng,
                                  const DecodeConfig& decode);
SampledTokens sample_response(const PolicyModel& policy, const Task& task,
                              Rng& rng, const DecodeConfig& decode);

// Teacher-forced log-probabilities of every token (untruncated softmax).
std::vector<double> logprobs(const PolicyModel& policy, const Task& task,
                             std::span<const Token> program);
std::vector<double> logprobs(const PolicyModel& policy, const TaskFeatures& task,
                             std::span<const Token> program);

struct SftConfig {
  int epochs = 100;
  int batch_size = 32;
  AdamConfig adam{.lr = 1e-2};
  double max_grad_norm = 1.0;
};

struct SftResult {
  std::vector<double> epoch_loss;
};

// Behaviour cloning: minimizes the mean token-level negative log-likelihood
// of each program given its task.
SftResult sft_train(PolicyModel& policy,
                    std::span<const std::pair<Task, Program>> pairs,
                    const SftConfig& cfg, std::uint64_t seed);

}  // namespace procrl

#endif  // PROCRL_POLICY_HPP_
