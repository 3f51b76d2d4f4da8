#include "procrl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "procrl/errors.hpp"

namespace procrl {
namespace {

thread_local ForwardCache tls_cache;
thread_local std::vector<double> tls_features(FeatureSpec::kDim);

}  // namespace

std::vector<int> policy_dims() {
  return {FeatureSpec::kDim, kHiddenWidth, kHiddenWidth, kVocabSize};
}

std::vector<int> scalar_head_dims() {
  return {FeatureSpec::kDim, kHiddenWidth, kHiddenWidth, 1};
}

PolicyModel PolicyModel::init(std::uint64_t seed) {
  Rng rng = substream(seed, {tag(StreamTag::kInit), 0});
  return PolicyModel{DenseNet::glorot(policy_dims(), rng)};
}

PolicyModel PolicyModel::from_net(DenseNet net) {
  if (net.dims() != policy_dims()) throw ShapeMismatch("not a policy network");
  return PolicyModel{std::move(net)};
}

ValueModel ValueModel::init(std::uint64_t seed) {
  Rng rng = substream(seed, {tag(StreamTag::kInit), 1});
  return ValueModel{DenseNet::glorot(scalar_head_dims(), rng)};
}

ValueModel ValueModel::from_net(DenseNet net) {
  if (net.dims() != scalar_head_dims()) throw ShapeMismatch("not a value network");
  return ValueModel{std::move(net)};
}

Logits policy_logits(const PolicyModel& policy, const TaskFeatures& task,
                     std::span<const Token> prefix) {
  featurize(task, prefix, tls_features);
  forward(policy.net, tls_features, tls_cache);
  Logits logits{};
  std::copy(tls_cache.output().begin(), tls_cache.output().end(), logits.begin());
  return logits;
}

double value_of(const ValueModel& value, const TaskFeatures& task,
                std::span<const Token> prefix) {
  featurize(task, prefix, tls_features);
  forward(value.net, tls_features, tls_cache);
  return tls_cache.output()[0];
}

Distribution softmax(const Logits& logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  Distribution p{};
  double z = 0.0;
  for (int i = 0; i < kVocabSize; ++i) {
    p[i] = std::exp(logits[i] - top);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

Distribution sampling_distribution(const Logits& logits, double temperature,
                                   double top_p) {
  Distribution p{};
  if (temperature < kGreedyTemperature) {
    const auto best = std::max_element(logits.begin(), logits.end()) - logits.begin();
    p[static_cast<std::size_t>(best)] = 1.0;
    return p;
  }
  Logits scaled{};
  for (int i = 0; i < kVocabSize; ++i) scaled[i] = logits[i] / temperature;
  p = softmax(scaled);
  if (top_p >= 1.0) return p;

  std::array<int, kVocabSize> order{};
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return p[a] > p[b]; });
  double mass = 0.0;
  std::size_t keep = 0;
  while (keep < order.size()) {
    mass += p[order[keep]];
    ++keep;
    if (mass >= top_p) break;
  }
  Distribution truncated{};
  double z = 0.0;
  for (std::size_t k = 0; k < keep; ++k) z += p[order[k]];
  for (std::size_t k = 0; k < keep; ++k) truncated[order[k]] = p[order[k]] / z;
  return truncated;
}

SampledTokens sample_continuation(const PolicyModel& policy, const Task& task,
                                  std::span<const Token> prefix, Rng& rng,
                                  const DecodeConfig& decode) {
  return sample_continuation(policy, encode_task(task), prefix, rng, decode);
}

SampledTokens sample_continuation(const PolicyModel& policy,
                                  const TaskFeatures& task,
                                  std::span<const Token> prefix, Rng& rng,
                                  const DecodeConfig& decode) {
  SampledTokens out;
  if (!prefix.empty() && prefix.back() == Token::kEnd) return out;
  Program full(prefix.begin(), prefix.end());
  while (static_cast<int>(full.size()) < kMaxProgramLength) {
    const Distribution p = sampling_distribution(policy_logits(policy, task, full),
                                                 decode.temperature, decode.top_p);
    const double u = uniform01(rng);
    double acc = 0.0;
    int pick = -1;
    for (int i = 0; i < kVocabSize; ++i) {
      if (p[i] <= 0.0) continue;
      pick = i;
      acc += p[i];
      if (u < acc) break;
    }
    const Token t = token_from_id(pick);
    full.push_back(t);
    out.tokens.push_back(t);
    out.logprobs.push_back(std::log(p[pick]));
    if (t == Token::kEnd) break;
  }
  return out;
}

SampledTokens sample_response(const PolicyModel& policy, const Task& task,
                              Rng& rng, const DecodeConfig& decode) {
  return sample_continuation(policy, task, {}, rng, decode);
}

std::vector<double> logprobs(const PolicyModel& policy, const Task& task,
                             std::span<const Token> program) {
  return logprobs(policy, encode_task(task), program);
}

std::vector<double> logprobs(const PolicyModel& policy, const TaskFeatures& task,
                             std::span<const Token> program) {
  std::vector<double> out;
  out.reserve(program.size());
  for (std::size_t t = 0; t < program.size(); ++t) {
    const Logits logits = policy_logits(policy, task, program.first(t));
    const double top = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double l : logits) z += std::exp(l - top);
    out.push_back(logits[static_cast<std::size_t>(token_id(program[t]))] - top - std::log(z));
  }
  return out;
}

SftResult sft_train(PolicyModel& policy,
                    std::span<const std::pair<Task, Program>> pairs,
                    const SftConfig& cfg, std::uint64_t seed) {
  SftResult result;
  if (pairs.empty() || cfg.epochs <= 0) return result;
  const auto batch_size = static_cast<std::size_t>(std::max(1, cfg.batch_size));

  std::vector<TaskFeatures> encoded;
  encoded.reserve(pairs.size());
  for (const auto& [task, program] : pairs) encoded.push_back(encode_task(task));

  AdamState adam(policy.net, cfg.adam);
  std::vector<double> grads(policy.net.params().size());
  std::vector<double> features(FeatureSpec::kDim);
  std::vector<double> grad_out(kVocabSize);
  ForwardCache cache;
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng = substream(seed, {tag(StreamTag::kSft), static_cast<std::uint64_t>(epoch)});
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(i - 1)));
      std::swap(order[i - 1], order[j]);
    }
    double epoch_nll = 0.0;
    std::size_t epoch_tokens = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      std::fill(grads.begin(), grads.end(), 0.0);
      std::size_t tokens = 0;
      for (std::size_t b = start; b < end; ++b) tokens += pairs[order[b]].second.size();
      if (tokens == 0) continue;
      const double scale = 1.0 / static_cast<double>(tokens);
      for (std::size_t b = start; b < end; ++b) {
        const Program& program = pairs[order[b]].second;
        for (std::size_t t = 0; t < program.size(); ++t) {
          featurize(encoded[order[b]], std::span(program).first(t), features);
          forward(policy.net, features, cache);
          Logits logits{};
          std::copy(cache.output().begin(), cache.output().end(), logits.begin());
          const Distribution p = softmax(logits);
          const auto target = static_cast<std::size_t>(token_id(program[t]));
          epoch_nll -= std::log(std::max(p[target], 1e-300));
          for (int v = 0; v < kVocabSize; ++v) {
            grad_out[static_cast<std::size_t>(v)] = scale * (p[v] - (static_cast<std::size_t>(v) == target ? 1.0 : 0.0));
          }
          backward_accumulate(policy.net, cache, grad_out, grads);
        }
      }
      epoch_tokens += tokens;
      clip_grad_norm(grads, cfg.max_grad_norm);
      adam_step(policy.net, grads, adam);
    }
    result.epoch_loss.push_back(epoch_tokens ? epoch_nll / static_cast<double>(epoch_tokens) : 0.0);
  }
  return result;
}

}  // namespace procrl
