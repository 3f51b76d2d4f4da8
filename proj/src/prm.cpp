#include "procrl/prm.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

#include "procrl/errors.hpp"

namespace procrl {

PrmModel PrmModel::from_value(const ValueModel& value) { return PrmModel{value.net}; }

PrmModel PrmModel::from_net(DenseNet net) {
  if (net.dims() != scalar_head_dims()) throw ShapeMismatch("not a PRM network");
  return PrmModel{std::move(net)};
}

std::vector<PrmExample> make_examples(std::span<const PrefixLabelRecord> records,
                                      std::span<const Task> tasks) {
  std::unordered_map<std::string, TaskFeatures> by_id;
  for (const Task& t : tasks) by_id.emplace(t.id, encode_task(t));
  std::vector<PrmExample> examples;
  examples.reserve(records.size());
  for (const auto& r : records) {
    auto it = by_id.find(r.task_id);
    if (it == by_id.end()) throw FormatError("PRM record refers to unknown task " + r.task_id);
    examples.push_back(PrmExample{
        it->second,
        Program(r.tokens.begin(), r.tokens.begin() + r.prefix_len),
        static_cast<double>(r.label)});
  }
  return examples;
}

double prm_batch_loss(const PrmModel& prm, std::span<const PrmExample> batch,
                      std::span<double> grads) {
  if (batch.empty()) return 0.0;
  std::vector<double> features(FeatureSpec::kDim);
  ForwardCache cache;
  const double inv = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (const PrmExample& ex : batch) {
    featurize(ex.task, ex.prefix, features);
    forward(prm.net, features, cache);
    const double diff = cache.output()[0] - ex.target;
    loss += diff * diff;
    if (!grads.empty()) {
      const double g = 2.0 * diff * inv;
      backward_accumulate(prm.net, cache, std::span(&g, 1), grads);
    }
  }
  return loss * inv;
}

PrmTrainResult train_prm(std::span<const PrefixLabelRecord> records,
                         std::span<const Task> tasks, const ValueModel& init,
                         const PrmTrainConfig& cfg, std::uint64_t seed) {
  if (records.empty()) throw EmptyDataset("PRM training set is empty");
  PrmTrainResult result{PrmModel::from_value(init), {}, {}};
  const std::vector<PrmExample> examples = make_examples(records, tasks);
  const auto batch_size = static_cast<std::size_t>(std::max(1, cfg.batch_size));
  AdamState adam(result.model.net, cfg.adam);
  std::vector<double> grads(result.model.net.params().size());
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<PrmExample> batch;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng = substream(seed, {tag(StreamTag::kPrmTrain), static_cast<std::uint64_t>(epoch)});
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(i - 1)));
      std::swap(order[i - 1], order[j]);
    }
    double epoch_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      batch.clear();
      for (std::size_t b = start; b < end; ++b) batch.push_back(examples[order[b]]);
      std::fill(grads.begin(), grads.end(), 0.0);
      const double loss = prm_batch_loss(result.model, batch, grads);
      adam_step(result.model.net, grads, adam);
      result.batch_loss.push_back(loss);
      epoch_sum += loss * static_cast<double>(batch.size());
    }
    result.epoch_loss.push_back(epoch_sum / static_cast<double>(examples.size()));
  }
  return result;
}

double prm_raw(const PrmModel& prm, const TaskFeatures& task,
               std::span<const Token> prefix) {
  thread_local std::vector<double> features(FeatureSpec::kDim);
  thread_local ForwardCache cache;
  featurize(task, prefix, features);
  forward(prm.net, features, cache);
  return cache.output()[0];
}

double score_prefix(const PrmModel& prm, const TaskFeatures& task,
                    std::span<const Token> prefix) {
  if (prefix.empty()) throw LengthMismatch("PRM scores need a nonempty prefix");
  return std::clamp(prm_raw(prm, task, prefix), -1.0, 1.0);
}

double score_prefix(const PrmModel& prm, const Task& task,
                    std::span<const Token> prefix) {
  return score_prefix(prm, encode_task(task), prefix);
}

ValueModel export_value_init(const PrmModel& prm) { return ValueModel{prm.net}; }

}  // namespace procrl
