#ifndef PROCRL_PRM_HPP_
#define PROCRL_PRM_HPP_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "procrl/labeler.hpp"
#include "procrl/policy.hpp"

namespace procrl {

// Process reward model: same architecture as ValueModel, linear scalar head.
// The raw output is unbounded; rewards use the clipped score.
struct PrmModel {
  DenseNet net;

  static PrmModel from_value(const ValueModel& value);
  static PrmModel from_net(DenseNet net);
};

struct PrmTrainConfig {
  int epochs = 20;
  int batch_size = 64;
  AdamConfig adam{.lr = 1e-3};
};

struct PrmTrainResult {
  PrmModel model;
  std::vector<double> batch_loss;
  std::vector<double> epoch_loss;
};

// One (task, prefix, target) regression row.
struct PrmExample {
  TaskFeatures task{};
  Program prefix;
  double target = 0.0;
};

// Resolves record task ids against tasks. Throws FormatError on unknown ids.
std::vector<PrmExample> make_examples(std::span<const PrefixLabelRecord> records,
                                      std::span<const Task> tasks);

// Mean squared error sum((raw - target)^2) / |batch| with its gradient
// accumulated into grads when grads is nonempty.
double prm_batch_loss(const PrmModel& prm, std::span<const PrmExample> batch,
                      std::span<double> grads = {});

// Fits raw outputs to the labels by minibatch MSE, starting from init.
// Throws EmptyDataset when records is empty.
PrmTrainResult train_prm(std::span<const PrefixLabelRecord> records,
                         std::span<const Task> tasks, const ValueModel& init,
                         const PrmTrainConfig& cfg, std::uint64_t seed);

double prm_raw(const PrmModel& prm, const TaskFeatures& task,
               std::span<const Token> prefix);
// clip(raw, -1, 1). Requires a nonempty prefix.
double score_prefix(const PrmModel& prm, const TaskFeatures& task,
                    std::span<const Token> prefix);
double score_prefix(const PrmModel& prm, const Task& task,
                    std::span<const Token> prefix);

// Verbatim parameter copy into a value model.
ValueModel export_value_init(const PrmModel& prm);

}  // namespace procrl

#endif  // PROCRL_PRM_HPP_
