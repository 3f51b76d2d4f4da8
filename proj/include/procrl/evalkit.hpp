#ifndef PROCRL_EVALKIT_HPP_
#define PROCRL_EVALKIT_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "procrl/policy.hpp"
#include "procrl/taskgen.hpp"

namespace procrl {

struct EvalConfig {
  int n_samples = 10;
  double temperature = 0.2;
  double top_p = 0.95;
  std::uint64_t seed = 0;
};

struct TaskPassDetail {
  std::string task_id;
  int passed = 0;
  int samples = 0;
  std::vector<int> lengths;  // token count of every sample
};

struct PassAt1Result {
  double pass_at_1 = 0.0;
  std::vector<TaskPassDetail> tasks;  // same order as the input tasks
};

// Sample j of a task draws from stream_key(seed, {kEval, fnv(task id), j}),
// so Pass@1 with n_samples = 1 matches the K = 1 point of best_of_k_curve
// under the same decode settings and seed.
PassAt1Result pass_at_1(const PolicyModel& policy, std::span<const Task> tasks,
                        const EvalConfig& cfg);

struct BestOfKConfig {
  int k_max = 30;
  double temperature = 1.0;
  double top_p = 0.95;
  std::uint64_t seed = 0;
};

// points[K - 1] = fraction of tasks with a passing sample among their first K
// of k_max pre-drawn samples.
std::vector<double> best_of_k_curve(const PolicyModel& policy,
                                    std::span<const Task> tasks,
                                    const BestOfKConfig& cfg);

struct LengthBin {
  double lo = 0.0;
  double hi = 0.0;
  int population = 0;
  std::optional<double> pass_a;
  std::optional<double> pass_b;
  std::optional<double> delta;  // absent when population == 0
};

struct LengthDelta {
  std::vector<LengthBin> bins;
  double overall_delta = 0.0;
};

// Tasks are binned by the median sampled length of policy_b (the baseline).
// Bin i covers [edges[i], edges[i+1]); the first and last bins extend to
// -inf / +inf so the bins partition every task. Throws ConfigInvalid with
// fewer than two edges or non-increasing edges.
LengthDelta length_stratified_delta(const PolicyModel& policy_a,
                                    const PolicyModel& policy_b,
                                    std::span<const Task> tasks,
                                    const EvalConfig& cfg,
                                    std::span<const double> edges);
LengthDelta length_stratified_delta(const PassAt1Result& a, const PassAt1Result& b,
                                    std::span<const double> edges);

double median(std::vector<double> values);

nlohmann::json pass_result_to_json(const PassAt1Result& r);
nlohmann::json length_delta_to_json(const LengthDelta& d);

// Consolidates run directories into out_dir: report.json, training.csv,
// pass_at_1.csv, best_of_k.csv, length_delta.csv and SVG plots. A run
// directory contributes every <stage>/metrics.csv and <stage>/*/metrics.csv,
// plus eval/eval.json when present. Throws MissingMetrics when run_dirs is
// empty or holds no metrics.
void render_report(std::span<const std::filesystem::path> run_dirs,
                   const std::filesystem::path& out_dir);

}  // namespace procrl

#endif  // PROCRL_EVALKIT_HPP_
