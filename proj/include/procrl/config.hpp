#ifndef PROCRL_CONFIG_HPP_
#define PROCRL_CONFIG_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "procrl/evalkit.hpp"
#include "procrl/labeler.hpp"
#include "procrl/policy.hpp"
#include "procrl/prm.hpp"
#include "procrl/rl.hpp"
#include "procrl/taskgen.hpp"

namespace procrl {

struct SweepConfig {
  std::vector<std::string> strategies{"full", "remove_hard", "medium_only", "revised_only"};
  std::vector<double> n_per_prompt_grid{0.25, 1, 2, 4, 8};
  std::string mode = "dense_and_value_init";
  // RL steps per sweep arm; 0 means rl.steps.
  int rl_steps = 0;
};

// Every tunable of the pipeline. Defaults mirror the module defaults.
struct RunConfig {
  std::uint64_t seed = 0;
  TaskgenConfig taskgen;
  double train_fraction = 0.8;
  SftConfig sft;
  RlConfig rl;
  std::vector<std::string> psgpo_modes{"dense", "value_init", "dense_and_value_init"};
  CollectConfig collect;
  std::string strategy = "full";
  PrmTrainConfig prm;
  EvalConfig eval;
  BestOfKConfig best_of_k;
  std::vector<double> length_bins{0, 4, 6, 8, 10, 25};
  SweepConfig sweep;
};

nlohmann::json config_to_json(const RunConfig& cfg);
// Overlays j onto the defaults. Unknown keys, wrong types and out-of-range
// values throw ConfigInvalid.
RunConfig config_from_json(const nlohmann::json& j);
// Applies one "dotted.path=value" override to a config document. The value
// is parsed as JSON when possible and taken as a string otherwise.
void apply_override(nlohmann::json& doc, const std::string& assignment);
void validate_config(const RunConfig& cfg);

}  // namespace procrl

#endif  // PROCRL_CONFIG_HPP_
