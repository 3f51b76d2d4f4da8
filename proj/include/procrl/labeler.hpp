#ifndef PROCRL_LABELER_HPP_
#define PROCRL_LABELER_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "procrl/policy.hpp"
#include "procrl/taskgen.hpp"

namespace procrl {

enum class ResponseType { kCorrect, kRevised, kWrong };
enum class PromptClass { kEasy, kMedium, kHard };
enum class SelectionStrategy { kFull, kRemoveHard, kMediumOnly, kRevisedOnly };

std::string_view response_type_name(ResponseType t);
ResponseType response_type_from_name(std::string_view name);
std::string_view prompt_class_name(PromptClass c);
std::string_view strategy_name(SelectionStrategy s);
SelectionStrategy strategy_from_name(std::string_view name);

struct PrefixLabelRecord {
  std::string task_id;
  int response_id = 0;
  int checkpoint_id = 0;
  int m = 1;           // 1-based step index
  int prefix_len = 1;  // tokens covered by steps 1..m
  int label = 0;       // -1, 0 or +1
  ResponseType response_type = ResponseType::kWrong;
  Program tokens;      // the full response

  friend bool operator==(const PrefixLabelRecord&, const PrefixLabelRecord&) = default;
};

// Number of labeling steps when every step groups group_size tokens.
std::size_t step_count(std::size_t tokens, int group_size);
// Tokens covered by the first `step` steps.
std::size_t step_prefix_len(std::size_t step, std::size_t tokens, int group_size);

struct BestOfKResult {
  bool success = false;
  Program completion;  // passing completion when success
  int attempts = 0;
};

// Samples up to K completions of prefix (temperature 1, top_p 1) and stops at
// the first one whose full program passes every test. Completion k draws from
// substream(stream, {k}).
BestOfKResult best_of_k_completes(const PolicyModel& policy, const Task& task,
                                  std::span<const Token> prefix, int K,
                                  std::uint64_t stream);

// Decides whether the prefix covering steps 1..m can be completed.
using PrefixOracle = std::function<bool(std::size_t m)>;

struct SearchResult {
  std::vector<int> labels;  // one per step, +1 before F, -1 from F on
  std::size_t failure_point = 0;  // F, 1-based; steps + 1 when none fails
  std::vector<std::size_t> probes;  // midpoints in the order probed
};

// Binary search for the first rejected prefix over `steps` steps. When
// already_passes is true the search is skipped (F = steps + 1).
SearchResult binary_search_label(std::size_t steps, bool already_passes,
                                 const PrefixOracle& oracle);

SearchResult binary_search_label(const PolicyModel& policy, const Task& task,
                                 const Program& response, int K,
                                 std::uint64_t stream, int group_size = 1);

// Labels of steps made only of NOP tokens become 0. Throws LengthMismatch
// when labels do not cover the response's steps.
std::vector<int> apply_neutral_labels(std::span<const int> labels,
                                      std::span<const Token> response,
                                      int group_size = 1);

ResponseType classify_response(bool passes, std::size_t failure_point);
PromptClass classify_prompt(std::span<const ResponseType> types);

// Keeps records according to strategy. Prompts are grouped by
// (checkpoint_id, task_id).
std::vector<PrefixLabelRecord> select(std::span<const PrefixLabelRecord> records,
                                      SelectionStrategy strategy);

// Restores neutral labels on records collected without them.
std::vector<PrefixLabelRecord> neutralize(std::span<const PrefixLabelRecord> records,
                                          int group_size = 1);

struct CollectConfig {
  int n_per_prompt = 5;
  int K = 20;
  int group_size = 1;
  bool neutral_labels = true;
  DecodeConfig response_decode{1.0, 1.0};
};

struct ResponseLabel {
  int checkpoint_id = 0;
  std::string task_id;
  int response_id = 0;
  Program tokens;
  std::size_t steps = 0;
  std::size_t failure_point = 0;
  ResponseType type = ResponseType::kWrong;
  std::size_t distinct_probes = 0;
};

struct PrmDataset {
  std::vector<PrefixLabelRecord> records;  // sorted by (ckpt, task, response, m)
  std::vector<ResponseLabel> responses;
};

PrmDataset collect_prm_dataset(std::span<const PolicyModel> checkpoints,
                               std::span<const Task> tasks,
                               const CollectConfig& cfg, std::uint64_t seed);

// Label / response-type / prompt-class counts and the relative error position
// histogram of Revised responses.
nlohmann::json dataset_summary(std::span<const PrefixLabelRecord> records);

nlohmann::json record_to_json(const PrefixLabelRecord& r);
PrefixLabelRecord record_from_json(const nlohmann::json& j);
std::string records_to_jsonl(std::span<const PrefixLabelRecord> records);
std::vector<PrefixLabelRecord> records_from_jsonl(const std::string& text);

}  // namespace procrl

#endif  // PROCRL_LABELER_HPP_
