#ifndef PROCRL_TASKGEN_HPP_
#define PROCRL_TASKGEN_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "procrl/minilang.hpp"

namespace procrl {

struct Task {
  std::string id;
  int arity = 1;
  std::vector<UnitTest> tests;
  Program reference;
  std::string signature;

  friend bool operator==(const Task&, const Task&) = default;
};

struct TaskgenConfig {
  std::size_t count = 600;
  int min_len = 3;
  int max_len = 10;
  // Fraction of two-argument tasks.
  double arity_mix = 0.5;
  int tests_per_task = 5;
  int input_min = -9;
  int input_max = 9;
  // P(length = L) is proportional to length_decay^(L - min_len).
  double length_decay = 0.7;
};

inline constexpr int kProbeCount = 16;
// Fixed probe tuples; single-argument tasks read only the first slot.
const std::array<std::array<std::int32_t, 2>, kProbeCount>& probe_inputs();

// Hex hash of the arity and the program's outputs on the probe set.
// Returns an empty string if the program errors on any probe.
std::string behavior_signature(const Program& program, int arity);

// Throws CorpusExhausted when `count` distinct behaviours cannot be found
// within 10000 * count sampling attempts.
std::vector<Task> generate_corpus(std::size_t count, std::uint64_t seed,
                                  int min_len, int max_len, double arity_mix);
std::vector<Task> generate_corpus(const TaskgenConfig& cfg,
                                  std::uint64_t seed);

std::pair<std::vector<Task>, std::vector<Task>> split_corpus(
    const std::vector<Task>& tasks, double train_fraction, std::uint64_t seed);

// Re-checks every Task invariant; returns a description of the first
// violation, or an empty string.
std::string validate_task(const Task& task);
std::string validate_corpus(const std::vector<Task>& tasks);

nlohmann::json program_to_json(const Program& program);
Program program_from_json(const nlohmann::json& j);

nlohmann::json task_to_json(const Task& task);
Task task_from_json(const nlohmann::json& j);

std::string corpus_to_jsonl(const std::vector<Task>& tasks);
std::vector<Task> corpus_from_jsonl(const std::string& text);
void save_corpus(const std::filesystem::path& path,
                 const std::vector<Task>& tasks);
std::vector<Task> load_corpus(const std::filesystem::path& path);

}  // namespace procrl

#endif  // PROCRL_TASKGEN_HPP_
