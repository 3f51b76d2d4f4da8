#include "procrl/labeler.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "procrl/errors.hpp"
#include "procrl/io.hpp"
#include "procrl/parallel.hpp"

namespace procrl {
namespace {

constexpr std::uint64_t kResponseSlot = 0xffffffffULL;

auto record_key(const PrefixLabelRecord& r) {
  return std::tie(r.checkpoint_id, r.task_id, r.response_id, r.m);
}

}  // namespace

std::string_view response_type_name(ResponseType t) {
  switch (t) {
    case ResponseType::kCorrect:
      return "Correct";
    case ResponseType::kRevised:
      return "Revised";
    case ResponseType::kWrong:
      return "Wrong";
  }
  return "Wrong";
}

ResponseType response_type_from_name(std::string_view name) {
  if (name == "Correct") return ResponseType::kCorrect;
  if (name == "Revised") return ResponseType::kRevised;
  if (name == "Wrong") return ResponseType::kWrong;
  throw FormatError("unknown response type " + std::string(name));
}

std::string_view prompt_class_name(PromptClass c) {
  switch (c) {
    case PromptClass::kEasy:
      return "Easy";
    case PromptClass::kMedium:
      return "Medium";
    case PromptClass::kHard:
      return "Hard";
  }
  return "Medium";
}

std::string_view strategy_name(SelectionStrategy s) {
  switch (s) {
    case SelectionStrategy::kFull:
      return "full";
    case SelectionStrategy::kRemoveHard:
      return "remove_hard";
    case SelectionStrategy::kMediumOnly:
      return "medium_only";
    case SelectionStrategy::kRevisedOnly:
      return "revised_only";
  }
  return "full";
}

SelectionStrategy strategy_from_name(std::string_view name) {
  for (auto s : {SelectionStrategy::kFull, SelectionStrategy::kRemoveHard,
                 SelectionStrategy::kMediumOnly, SelectionStrategy::kRevisedOnly}) {
    if (strategy_name(s) == name) return s;
  }
  throw ConfigInvalid("unknown selection strategy '" + std::string(name) + "'");
}

std::size_t step_count(std::size_t tokens, int group_size) {
  const auto g = static_cast<std::size_t>(std::max(1, group_size));
  return (tokens + g - 1) / g;
}

std::size_t step_prefix_len(std::size_t step, std::size_t tokens, int group_size) {
  return std::min(tokens, step * static_cast<std::size_t>(std::max(1, group_size)));
}

BestOfKResult best_of_k_completes(const PolicyModel& policy, const Task& task,
                                  std::span<const Token> prefix, int K,
                                  std::uint64_t stream) {
  BestOfKResult result;
  // A prefix that already ends the program admits only the empty completion.
  if ((!prefix.empty() && prefix.back() == Token::kEnd) ||
      static_cast<int>(prefix.size()) >= kMaxProgramLength) {
    result.attempts = 1;
    result.success = passes(prefix, task.tests);
    return result;
  }
  const TaskFeatures features = encode_task(task);
  Program full;
  for (int k = 0; k < K; ++k) {
    Rng rng = substream(stream, {static_cast<std::uint64_t>(k)});
    SampledTokens completion =
        sample_continuation(policy, features, prefix, rng, DecodeConfig{1.0, 1.0});
    ++result.attempts;
    full.assign(prefix.begin(), prefix.end());
    full.insert(full.end(), completion.tokens.begin(), completion.tokens.end());
    if (passes(full, task.tests)) {
      result.success = true;
      result.completion = std::move(completion.tokens);
      break;
    }
  }
  return result;
}

SearchResult binary_search_label(std::size_t steps, bool already_passes,
                                 const PrefixOracle& oracle) {
  SearchResult result;
  result.failure_point = steps + 1;
  if (!already_passes) {
    // Signed bounds: R may drop to L - 1 = 0.
    std::int64_t lo = 1;
    std::int64_t hi = static_cast<std::int64_t>(steps);
    while (lo <= hi) {
      const std::int64_t mid = (lo + hi) / 2;
      result.probes.push_back(static_cast<std::size_t>(mid));
      if (oracle(static_cast<std::size_t>(mid))) {
        lo = mid + 1;
      } else {
        result.failure_point = static_cast<std::size_t>(mid);
        hi = mid - 1;
      }
    }
  }
  result.labels.resize(steps);
  for (std::size_t t = 1; t <= steps; ++t) {
    result.labels[t - 1] = t < result.failure_point ? 1 : -1;
  }
  return result;
}

SearchResult binary_search_label(const PolicyModel& policy, const Task& task,
                                 const Program& response, int K,
                                 std::uint64_t stream, int group_size) {
  const std::size_t steps = step_count(response.size(), group_size);
  const bool ok = passes(response, task.tests);
  return binary_search_label(steps, ok, [&](std::size_t m) {
    const auto len = step_prefix_len(m, response.size(), group_size);
    const std::uint64_t probe_stream = stream_key(stream, {static_cast<std::uint64_t>(m)});
    return best_of_k_completes(policy, task, std::span(response).first(len), K,
                               probe_stream)
        .success;
  });
}

std::vector<int> apply_neutral_labels(std::span<const int> labels,
                                      std::span<const Token> response,
                                      int group_size) {
  const std::size_t steps = step_count(response.size(), group_size);
  if (labels.size() != steps) {
    throw LengthMismatch("labels cover " + std::to_string(labels.size()) +
                         " steps, response has " + std::to_string(steps));
  }
  std::vector<int> out(labels.begin(), labels.end());
  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t begin = step_prefix_len(s, response.size(), group_size);
    const std::size_t end = step_prefix_len(s + 1, response.size(), group_size);
    bool all_nop = true;
    for (std::size_t i = begin; i < end; ++i) all_nop = all_nop && response[i] == Token::kNop;
    if (all_nop) out[s] = 0;
  }
  return out;
}

ResponseType classify_response(bool passes, std::size_t failure_point) {
  if (passes) return ResponseType::kCorrect;
  return failure_point <= 1 ? ResponseType::kWrong : ResponseType::kRevised;
}

PromptClass classify_prompt(std::span<const ResponseType> types) {
  if (types.empty()) throw EmptyDataset("cannot classify a prompt without responses");
  const bool all_correct = std::all_of(types.begin(), types.end(), [](ResponseType t) {
    return t == ResponseType::kCorrect;
  });
  if (all_correct) return PromptClass::kEasy;
  const bool all_wrong = std::all_of(types.begin(), types.end(), [](ResponseType t) {
    return t == ResponseType::kWrong;
  });
  return all_wrong ? PromptClass::kHard : PromptClass::kMedium;
}

namespace {

using PromptKey = std::pair<int, std::string>;

std::map<PromptKey, PromptClass> classify_prompts(
    std::span<const PrefixLabelRecord> records) {
  std::map<PromptKey, std::map<int, ResponseType>> responses;
  for (const auto& r : records) {
    responses[{r.checkpoint_id, r.task_id}][r.response_id] = r.response_type;
  }
  std::map<PromptKey, PromptClass> classes;
  for (const auto& [key, by_id] : responses) {
    std::vector<ResponseType> types;
    for (const auto& [id, type] : by_id) types.push_back(type);
    classes[key] = classify_prompt(types);
  }
  return classes;
}

}  // namespace

std::vector<PrefixLabelRecord> select(std::span<const PrefixLabelRecord> records,
                                      SelectionStrategy strategy) {
  if (strategy == SelectionStrategy::kFull) {
    return {records.begin(), records.end()};
  }
  std::vector<PrefixLabelRecord> out;
  if (strategy == SelectionStrategy::kRevisedOnly) {
    for (const auto& r : records) {
      if (r.response_type == ResponseType::kRevised) out.push_back(r);
    }
    return out;
  }
  const auto classes = classify_prompts(records);
  for (const auto& r : records) {
    const PromptClass c = classes.at({r.checkpoint_id, r.task_id});
    const bool keep = strategy == SelectionStrategy::kRemoveHard
                          ? c != PromptClass::kHard
                          : c == PromptClass::kMedium;
    if (keep) out.push_back(r);
  }
  return out;
}

std::vector<PrefixLabelRecord> neutralize(std::span<const PrefixLabelRecord> records,
                                          int group_size) {
  std::vector<PrefixLabelRecord> out(records.begin(), records.end());
  for (auto& r : out) {
    const std::size_t begin = step_prefix_len(static_cast<std::size_t>(r.m - 1), r.tokens.size(), group_size);
    const std::size_t end = step_prefix_len(static_cast<std::size_t>(r.m), r.tokens.size(), group_size);
    bool all_nop = begin < end;
    for (std::size_t i = begin; i < end; ++i) all_nop = all_nop && r.tokens[i] == Token::kNop;
    if (all_nop) r.label = 0;
  }
  return out;
}

PrmDataset collect_prm_dataset(std::span<const PolicyModel> checkpoints,
                               std::span<const Task> tasks,
                               const CollectConfig& cfg, std::uint64_t seed) {
  if (checkpoints.empty()) throw ConfigInvalid("collection needs at least one checkpoint");
  if (cfg.n_per_prompt < 1 || cfg.K < 1) {
    throw ConfigInvalid("n_per_prompt and K must be at least 1");
  }
  const std::size_t jobs = checkpoints.size() * tasks.size();
  std::vector<std::vector<ResponseLabel>> per_job(jobs);

  parallel_for(jobs, [&](std::size_t job) {
    const std::size_t c = job / tasks.size();
    const Task& task = tasks[job % tasks.size()];
    const std::uint64_t task_key = fnv1a64(task.id);
    for (int n = 0; n < cfg.n_per_prompt; ++n) {
      const std::uint64_t base =
          stream_key(seed, {tag(StreamTag::kCollect), c, task_key, static_cast<std::uint64_t>(n)});
      Rng rng = substream(base, {kResponseSlot});
      ResponseLabel label;
      label.checkpoint_id = static_cast<int>(c);
      label.task_id = task.id;
      label.response_id = n;
      label.tokens = sample_response(checkpoints[c], task, rng, cfg.response_decode).tokens;
      label.steps = step_count(label.tokens.size(), cfg.group_size);
      if (label.tokens.empty()) continue;
      const bool ok = passes(label.tokens, task.tests);
      const SearchResult search =
          binary_search_label(checkpoints[c], task, label.tokens, cfg.K, base, cfg.group_size);
      label.failure_point = search.failure_point;
      label.type = classify_response(ok, search.failure_point);
      label.distinct_probes = std::set(search.probes.begin(), search.probes.end()).size();
      per_job[job].push_back(std::move(label));
    }
  });

  PrmDataset dataset;
  for (auto& job : per_job) {
    for (auto& response : job) dataset.responses.push_back(std::move(response));
  }
  for (const ResponseLabel& response : dataset.responses) {
    std::vector<int> labels(response.steps);
    for (std::size_t s = 1; s <= response.steps; ++s) {
      labels[s - 1] = s < response.failure_point ? 1 : -1;
    }
    if (cfg.neutral_labels) {
      labels = apply_neutral_labels(labels, response.tokens, cfg.group_size);
    }
    for (std::size_t s = 1; s <= response.steps; ++s) {
      PrefixLabelRecord r;
      r.task_id = response.task_id;
      r.response_id = response.response_id;
      r.checkpoint_id = response.checkpoint_id;
      r.m = static_cast<int>(s);
      r.prefix_len = static_cast<int>(step_prefix_len(s, response.tokens.size(), cfg.group_size));
      r.label = labels[s - 1];
      r.response_type = response.type;
      r.tokens = response.tokens;
      dataset.records.push_back(std::move(r));
    }
  }
  std::stable_sort(dataset.records.begin(), dataset.records.end(),
                   [](const auto& a, const auto& b) { return record_key(a) < record_key(b); });
  return dataset;
}

nlohmann::json dataset_summary(std::span<const PrefixLabelRecord> records) {
  std::map<int, std::size_t> labels = {{-1, 0}, {0, 0}, {1, 0}};
  std::map<std::string, std::size_t> types = {{"Correct", 0}, {"Revised", 0}, {"Wrong", 0}};
  std::map<std::string, std::size_t> classes = {{"Easy", 0}, {"Medium", 0}, {"Hard", 0}};
  constexpr int kBins = 10;
  std::vector<std::size_t> histogram(kBins, 0);

  // One entry per response: (steps, first rejected step).
  std::map<std::tuple<int, std::string, int>, std::pair<std::size_t, std::size_t>> responses;
  std::size_t total_tokens = 0;
  for (const auto& r : records) {
    ++labels[r.label];
    auto [it, inserted] = responses.try_emplace({r.checkpoint_id, r.task_id, r.response_id},
                                                std::pair<std::size_t, std::size_t>{0, 0});
    if (inserted) {
      ++types[std::string(response_type_name(r.response_type))];
      total_tokens += r.tokens.size();
    }
    it->second.first = std::max(it->second.first, static_cast<std::size_t>(r.m));
    if (r.label == -1 && (it->second.second == 0 || static_cast<std::size_t>(r.m) < it->second.second)) {
      it->second.second = static_cast<std::size_t>(r.m);
    }
  }
  for (const auto& [key, c] : classify_prompts(records)) {
    ++classes[std::string(prompt_class_name(c))];
  }
  // F / T for Revised responses, with F taken as the first step labeled -1.
  for (const auto& r : records) {
    if (r.response_type != ResponseType::kRevised || r.m != 1) continue;
    const auto& [steps, first_reject] = responses.at({r.checkpoint_id, r.task_id, r.response_id});
    if (first_reject == 0 || steps == 0) continue;
    const double rel = static_cast<double>(first_reject) / static_cast<double>(steps);
    const int bin = std::clamp(static_cast<int>(std::ceil(rel * kBins)) - 1, 0, kBins - 1);
    ++histogram[static_cast<std::size_t>(bin)];
  }

  nlohmann::json label_json = nlohmann::json::object();
  for (const auto& [l, n] : labels) label_json[std::to_string(l)] = n;
  nlohmann::json edges = nlohmann::json::array();
  for (int b = 0; b <= kBins; ++b) edges.push_back(static_cast<double>(b) / kBins);
  return {{"records", records.size()},
          {"responses", responses.size()},
          {"tokens", total_tokens},
          {"labels", label_json},
          {"response_types", types},
          {"prompt_classes", classes},
          {"relative_error_position", {{"edges", edges}, {"counts", histogram}}}};
}

nlohmann::json record_to_json(const PrefixLabelRecord& r) {
  return {{"task_id", r.task_id},
          {"response_id", r.response_id},
          {"checkpoint_id", r.checkpoint_id},
          {"tokens", program_to_json(r.tokens)},
          {"m", r.m},
          {"label", r.label},
          {"response_type", std::string(response_type_name(r.response_type))}};
}

PrefixLabelRecord record_from_json(const nlohmann::json& j) {
  PrefixLabelRecord r;
  try {
    r.task_id = j.at("task_id").get<std::string>();
    r.response_id = j.at("response_id").get<int>();
    r.checkpoint_id = j.at("checkpoint_id").get<int>();
    r.tokens = program_from_json(j.at("tokens"));
    r.m = j.at("m").get<int>();
    r.prefix_len = j.contains("prefix_len") ? j.at("prefix_len").get<int>() : r.m;
    r.label = j.at("label").get<int>();
    r.response_type = response_type_from_name(j.at("response_type").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed PRM record: ") + e.what());
  }
  if (r.label < -1 || r.label > 1) throw FormatError("PRM label outside {-1, 0, +1}");
  if (r.m < 1 || r.prefix_len < 1 || static_cast<std::size_t>(r.prefix_len) > r.tokens.size()) {
    throw FormatError("PRM record step outside its response");
  }
  return r;
}

std::string records_to_jsonl(std::span<const PrefixLabelRecord> records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::json j = record_to_json(r);
    if (r.prefix_len != r.m) j["prefix_len"] = r.prefix_len;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<PrefixLabelRecord> records_from_jsonl(const std::string& text) {
  std::vector<PrefixLabelRecord> records;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      records.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(std::string("PRM dataset line is not JSON: ") + e.what());
    }
  }
  return records;
}

}  // namespace procrl
