#include "procrl/taskgen.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include "procrl/errors.hpp"
#include "procrl/io.hpp"
#include "procrl/rng.hpp"

namespace procrl {
namespace {

// Reference programs are left-deep chains: an argument (or a binary op over
// both arguments) followed by modifications that each fold one operand into
// the running value. The shape keeps references free of dead code and gives
// behaviour cloning a consistent structure; NOP shows up occasionally so
// that no-op steps are part of the cloned behaviour.
struct Modifier {
  Token operand;  // kEnd for single-token modifiers
  Token op;
  double weight;
};

constexpr Modifier kModifiers[] = {
    {Token::kPush1, Token::kAdd, 1.0}, {Token::kPush2, Token::kAdd, 1.0},
    {Token::kPush3, Token::kAdd, 1.0}, {Token::kPush4, Token::kAdd, 1.0},
    {Token::kPush1, Token::kSub, 1.0}, {Token::kPush2, Token::kSub, 1.0},
    {Token::kPush3, Token::kSub, 1.0}, {Token::kPush4, Token::kSub, 1.0},
    {Token::kPush2, Token::kMul, 1.0}, {Token::kPush3, Token::kMul, 1.0},
    {Token::kPush4, Token::kMul, 0.6}, {Token::kArg0, Token::kAdd, 1.0},
    {Token::kArg0, Token::kSub, 0.8}, {Token::kArg0, Token::kMul, 1.0},
    {Token::kArg1, Token::kAdd, 1.0}, {Token::kArg1, Token::kSub, 0.8},
    {Token::kArg1, Token::kMul, 1.0}, {Token::kDup, Token::kAdd, 0.6},
    {Token::kDup, Token::kMul, 0.6},  {Token::kEnd, Token::kNeg, 0.8},
    {Token::kEnd, Token::kNop, 0.5},
};

bool uses_arg1(Token t) { return t == Token::kArg1; }

Program sample_reference(Rng& rng, int length, int arity) {
  Program program;
  program.reserve(static_cast<std::size_t>(length));
  int left = length - 1;  // body tokens still to place
  auto arg = [&] { return arity == 2 && uniform01(rng) < 0.5 ? Token::kArg1 : Token::kArg0; };
  constexpr Token kOps[] = {Token::kAdd, Token::kSub, Token::kMul};

  if (arity == 2 && left >= 3 && uniform01(rng) < 0.4) {
    const bool swap = uniform01(rng) < 0.5;
    program.push_back(swap ? Token::kArg1 : Token::kArg0);
    program.push_back(swap ? Token::kArg0 : Token::kArg1);
    program.push_back(kOps[uniform_int(rng, 0, 2)]);
    left -= 3;
  } else {
    program.push_back(arg());
    left -= 1;
  }

  while (left > 0) {
    double total = 0.0;
    std::array<double, std::size(kModifiers)> weights{};
    for (std::size_t i = 0; i < std::size(kModifiers); ++i) {
      const Modifier& m = kModifiers[i];
      const int cost = m.operand == Token::kEnd ? 1 : 2;
      const bool ok = cost <= left && !(uses_arg1(m.operand) && arity < 2);
      weights[i] = ok ? m.weight : 0.0;
      total += weights[i];
    }
    double u = uniform01(rng) * total;
    std::size_t pick = 0;
    for (; pick + 1 < weights.size(); ++pick) {
      if (u < weights[pick]) break;
      u -= weights[pick];
    }
    while (weights[pick] == 0.0) --pick;
    const Modifier& m = kModifiers[pick];
    if (m.operand != Token::kEnd) {
      program.push_back(m.operand);
      --left;
    }
    program.push_back(m.op);
    --left;
  }
  program.push_back(Token::kEnd);
  return program;
}

int sample_length(Rng& rng, const TaskgenConfig& cfg) {
  double total = 0.0;
  double w = 1.0;
  for (int len = cfg.min_len; len <= cfg.max_len; ++len, w *= cfg.length_decay) total += w;
  double u = uniform01(rng) * total;
  w = 1.0;
  for (int len = cfg.min_len; len < cfg.max_len; ++len, w *= cfg.length_decay) {
    if (u < w) return len;
    u -= w;
  }
  return cfg.max_len;
}

std::vector<std::int32_t> probe_args(std::size_t probe, int arity) {
  const auto& p = probe_inputs()[probe];
  return std::vector<std::int32_t>(p.begin(), p.begin() + arity);
}

}  // namespace

const std::array<std::array<std::int32_t, 2>, kProbeCount>& probe_inputs() {
  static const std::array<std::array<std::int32_t, 2>, kProbeCount> probes = {{
      {-9, 4}, {-7, -2}, {-5, 8}, {-3, 0}, {-2, -9}, {-1, 5}, {0, -6}, {1, 1},
      {2, -3}, {3, 7},   {4, -1}, {5, 2},  {6, -8}, {7, 9},  {8, 3},  {9, -5},
  }};
  return probes;
}

std::string behavior_signature(const Program& program, int arity) {
  std::uint64_t h = fnv1a64(std::to_string(arity));
  for (std::size_t p = 0; p < kProbeCount; ++p) {
    const auto args = probe_args(p, arity);
    const ExecOutcome out = execute(program, args, kDefaultFuel);
    if (!out.ok()) return {};
    const auto v = static_cast<std::uint32_t>(out.value());
    const std::array<std::uint8_t, 4> bytes = {
        static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8),
        static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 24)};
    h = fnv1a64(bytes, h);
  }
  return hex64(h);
}

std::vector<Task> generate_corpus(std::size_t count, std::uint64_t seed,
                                  int min_len, int max_len, double arity_mix) {
  TaskgenConfig cfg;
  cfg.count = count;
  cfg.min_len = min_len;
  cfg.max_len = max_len;
  cfg.arity_mix = arity_mix;
  return generate_corpus(cfg, seed);
}

std::vector<Task> generate_corpus(const TaskgenConfig& cfg,
                                  std::uint64_t seed) {
  if (cfg.min_len < 1 || cfg.min_len > cfg.max_len ||
      cfg.max_len > kMaxProgramLength) {
    throw ConfigInvalid("taskgen lengths must satisfy 1 <= min_len <= max_len <= 24");
  }
  if (cfg.arity_mix < 0.0 || cfg.arity_mix > 1.0 || !(cfg.length_decay > 0.0)) {
    throw ConfigInvalid("taskgen arity_mix must lie in [0, 1] and length_decay be positive");
  }
  const int domain = cfg.input_max - cfg.input_min + 1;
  if (cfg.tests_per_task < 1 || domain < 1) {
    throw ConfigInvalid("taskgen needs at least one test and a nonempty input range");
  }

  std::vector<Task> tasks;
  tasks.reserve(cfg.count);
  std::unordered_set<std::string> seen;
  Rng rng = substream(seed, {tag(StreamTag::kTaskgen)});
  const std::size_t budget = 10000 * cfg.count;

  for (std::size_t attempt = 0; tasks.size() < cfg.count; ++attempt) {
    if (attempt >= budget) {
      throw CorpusExhausted("generated " + std::to_string(tasks.size()) +
                            " of " + std::to_string(cfg.count) +
                            " distinct tasks within the attempt budget");
    }
    const int arity = uniform01(rng) < cfg.arity_mix ? 2 : 1;
    const int length = sample_length(rng, cfg);
    const Program reference = sample_reference(rng, length, arity);

    // Reject programs that error on a probe or ignore their arguments.
    std::set<std::int32_t> outputs;
    bool errored = false;
    for (std::size_t p = 0; p < kProbeCount && !errored; ++p) {
      const auto args = probe_args(p, arity);
      const ExecOutcome out = execute(reference, args, kDefaultFuel);
      if (out.ok()) {
        outputs.insert(out.value());
      } else {
        errored = true;
      }
    }
    if (errored || outputs.size() < 2) continue;

    std::string signature = behavior_signature(reference, arity);
    if (signature.empty() || seen.contains(signature)) continue;

    // Distinct test inputs, drawn only when the domain can supply them.
    const auto distinct_available =
        static_cast<std::size_t>(arity == 1 ? domain : domain * domain);
    std::set<std::vector<std::int32_t>> used;
    std::vector<UnitTest> tests;
    bool test_error = false;
    while (tests.size() < static_cast<std::size_t>(cfg.tests_per_task)) {
      std::vector<std::int32_t> inputs(static_cast<std::size_t>(arity));
      for (auto& v : inputs) {
        v = static_cast<std::int32_t>(uniform_int(rng, cfg.input_min, cfg.input_max));
      }
      if (used.size() < distinct_available && used.contains(inputs)) continue;
      used.insert(inputs);
      const ExecOutcome out = execute(reference, inputs, kDefaultFuel);
      if (!out.ok()) {
        test_error = true;
        break;
      }
      tests.push_back(UnitTest{std::move(inputs), out.value()});
    }
    if (test_error) continue;

    seen.insert(signature);
    Task task;
    std::array<char, 16> id{};
    std::snprintf(id.data(), id.size(), "task-%05zu", tasks.size());
    task.id = id.data();
    task.arity = arity;
    task.tests = std::move(tests);
    task.reference = reference;
    task.signature = std::move(signature);
    tasks.push_back(std::move(task));
  }
  return tasks;
}

std::pair<std::vector<Task>, std::vector<Task>> split_corpus(
    const std::vector<Task>& tasks, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigInvalid("train_fraction must lie strictly between 0 and 1");
  }
  std::vector<std::size_t> order(tasks.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = substream(seed, {tag(StreamTag::kSplit)});
  for (std::size_t i = order.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(i - 1)));
    std::swap(order[i - 1], order[j]);
  }
  const auto n_train = static_cast<std::size_t>(
      std::llround(train_fraction * static_cast<double>(tasks.size())));

  // Tasks sharing a signature stay on the same side.
  std::unordered_set<std::string> train_signatures;
  std::pair<std::vector<Task>, std::vector<Task>> out;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const Task& t = tasks[order[k]];
    const bool to_train = k < n_train ? true : train_signatures.contains(t.signature);
    if (to_train) {
      train_signatures.insert(t.signature);
      out.first.push_back(t);
    } else {
      out.second.push_back(t);
    }
  }
  return out;
}

std::string validate_task(const Task& task) {
  if (task.id.empty()) return "empty id";
  if (task.arity != 1 && task.arity != 2) return task.id + ": arity must be 1 or 2";
  if (task.tests.empty()) return task.id + ": no tests";
  for (const UnitTest& t : task.tests) {
    if (t.inputs.size() != static_cast<std::size_t>(task.arity)) {
      return task.id + ": test arity mismatch";
    }
  }
  if (!is_valid_program(task.reference)) return task.id + ": invalid reference";
  if (!passes(task.reference, task.tests)) {
    return task.id + ": reference fails its tests";
  }
  if (behavior_signature(task.reference, task.arity) != task.signature) {
    return task.id + ": signature mismatch";
  }
  return {};
}

std::string validate_corpus(const std::vector<Task>& tasks) {
  std::unordered_set<std::string> ids;
  std::unordered_set<std::string> signatures;
  for (const Task& t : tasks) {
    if (auto err = validate_task(t); !err.empty()) return err;
    if (!ids.insert(t.id).second) return t.id + ": duplicate id";
    if (!signatures.insert(t.signature).second) {
      return t.id + ": duplicate behavior signature";
    }
  }
  return {};
}

nlohmann::json program_to_json(const Program& program) {
  nlohmann::json arr = nlohmann::json::array();
  for (Token t : program) arr.push_back(std::string(token_name(t)));
  return arr;
}

Program program_from_json(const nlohmann::json& j) {
  Program program;
  for (const auto& name : j) {
    auto t = token_from_name(name.get<std::string>());
    if (!t) throw FormatError("unknown token " + name.dump());
    program.push_back(*t);
  }
  return program;
}

nlohmann::json task_to_json(const Task& task) {
  nlohmann::json tests = nlohmann::json::array();
  for (const UnitTest& t : task.tests) {
    tests.push_back({{"inputs", t.inputs}, {"expected", t.expected}});
  }
  return {{"id", task.id},
          {"arity", task.arity},
          {"tests", tests},
          {"reference", program_to_json(task.reference)},
          {"signature", task.signature}};
}

Task task_from_json(const nlohmann::json& j) {
  Task task;
  try {
    task.id = j.at("id").get<std::string>();
    task.arity = j.at("arity").get<int>();
    for (const auto& t : j.at("tests")) {
      task.tests.push_back(UnitTest{t.at("inputs").get<std::vector<std::int32_t>>(),
                                    t.at("expected").get<std::int32_t>()});
    }
    task.reference = program_from_json(j.at("reference"));
    task.signature = j.at("signature").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed task record: ") + e.what());
  }
  return task;
}

std::string corpus_to_jsonl(const std::vector<Task>& tasks) {
  std::string out;
  for (const Task& t : tasks) {
    out += task_to_json(t).dump();
    out += '\n';
  }
  return out;
}

std::vector<Task> corpus_from_jsonl(const std::string& text) {
  std::vector<Task> tasks;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      tasks.push_back(task_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(std::string("corpus line is not JSON: ") + e.what());
    }
  }
  return tasks;
}

void save_corpus(const std::filesystem::path& path,
                 const std::vector<Task>& tasks) {
  write_file(path, corpus_to_jsonl(tasks));
}

std::vector<Task> load_corpus(const std::filesystem::path& path) {
  auto tasks = corpus_from_jsonl(read_file(path));
  if (auto err = validate_corpus(tasks); !err.empty()) {
    throw FormatError("invalid corpus " + path.string() + ": " + err);
  }
  return tasks;
}

}  // namespace procrl
