#include <doctest.h>

#include <cmath>
#include <set>

#include "procrl/errors.hpp"
#include "procrl/labeler.hpp"

using namespace procrl;

namespace {

// Policy that emits `tok` with probability ~1 at every position.
PolicyModel constant_policy(Token tok) {
  DenseNet net(policy_dims());
  net.bias(net.num_layers() - 1)[static_cast<std::size_t>(token_id(tok))] = 60.0;
  return PolicyModel::from_net(std::move(net));
}

Task zero_task() {
  Task t;
  t.id = "zero";
  t.arity = 1;
  t.reference = {Token::kPush0, Token::kEnd};
  for (int x : {1, 2, 3}) t.tests.push_back({{x}, 0});
  return t;
}

PrefixLabelRecord rec(const std::string& task, int response, int m, int label,
                      ResponseType type, int ckpt = 0) {
  PrefixLabelRecord r;
  r.task_id = task;
  r.response_id = response;
  r.checkpoint_id = ckpt;
  r.m = m;
  r.prefix_len = m;
  r.label = label;
  r.response_type = type;
  r.tokens = {Token::kArg0, Token::kNop, Token::kEnd};
  return r;
}

}  // namespace

TEST_CASE("binary search matches a threshold oracle for every T and F") {
  for (std::size_t T = 1; T <= 24; ++T) {
    const auto bound = static_cast<std::size_t>(std::floor(std::log2(static_cast<double>(T)))) + 1;
    for (std::size_t F = 1; F <= T + 1; ++F) {
      std::size_t calls = 0;
      const SearchResult r = binary_search_label(T, false, [&](std::size_t m) {
        ++calls;
        return m < F;
      });
      CHECK(r.failure_point == F);
      REQUIRE(r.labels.size() == T);
      // Linear-scan oracle.
      for (std::size_t t = 1; t <= T; ++t) CHECK(r.labels[t - 1] == (t < F ? 1 : -1));
      CHECK(calls <= bound);
      CHECK(r.probes.size() == calls);
    }
  }
}

TEST_CASE("binary search probe order on a five-step response") {
  const SearchResult r = binary_search_label(5, false, [](std::size_t m) { return m <= 3; });
  CHECK(r.probes == std::vector<std::size_t>{3, 4});
  CHECK(r.failure_point == 4);
  CHECK(r.labels == std::vector<int>{1, 1, 1, -1, -1});
}

TEST_CASE("binary search edge cases") {
  const SearchResult none = binary_search_label(6, false, [](std::size_t) { return false; });
  CHECK(none.failure_point == 1);
  CHECK(none.labels == std::vector<int>(6, -1));

  std::size_t calls = 0;
  const SearchResult passing = binary_search_label(4, true, [&](std::size_t) {
    ++calls;
    return false;
  });
  CHECK(calls == 0);
  CHECK(passing.failure_point == 5);
  CHECK(passing.labels == std::vector<int>(4, 1));
}

TEST_CASE("best_of_k_completes") {
  const Task task = zero_task();
  const PolicyModel end_policy = constant_policy(Token::kEnd);

  SUBCASE("complete passing prefix") {
    const Program p{Token::kPush0, Token::kEnd};
    const auto r = best_of_k_completes(end_policy, task, p, 1, 3);
    CHECK(r.success);
    CHECK(r.completion.empty());
  }
  SUBCASE("bare END cannot pass") {
    const Program p{Token::kEnd};
    CHECK_FALSE(best_of_k_completes(end_policy, task, p, 5, 3).success);
  }
  SUBCASE("early stop") {
    const Program p{Token::kPush0};
    const auto r = best_of_k_completes(end_policy, task, p, 20, 3);
    CHECK(r.success);
    CHECK(r.attempts == 1);
    CHECK(r.completion == Program{Token::kEnd});
  }
  SUBCASE("exhausts K on failure") {
    const Program p{Token::kPush1};
    const auto r = best_of_k_completes(end_policy, task, p, 7, 3);
    CHECK_FALSE(r.success);
    CHECK(r.attempts == 7);
  }
}

TEST_CASE("policy-backed labeling") {
  const Task task = zero_task();
  const PolicyModel end_policy = constant_policy(Token::kEnd);
  // PUSH0 ARG0 ADD END fails; every prefix of length >= 2 is unrecoverable
  // under an END-only completer, the one-token prefix completes to PUSH0 END.
  const Program response{Token::kPush0, Token::kArg0, Token::kAdd, Token::kEnd};
  const SearchResult r = binary_search_label(end_policy, task, response, 4, 11);
  CHECK(r.failure_point == 2);
  CHECK(r.labels == std::vector<int>{1, -1, -1, -1});
  CHECK(classify_response(false, r.failure_point) == ResponseType::kRevised);

  const Program good{Token::kPush0, Token::kNop, Token::kEnd};
  const SearchResult g = binary_search_label(end_policy, task, good, 4, 11);
  CHECK(g.probes.empty());
  CHECK(g.failure_point == 4);
}

TEST_CASE("neutral labels") {
  const Program r1{Token::kArg0, Token::kPush1, Token::kNop};
  CHECK(apply_neutral_labels(std::vector<int>{1, 1, -1}, r1) == std::vector<int>{1, 1, 0});
  const Program r2{Token::kArg0, Token::kNop, Token::kEnd};
  CHECK(apply_neutral_labels(std::vector<int>{1, 1, -1}, r2) == std::vector<int>{1, 0, -1});
  const Program r3{Token::kArg0, Token::kPush1, Token::kEnd};
  CHECK(apply_neutral_labels(std::vector<int>{1, -1, -1}, r3) == std::vector<int>{1, -1, -1});
  const Program r4(3, Token::kNop);
  CHECK(apply_neutral_labels(std::vector<int>{1, -1, -1}, r4) == std::vector<int>{0, 0, 0});
  CHECK_THROWS_AS(apply_neutral_labels(std::vector<int>{1, 1}, r3), LengthMismatch);

  // Groups of two: a step is neutral only when all of its tokens are NOP.
  const Program r5{Token::kNop, Token::kNop, Token::kNop, Token::kArg0, Token::kEnd};
  CHECK(apply_neutral_labels(std::vector<int>{1, 1, -1}, r5, 2) == std::vector<int>{0, 1, -1});
}

TEST_CASE("step grouping") {
  CHECK(step_count(5, 1) == 5);
  CHECK(step_count(5, 2) == 3);
  CHECK(step_prefix_len(3, 5, 2) == 5);
  CHECK(step_prefix_len(2, 5, 2) == 4);
}

TEST_CASE("classification") {
  CHECK(classify_response(true, 5) == ResponseType::kCorrect);
  CHECK(classify_response(false, 1) == ResponseType::kWrong);
  CHECK(classify_response(false, 3) == ResponseType::kRevised);

  using RT = ResponseType;
  CHECK(classify_prompt(std::vector<RT>(5, RT::kCorrect)) == PromptClass::kEasy);
  CHECK(classify_prompt(std::vector<RT>(5, RT::kWrong)) == PromptClass::kHard);
  CHECK(classify_prompt(std::vector<RT>{RT::kCorrect, RT::kCorrect, RT::kWrong, RT::kWrong,
                                        RT::kWrong}) == PromptClass::kMedium);
  CHECK(classify_prompt(std::vector<RT>{RT::kRevised}) == PromptClass::kMedium);
  CHECK_THROWS_AS(classify_prompt(std::vector<RT>{}), EmptyDataset);
}

TEST_CASE("selection strategies") {
  using RT = ResponseType;
  std::vector<PrefixLabelRecord> rs;
  // easy: two correct responses
  rs.push_back(rec("easy", 0, 1, 1, RT::kCorrect));
  rs.push_back(rec("easy", 1, 1, 1, RT::kCorrect));
  // hard: wrong only
  rs.push_back(rec("hard", 0, 1, -1, RT::kWrong));
  rs.push_back(rec("hard", 1, 1, -1, RT::kWrong));
  // medium: revised + wrong
  rs.push_back(rec("mid", 0, 1, 1, RT::kRevised));
  rs.push_back(rec("mid", 0, 2, -1, RT::kRevised));
  rs.push_back(rec("mid", 1, 1, -1, RT::kWrong));
  // Same task id, different checkpoint: its own prompt, here Hard.
  rs.push_back(rec("easy", 0, 1, -1, RT::kWrong, 1));

  CHECK(select(rs, SelectionStrategy::kFull) == rs);

  const auto no_hard = select(rs, SelectionStrategy::kRemoveHard);
  CHECK(no_hard.size() == 5);
  for (const auto& r : no_hard) {
    CHECK(r.task_id != "hard");
    CHECK(r.checkpoint_id == 0);
  }

  const auto medium = select(rs, SelectionStrategy::kMediumOnly);
  CHECK(medium.size() == 3);
  for (const auto& r : medium) CHECK(r.task_id == "mid");

  const auto revised = select(rs, SelectionStrategy::kRevisedOnly);
  CHECK(revised.size() == 2);
  for (const auto& r : revised) CHECK(r.response_type == RT::kRevised);

  std::vector<PrefixLabelRecord> none(rs.begin(), rs.begin() + 4);
  CHECK(select(none, SelectionStrategy::kRevisedOnly).empty());

  CHECK(strategy_from_name(strategy_name(SelectionStrategy::kMediumOnly)) ==
        SelectionStrategy::kMediumOnly);
}

TEST_CASE("neutralize restores NOP labels") {
  using RT = ResponseType;
  std::vector<PrefixLabelRecord> rs{rec("a", 0, 1, 1, RT::kRevised), rec("a", 0, 2, 1, RT::kRevised),
                                    rec("a", 0, 3, -1, RT::kRevised)};
  const auto n = neutralize(rs);
  CHECK(n[0].label == 1);
  CHECK(n[1].label == 0);
  CHECK(n[2].label == -1);
}

TEST_CASE("record serialization round-trips") {
  using RT = ResponseType;
  std::vector<PrefixLabelRecord> rs{rec("a", 0, 1, 1, RT::kRevised), rec("b", 3, 2, 0, RT::kWrong, 2),
                                    rec("c", 1, 1, -1, RT::kCorrect)};
  CHECK(records_from_jsonl(records_to_jsonl(rs)) == rs);
  CHECK(record_from_json(record_to_json(rs[1])) == rs[1]);
  CHECK_THROWS_AS(records_from_jsonl("{\"task_id\": 3}\n"), FormatError);
}

TEST_CASE("collection is deterministic and well formed") {
  TaskgenConfig tc;
  tc.count = 12;
  const auto tasks = generate_corpus(tc, 5);
  const std::vector<PolicyModel> ckpts{PolicyModel::init(1), PolicyModel::init(2)};
  CollectConfig cfg;
  cfg.n_per_prompt = 2;
  cfg.K = 3;
  const PrmDataset a = collect_prm_dataset(ckpts, tasks, cfg, 9);
  const PrmDataset b = collect_prm_dataset(ckpts, tasks, cfg, 9);
  CHECK(a.records == b.records);
  CHECK(a.responses.size() == 2 * 12 * 2);

  for (const ResponseLabel& r : a.responses) {
    CHECK(r.distinct_probes <= static_cast<std::size_t>(std::floor(std::log2(static_cast<double>(r.steps)))) + 1);
  }
  // Non-zero labels are monotone within each response.
  std::set<std::tuple<int, std::string, int>> seen_neg;
  for (const auto& r : a.records) {
    CHECK((r.label >= -1 && r.label <= 1));
    const auto key = std::make_tuple(r.checkpoint_id, r.task_id, r.response_id);
    if (r.label == -1) seen_neg.insert(key);
    if (r.label == 1) CHECK(seen_neg.count(key) == 0);
    if (r.tokens[static_cast<std::size_t>(r.m - 1)] == Token::kNop) CHECK(r.label == 0);
  }
  const auto summary = dataset_summary(a.records);
  CHECK(summary.is_object());
}
