#include <doctest.h>

#include <set>

#include "procrl/errors.hpp"
#include "procrl/taskgen.hpp"

using namespace procrl;

TEST_CASE("generate_corpus: empty and deterministic") {
  CHECK(generate_corpus(0, 1, 3, 10, 0.5).empty());
  const auto a = generate_corpus(200, 7, 3, 10, 0.5);
  const auto b = generate_corpus(200, 7, 3, 10, 0.5);
  REQUIRE(a.size() == 200);
  CHECK(a == b);
  const auto c = generate_corpus(200, 8, 3, 10, 0.5);
  CHECK_FALSE(a == c);
}

TEST_CASE("generated tasks satisfy their invariants") {
  const auto tasks = generate_corpus(300, 3, 3, 10, 0.5);
  CHECK(validate_corpus(tasks).empty());
  std::set<std::string> signatures;
  std::set<std::string> ids;
  for (const Task& t : tasks) {
    // Independent re-check through the interpreter.
    CHECK(passes_all(t.reference, t.tests).all_passed);
    CHECK(t.tests.size() == 5);
    CHECK(t.reference.size() >= 3);
    CHECK(t.reference.size() <= 10);
    CHECK(t.reference.back() == Token::kEnd);
    for (const UnitTest& u : t.tests) {
      CHECK(u.inputs.size() == static_cast<std::size_t>(t.arity));
      for (int v : u.inputs) {
        CHECK(v >= -9);
        CHECK(v <= 9);
      }
    }
    CHECK(t.signature == behavior_signature(t.reference, t.arity));
    signatures.insert(t.signature);
    ids.insert(t.id);
  }
  CHECK(signatures.size() == tasks.size());
  CHECK(ids.size() == tasks.size());
}

TEST_CASE("references are not constant functions") {
  for (const Task& t : generate_corpus(200, 11, 3, 10, 0.5)) {
    std::set<std::int32_t> outs;
    for (const auto& p : probe_inputs()) {
      const std::vector<std::int32_t> args(p.begin(), p.begin() + t.arity);
      const ExecOutcome o = execute(t.reference, args);
      REQUIRE(o.ok());
      outs.insert(o.value());
    }
    CHECK(outs.size() >= 2);
  }
}

TEST_CASE("arity mix extremes") {
  for (const Task& t : generate_corpus(50, 2, 3, 10, 0.0)) CHECK(t.arity == 1);
  for (const Task& t : generate_corpus(50, 2, 3, 10, 1.0)) CHECK(t.arity == 2);
}

TEST_CASE("impossible corpus sizes exhaust the budget") {
  // Single-token bodies over one argument admit only a couple of behaviours.
  CHECK_THROWS_AS(generate_corpus(20, 1, 2, 2, 0.0), CorpusExhausted);
  CHECK_THROWS_AS(generate_corpus(5, 1, 5, 3, 0.5), ConfigInvalid);
}

TEST_CASE("split_corpus") {
  const auto tasks = generate_corpus(100, 5, 3, 10, 0.5);
  const auto [train, held] = split_corpus(tasks, 0.8, 9);
  CHECK(train.size() == 80);
  CHECK(held.size() == 20);
  std::set<std::string> all;
  for (const auto& t : train) all.insert(t.id);
  for (const auto& t : held) {
    CHECK_FALSE(all.contains(t.id));
    all.insert(t.id);
  }
  CHECK(all.size() == 100);
  const auto again = split_corpus(tasks, 0.8, 9);
  CHECK(again.first == train);
  CHECK(again.second == held);
  std::set<std::string> train_sigs;
  for (const auto& t : train) train_sigs.insert(t.signature);
  for (const auto& t : held) CHECK_FALSE(train_sigs.contains(t.signature));
}

TEST_CASE("corpus serialization round-trips field for field") {
  const auto tasks = generate_corpus(60, 4, 3, 10, 0.5);
  const std::string text = corpus_to_jsonl(tasks);
  CHECK(corpus_from_jsonl(text) == tasks);
  CHECK(corpus_to_jsonl(corpus_from_jsonl(text)) == text);
  const auto j = task_to_json(tasks.front());
  for (const char* key : {"id", "arity", "tests", "reference", "signature"}) {
    CHECK(j.contains(key));
  }
  CHECK(j["reference"].back() == "END");
}

TEST_CASE("validate_task flags broken tasks") {
  Task t = generate_corpus(1, 1, 3, 10, 0.5).front();
  CHECK(validate_task(t).empty());
  Task wrong = t;
  wrong.tests[0].expected += 1;
  CHECK_FALSE(validate_task(wrong).empty());
  Task bad_arity = t;
  bad_arity.tests[0].inputs.push_back(0);
  bad_arity.tests[0].inputs.push_back(0);
  CHECK_FALSE(validate_task(bad_arity).empty());
}
