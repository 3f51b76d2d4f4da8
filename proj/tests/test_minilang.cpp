#include <doctest.h>

#include <limits>

#include "procrl/minilang.hpp"

using namespace procrl;

namespace {
using T = Token;
}

TEST_CASE("token ids are contiguous and names round-trip") {
  for (int id = 0; id < kVocabSize; ++id) {
    const Token t = token_from_id(id);
    CHECK(token_id(t) == id);
    const auto back = token_from_name(token_name(t));
    REQUIRE(back.has_value());
    CHECK(*back == t);
  }
  CHECK(token_name(T::kPush0) == "PUSH_0");
  CHECK(token_name(T::kArg1) == "ARG1");
  CHECK_FALSE(token_from_name("PUSH_5").has_value());
}

TEST_CASE("execute: stack semantics") {
  const std::vector<std::int32_t> three{3};
  CHECK(execute(Program{T::kArg0, T::kPush2, T::kMul, T::kEnd}, three) == ExecOutcome::Ok(6));
  // Top of stack is the right operand of SUB.
  CHECK(execute(Program{T::kPush4, T::kPush1, T::kSub, T::kEnd}, {}) == ExecOutcome::Ok(3));
  CHECK(execute(Program{T::kPush1, T::kPush4, T::kSwap, T::kSub, T::kEnd}, {}) ==
        ExecOutcome::Ok(3));
  CHECK(execute(Program{T::kPush3, T::kNeg, T::kDup, T::kAdd}, {}) == ExecOutcome::Ok(-6));
  CHECK(execute(Program{T::kArg0, T::kNop, T::kNop, T::kEnd}, three) == ExecOutcome::Ok(3));
  // Halting at END ignores nothing after it: END is final by construction,
  // but execution of a raw sequence stops there.
  CHECK(execute(Program{T::kPush1, T::kEnd, T::kPush2}, {}) == ExecOutcome::Ok(1));
}

TEST_CASE("execute: error variants") {
  CHECK(execute(Program{T::kAdd}, {}) == ExecOutcome::Err(ExecError::kStackUnderflow));
  CHECK(execute(Program{T::kNeg}, {}) == ExecOutcome::Err(ExecError::kStackUnderflow));
  CHECK(execute(Program{T::kArg1, T::kEnd}, std::vector<std::int32_t>{1}) ==
        ExecOutcome::Err(ExecError::kStackUnderflow));
  CHECK(execute(Program{T::kNop, T::kEnd}, {}) == ExecOutcome::Err(ExecError::kNoResult));
  CHECK(execute(Program{}, {}) == ExecOutcome::Err(ExecError::kNoResult));
  CHECK(execute(Program{T::kPush3, T::kDup, T::kMul, T::kEnd}, {}, 2) ==
        ExecOutcome::Err(ExecError::kFuelExhausted));
  CHECK(execute(Program{T::kPush3, T::kDup, T::kMul, T::kEnd}, {}, 4) == ExecOutcome::Ok(9));
}

TEST_CASE("execute: checked 32-bit arithmetic") {
  const std::vector<std::int32_t> big{std::numeric_limits<std::int32_t>::max()};
  CHECK(execute(Program{T::kArg0, T::kPush1, T::kAdd, T::kEnd}, big) ==
        ExecOutcome::Err(ExecError::kOverflow));
  CHECK(execute(Program{T::kArg0, T::kEnd}, big) == ExecOutcome::Ok(big[0]));
  const std::vector<std::int32_t> low{std::numeric_limits<std::int32_t>::min()};
  CHECK(execute(Program{T::kArg0, T::kNeg, T::kEnd}, low) == ExecOutcome::Err(ExecError::kOverflow));
  CHECK(execute(Program{T::kArg0, T::kPush1, T::kSub, T::kEnd}, low) ==
        ExecOutcome::Err(ExecError::kOverflow));
  // Repeated squaring of 9 leaves int32 range on the fourth square.
  Program sq{T::kPush3, T::kDup, T::kMul};
  for (int i = 0; i < 4; ++i) {
    sq.push_back(T::kDup);
    sq.push_back(T::kMul);
  }
  CHECK(execute(sq, {}) == ExecOutcome::Err(ExecError::kOverflow));
}

TEST_CASE("execute agrees with a reference stack machine on random programs") {
  // Independent oracle: plain vector stack with 64-bit arithmetic.
  auto oracle = [](const Program& p, const std::vector<std::int32_t>& in) -> ExecOutcome {
    std::vector<std::int64_t> st;
    int fuel = kDefaultFuel;
    auto fits = [](std::int64_t v) {
      return v >= std::numeric_limits<std::int32_t>::min() &&
             v <= std::numeric_limits<std::int32_t>::max();
    };
    for (Token t : p) {
      if (fuel-- == 0) return ExecOutcome::Err(ExecError::kFuelExhausted);
      const int id = token_id(t);
      if (id <= 4) {
        st.push_back(id);
      } else if (t == T::kArg0 || t == T::kArg1) {
        const std::size_t k = t == T::kArg0 ? 0 : 1;
        if (k >= in.size()) return ExecOutcome::Err(ExecError::kStackUnderflow);
        st.push_back(in[k]);
      } else if (t == T::kAdd || t == T::kSub || t == T::kMul) {
        if (st.size() < 2) return ExecOutcome::Err(ExecError::kStackUnderflow);
        const std::int64_t b = st.back();
        st.pop_back();
        const std::int64_t a = st.back();
        st.pop_back();
        const std::int64_t r = t == T::kAdd ? a + b : t == T::kSub ? a - b : a * b;
        if (!fits(r)) return ExecOutcome::Err(ExecError::kOverflow);
        st.push_back(r);
      } else if (t == T::kNeg) {
        if (st.empty()) return ExecOutcome::Err(ExecError::kStackUnderflow);
        if (!fits(-st.back())) return ExecOutcome::Err(ExecError::kOverflow);
        st.back() = -st.back();
      } else if (t == T::kDup) {
        if (st.empty()) return ExecOutcome::Err(ExecError::kStackUnderflow);
        st.push_back(st.back());
      } else if (t == T::kSwap) {
        if (st.size() < 2) return ExecOutcome::Err(ExecError::kStackUnderflow);
        std::swap(st[st.size() - 1], st[st.size() - 2]);
      } else if (t == T::kEnd) {
        break;
      }
    }
    if (st.empty()) return ExecOutcome::Err(ExecError::kNoResult);
    return ExecOutcome::Ok(static_cast<std::int32_t>(st.back()));
  };
  std::uint64_t s = 12345;
  auto next = [&s] {
    s = s * 6364136223846793005ULL + 1442695040888963407ULL;
    return static_cast<int>(s >> 33);
  };
  for (int i = 0; i < 5000; ++i) {
    Program p;
    const int len = next() % kMaxProgramLength;
    for (int k = 0; k < len; ++k) p.push_back(token_from_id(next() % (kVocabSize - 1)));
    if (next() % 2) p.push_back(T::kEnd);
    std::vector<std::int32_t> in;
    const int arity = next() % 3;
    for (int k = 0; k < arity; ++k) in.push_back(next() % 19 - 9);
    CHECK(execute(p, in) == oracle(p, in));
  }
}

TEST_CASE("passes_all reports per-test flags") {
  const Program twice{T::kArg0, T::kDup, T::kAdd, T::kEnd};
  const std::vector<UnitTest> tests{{{1}, 2}, {{-4}, -8}, {{3}, 7}};
  const TestReport r = passes_all(twice, tests);
  CHECK_FALSE(r.all_passed);
  CHECK(r.passed == std::vector<bool>{true, true, false});
  CHECK_FALSE(passes(twice, tests));
  CHECK(passes(twice, std::span(tests).first(2)));
  // Execution errors count as failures.
  CHECK_FALSE(passes(Program{T::kAdd}, tests));
}

TEST_CASE("program validity") {
  CHECK(is_valid_program(Program{}));
  CHECK(is_valid_program(Program{T::kArg0, T::kEnd}));
  CHECK_FALSE(is_valid_program(Program{T::kEnd, T::kArg0}));
  CHECK(is_valid_program(Program(kMaxProgramLength, T::kNop)));
  CHECK_FALSE(is_valid_program(Program(kMaxProgramLength + 1, T::kNop)));
  CHECK(count_token(Program{T::kNop, T::kArg0, T::kNop}, T::kNop) == 2);
}

TEST_CASE("Machine steps incrementally like execute") {
  const std::vector<std::int32_t> in{5, -2};
  const Program p{T::kArg0, T::kArg1, T::kSub, T::kPush2, T::kMul, T::kEnd};
  Machine m(in, kDefaultFuel);
  for (Token t : p) {
    if (!m.step(t)) break;
  }
  CHECK(m.halted());
  CHECK(m.finish() == execute(p, in));
  CHECK(m.finish() == ExecOutcome::Ok(14));
}
