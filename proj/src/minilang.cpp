#include "procrl/minilang.hpp"

#include <algorithm>
#include <limits>

namespace procrl {
namespace {

constexpr std::array<std::string_view, kVocabSize> kTokenNames = {
    "PUSH_0", "PUSH_1", "PUSH_2", "PUSH_3", "PUSH_4",
    "ARG0",   "ARG1",   "ADD",    "SUB",    "MUL",
    "NEG",    "DUP",    "SWAP",   "NOP",    "END",
};

constexpr std::int64_t kMin = std::numeric_limits<std::int32_t>::min();
constexpr std::int64_t kMax = std::numeric_limits<std::int32_t>::max();

}  // namespace

std::string_view token_name(Token t) { return kTokenNames[token_id(t)]; }

std::optional<Token> token_from_name(std::string_view name) {
  for (int i = 0; i < kVocabSize; ++i) {
    if (kTokenNames[i] == name) return token_from_id(i);
  }
  return std::nullopt;
}

bool is_valid_program(std::span<const Token> program) {
  if (program.size() > static_cast<std::size_t>(kMaxProgramLength)) {
    return false;
  }
  for (std::size_t i = 0; i < program.size(); ++i) {
    if (token_id(program[i]) < 0 || token_id(program[i]) >= kVocabSize) {
      return false;
    }
    if (program[i] == Token::kEnd && i + 1 != program.size()) return false;
  }
  return true;
}

std::string_view exec_error_name(ExecError e) {
  switch (e) {
    case ExecError::kStackUnderflow:
      return "StackUnderflow";
    case ExecError::kNoResult:
      return "NoResult";
    case ExecError::kFuelExhausted:
      return "FuelExhausted";
    case ExecError::kOverflow:
      return "Overflow";
  }
  return "Unknown";
}

Machine::Machine(std::span<const std::int32_t> inputs, int fuel)
    : inputs_(inputs), fuel_left_(fuel) {}

bool Machine::fail(ExecError e) {
  error_ = e;
  halted_ = true;
  return false;
}

bool Machine::step(Token t) {
  if (halted_) return false;
  if (fuel_left_ <= 0) return fail(ExecError::kFuelExhausted);
  --fuel_left_;

  auto push = [this](std::int64_t v) {
    if (v < kMin || v > kMax) return fail(ExecError::kOverflow);
    if (depth_ >= kStackCapacity) return fail(ExecError::kOverflow);
    stack_[depth_++] = static_cast<std::int32_t>(v);
    return true;
  };

  switch (t) {
    case Token::kPush0:
    case Token::kPush1:
    case Token::kPush2:
    case Token::kPush3:
    case Token::kPush4:
      return push(token_id(t) - token_id(Token::kPush0));
    case Token::kArg0:
    case Token::kArg1: {
      const auto index =
          static_cast<std::size_t>(token_id(t) - token_id(Token::kArg0));
      if (index >= inputs_.size()) return fail(ExecError::kStackUnderflow);
      return push(inputs_[index]);
    }
    case Token::kAdd:
    case Token::kSub:
    case Token::kMul: {
      if (depth_ < 2) return fail(ExecError::kStackUnderflow);
      const std::int64_t rhs = stack_[--depth_];
      const std::int64_t lhs = stack_[--depth_];
      if (t == Token::kAdd) return push(lhs + rhs);
      if (t == Token::kSub) return push(lhs - rhs);
      return push(lhs * rhs);
    }
    case Token::kNeg: {
      if (depth_ < 1) return fail(ExecError::kStackUnderflow);
      const std::int64_t v = stack_[--depth_];
      return push(-v);
    }
    case Token::kDup:
      if (depth_ < 1) return fail(ExecError::kStackUnderflow);
      return push(stack_[depth_ - 1]);
    case Token::kSwap:
      if (depth_ < 2) return fail(ExecError::kStackUnderflow);
      std::swap(stack_[depth_ - 1], stack_[depth_ - 2]);
      return true;
    case Token::kNop:
      return true;
    case Token::kEnd:
      halted_ = true;
      return false;
  }
  return fail(ExecError::kStackUnderflow);
}

ExecOutcome Machine::finish() const {
  if (error_) return ExecOutcome::Err(*error_);
  if (depth_ == 0) return ExecOutcome::Err(ExecError::kNoResult);
  return ExecOutcome::Ok(stack_[depth_ - 1]);
}

ExecOutcome execute(std::span<const Token> program,
                    std::span<const std::int32_t> inputs, int fuel) {
  Machine machine(inputs, fuel);
  for (Token t : program) {
    if (!machine.step(t)) break;
  }
  return machine.finish();
}

TestReport passes_all(std::span<const Token> program,
                      std::span<const UnitTest> tests) {
  TestReport report;
  report.passed.reserve(tests.size());
  report.all_passed = !tests.empty();
  for (const UnitTest& test : tests) {
    const ExecOutcome out = execute(program, test.inputs, kDefaultFuel);
    const bool ok = out.ok() && out.value() == test.expected;
    report.passed.push_back(ok);
    report.all_passed = report.all_passed && ok;
  }
  return report;
}

bool passes(std::span<const Token> program, std::span<const UnitTest> tests) {
  if (tests.empty()) return false;
  return std::all_of(tests.begin(), tests.end(), [&](const UnitTest& test) {
    const ExecOutcome out = execute(program, test.inputs, kDefaultFuel);
    return out.ok() && out.value() == test.expected;
  });
}

std::size_t count_token(std::span<const Token> program, Token t) {
  return static_cast<std::size_t>(std::count(program.begin(), program.end(), t));
}

}  // namespace procrl
