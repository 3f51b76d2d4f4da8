#ifndef PROCRL_MINILANG_HPP_
#define PROCRL_MINILANG_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace procrl {

// Stack-machine vocabulary. Ids are contiguous in [0, kVocabSize).
enum class Token : std::uint8_t {
  kPush0,
  kPush1,
  kPush2,
  kPush3,
  kPush4,
  kArg0,
  kArg1,
  kAdd,
  kSub,
  kMul,
  kNeg,
  kDup,
  kSwap,
  kNop,
  kEnd,
};

inline constexpr int kVocabSize = 15;
inline constexpr int kMaxProgramLength = 24;
inline constexpr int kDefaultFuel = 4 * kMaxProgramLength;

constexpr int token_id(Token t) { return static_cast<int>(t); }
constexpr Token token_from_id(int id) { return static_cast<Token>(id); }

std::string_view token_name(Token t);
std::optional<Token> token_from_name(std::string_view name);

using Program = std::vector<Token>;

// Length bound and END placement. Prefixes of valid programs are valid.
bool is_valid_program(std::span<const Token> program);

enum class ExecError : std::uint8_t {
  kStackUnderflow,
  kNoResult,
  kFuelExhausted,
  kOverflow,
};

std::string_view exec_error_name(ExecError e);

class ExecOutcome {
 public:
  static ExecOutcome Ok(std::int32_t value) { return ExecOutcome(value); }
  static ExecOutcome Err(ExecError error) { return ExecOutcome(error); }

  bool ok() const { return !error_.has_value(); }
  std::int32_t value() const { return value_; }
  ExecError error() const { return *error_; }

  friend bool operator==(const ExecOutcome&, const ExecOutcome&) = default;

 private:
  explicit ExecOutcome(std::int32_t v) : value_(v) {}
  explicit ExecOutcome(ExecError e) : error_(e) {}

  std::int32_t value_ = 0;
  std::optional<ExecError> error_;
};

// Incremental interpreter state. execute() is a loop over step(); the
// labeling oracles reuse it to extend a prefix one token at a time.
class Machine {
 public:
  Machine(std::span<const std::int32_t> inputs, int fuel);

  // Returns false once the machine has halted (END or an error).
  bool step(Token t);
  // Outcome after halting or token exhaustion.
  ExecOutcome finish() const;

  bool halted() const { return halted_; }
  int depth() const { return depth_; }
  std::span<const std::int32_t> stack() const {
    return {stack_.data(), static_cast<std::size_t>(depth_)};
  }

  // Valid programs never come close; deeper pushes report kOverflow.
  static constexpr int kStackCapacity = 32;

 private:
  bool fail(ExecError e);

  std::array<std::int32_t, kStackCapacity> stack_{};
  int depth_ = 0;
  std::span<const std::int32_t> inputs_;
  int fuel_left_ = 0;
  bool halted_ = false;
  std::optional<ExecError> error_;
};

struct UnitTest {
  std::vector<std::int32_t> inputs;
  std::int32_t expected = 0;

  friend bool operator==(const UnitTest&, const UnitTest&) = default;
};

// Runs `program` on `inputs`. Never throws; every failure is an ExecOutcome
// error. Each executed token consumes one unit of fuel.
ExecOutcome execute(std::span<const Token> program,
                    std::span<const std::int32_t> inputs,
                    int fuel = kDefaultFuel);

struct TestReport {
  bool all_passed = false;
  std::vector<bool> passed;
};

TestReport passes_all(std::span<const Token> program,
                      std::span<const UnitTest> tests);

// Early-exit variant of passes_all for hot loops.
bool passes(std::span<const Token> program, std::span<const UnitTest> tests);

std::size_t count_token(std::span<const Token> program, Token t);

}  // namespace procrl

#endif  // PROCRL_MINILANG_HPP_
