#ifndef PROCRL_FEATURES_HPP_
#define PROCRL_FEATURES_HPP_

#include <array>
#include <span>
#include <vector>

#include "procrl/minilang.hpp"
#include "procrl/taskgen.hpp"

namespace procrl {

// Input encoding shared by the policy, value and PRM networks:
//   [ one-hot of the last kWindow prefix tokens, most recent first,
//     zero-padded ] (kWindow * kVocabSize)
//   [ (input0, input1, expected) / kValueCap for the first kEncodedTests
//     tests, clipped to [-1, 1], missing slots zero ] (3 * kEncodedTests)
//   [ prefix length / kMaxProgramLength ] (1)
struct FeatureSpec {
  static constexpr int kWindow = 8;
  static constexpr int kEncodedTests = 3;
  static constexpr double kValueCap = 100.0;
  static constexpr int kTaskOffset = kWindow * kVocabSize;
  static constexpr int kPositionOffset = kTaskOffset + 3 * kEncodedTests;
  static constexpr int kDim = kPositionOffset + 1;
};
static_assert(FeatureSpec::kDim == 130);

using TaskFeatures = std::array<double, 3 * FeatureSpec::kEncodedTests>;

TaskFeatures encode_task(const Task& task);

// Writes the kDim features of (task, prefix) into out.
void featurize(const TaskFeatures& task, std::span<const Token> prefix,
               std::span<double> out);
std::vector<double> featurize(const Task& task, std::span<const Token> prefix);

}  // namespace procrl

#endif  // PROCRL_FEATURES_HPP_
