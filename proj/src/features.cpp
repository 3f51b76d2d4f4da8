#include "procrl/features.hpp"

#include <algorithm>

#include "procrl/errors.hpp"

namespace procrl {

TaskFeatures encode_task(const Task& task) {
  TaskFeatures f{};
  auto scaled = [](double v) {
    return std::clamp(v / FeatureSpec::kValueCap, -1.0, 1.0);
  };
  const auto n = std::min<std::size_t>(task.tests.size(), FeatureSpec::kEncodedTests);
  for (std::size_t t = 0; t < n; ++t) {
    const UnitTest& test = task.tests[t];
    for (std::size_t a = 0; a < std::min<std::size_t>(test.inputs.size(), 2); ++a) {
      f[3 * t + a] = scaled(test.inputs[a]);
    }
    f[3 * t + 2] = scaled(test.expected);
  }
  return f;
}

void featurize(const TaskFeatures& task, std::span<const Token> prefix,
               std::span<double> out) {
  if (out.size() != static_cast<std::size_t>(FeatureSpec::kDim)) {
    throw ShapeMismatch("feature buffer must hold 130 values");
  }
  std::fill(out.begin(), out.end(), 0.0);
  const auto window = std::min<std::size_t>(prefix.size(), FeatureSpec::kWindow);
  for (std::size_t k = 0; k < window; ++k) {
    const Token t = prefix[prefix.size() - 1 - k];
    out[k * kVocabSize + static_cast<std::size_t>(token_id(t))] = 1.0;
  }
  std::copy(task.begin(), task.end(), out.begin() + FeatureSpec::kTaskOffset);
  out[FeatureSpec::kPositionOffset] =
      static_cast<double>(prefix.size()) / kMaxProgramLength;
}

std::vector<double> featurize(const Task& task, std::span<const Token> prefix) {
  std::vector<double> out(FeatureSpec::kDim);
  featurize(encode_task(task), prefix, out);
  return out;
}

}  // namespace procrl
