#ifndef PROCRL_CLI_HPP_
#define PROCRL_CLI_HPP_

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "procrl/config.hpp"

namespace procrl {

// Version written into every stage manifest; bumped on layout changes.
inline constexpr int kStageFormatVersion = 1;

// Stage entry points. Each reads its inputs from run_dir, checks that the
// stages it depends on have completed (MissingDependency otherwise) and
// writes into run_dir/<stage>/ together with config.json, inputs.json and
// stage.json.
void stage_taskgen(const RunConfig& cfg, const std::filesystem::path& run_dir);
void stage_sft(const RunConfig& cfg, const std::filesystem::path& run_dir);
void stage_rl_baseline(const RunConfig& cfg, const std::filesystem::path& run_dir);
void stage_collect(const RunConfig& cfg, const std::filesystem::path& run_dir);
void stage_train_prm(const RunConfig& cfg, const std::filesystem::path& run_dir);
void stage_rl_psgpo(const RunConfig& cfg, const std::filesystem::path& run_dir);
void stage_eval(const RunConfig& cfg, const std::filesystem::path& run_dir);
void stage_report(const RunConfig& cfg, const std::filesystem::path& run_dir,
                  const std::vector<std::filesystem::path>& extra_runs = {});
void stage_sweep(const RunConfig& cfg, const std::filesystem::path& run_dir);

// Runs taskgen through report in order.
void run_pipeline(const RunConfig& cfg, const std::filesystem::path& run_dir);

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitMissingDependency = 3;

// Parses argv-style arguments (without the program name) and runs one
// subcommand. Never throws.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace procrl

#endif  // PROCRL_CLI_HPP_
