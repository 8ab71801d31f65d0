#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cli/run_config.hpp"

namespace bas::cli {

inline constexpr const char* kToolVersion = "0.3.0";
// Bumped whenever a CSV column set or manifest field changes.
inline constexpr int kOutputFormatVersion = 1;
inline constexpr int kManifestVersion = 1;

enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,
  kExitConfig = 2,
  kExitCheckpoint = 3,
  kExitRuntime = 4,
};

struct CommandOptions {
  std::optional<std::filesystem::path> config;
  std::filesystem::path out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> solver;
  std::optional<std::uint64_t> nfe;
  std::optional<std::filesystem::path> backbone;
  std::optional<std::filesystem::path> sidenet;
  // Test hook; only "quadrature-weights" is recognised.
  std::optional<std::string> inject_fault;
  bool out_given = false;
};

/// Runs one subcommand. Messages go to `log`, errors to `err`; the return
/// value is the process exit code.
int run_command(const std::string& name, const CommandOptions& options, std::ostream& log,
                std::ostream& err);

// Individual commands. They throw ConfigError, nnet::CheckpointError or
// std::runtime_error; run_command maps those to exit codes.
void cmd_train_backbone(const CommandOptions& options, std::ostream& log);
void cmd_train_sidenet(const CommandOptions& options, std::ostream& log);
void cmd_sample(const CommandOptions& options, std::ostream& log);
void cmd_bench(const CommandOptions& options, std::ostream& log);
/// Returns true when every check passes.
bool cmd_verify(const CommandOptions& options, std::ostream& log);

struct VerifyCheck {
  std::string claim;
  std::string measured;
  std::string bound;
  bool passed = false;
};

/// Analysis checks behind `verify`. `fault` corrupts the named component
/// before checking.
std::vector<VerifyCheck> run_verify_checks(const std::optional<std::string>& fault);

/// Shortest round-trip decimal form.
std::string format_double(double value);

/// Intervals for an NFE budget: N for single-evaluation solvers, NFE / 2 for
/// Heun. Throws ConfigError when the budget does not divide.
std::size_t intervals_for_nfe(solvers::SolverKind solver, std::uint64_t nfe);

}  // namespace bas::cli
