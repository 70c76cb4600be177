#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "slip/config.hpp"

namespace slip {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitUsage = 2, kExitNumeric = 3 };

struct TrainOptions {
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::optional<std::filesystem::path> resume;
};

struct ScoreOptions {
  std::filesystem::path config;
  std::filesystem::path checkpoint;
  std::filesystem::path out;  // score CSV
  std::vector<std::string> datasets;  // empty: every registered dataset
  std::string split = "test";
};

struct EvaluateOptions {
  std::filesystem::path config;
  std::string protocol;
  std::vector<std::filesystem::path> scores;       // one file per repetition
  std::vector<std::filesystem::path> calibration;  // none, or one per repetition
  std::optional<std::filesystem::path> out;
};

/// Each command throws on failure; run_cli maps exceptions to exit codes.
void cmd_train(const TrainOptions& options);
void cmd_score(const ScoreOptions& options);
void cmd_evaluate(const EvaluateOptions& options);

/// Full command line (argv[0] is the program name). Returns the exit code;
/// diagnostics go to `err`, command output to `out`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace slip
