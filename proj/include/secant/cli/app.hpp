#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "secant/cli/config.hpp"
#include "secant/distill/strategy_matrix.hpp"

namespace secant::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitFailure = 2;

/// Bad command-line usage (missing flag, wrong combination).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Column order of each ablation axis.
std::vector<distill::MatrixCell> axis_cells(const std::string& axis, const ExperimentConfig& config);

struct AblationResult {
  std::string axis;
  std::vector<std::string> columns;
  std::vector<distill::MatrixRow> rows;
};

/// Runs one sweep and writes <axis>_long.csv and <axis>_table.csv to out_dir.
AblationResult run_ablation(const ExperimentConfig& config, const std::string& axis,
                            const std::filesystem::path& out_dir, const std::function<void(const std::string&)>& log = {});

/// Table layout: task, variant, then one "mean±std" column per cell.
void write_ablation_table(const std::filesystem::path& path, const AblationResult& result);

/// Full command-line entry point. Returns the process exit code.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);

}  // namespace secant::cli
