#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace jumpstop {

inline constexpr int kExitPass = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;

enum class Engine { pide, mc, both };
enum class Axis { dt, dx, paths, quad };

struct CommandOptions {
  std::filesystem::path spec;
  std::filesystem::path out = ".";
  std::optional<std::uint64_t> seed;
  /// Problem used on the Monte Carlo side of a cross-validation.
  std::optional<std::filesystem::path> mc_spec;
  std::string command_line;
};

/// Writes surface.csv and boundary.csv (grid engine), the Monte Carlo
/// summary and, for both engines, the cross-validation to report.txt.
int cmd_solve(const CommandOptions& opts, Engine engine, std::ostream& log, std::ostream& err);

/// Runs any of crossval, apriori, strict, growth, monotone.
int cmd_validate(const CommandOptions& opts, const std::vector<std::string>& suite,
                 std::ostream& log, std::ostream& err);

/// Writes convergence.csv and the fitted log-log slope.
int cmd_converge(const CommandOptions& opts, Axis axis, std::size_t levels,
                 std::ostream& log, std::ostream& err);

/// Entry point of the command-line tool. Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace jumpstop
