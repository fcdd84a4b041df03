#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

namespace lnlab {

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitUsage = 2;

/// Command-line flags layered over the config file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> placement;
  std::optional<double> delta_t;
  std::optional<std::size_t> depth;
  std::optional<std::size_t> instances;
  std::optional<std::filesystem::path> out;
  std::optional<std::string> format;
};

/// Runs one of gradcheck, bounds, diagnose, train, sweep, ot-check, report.
/// Returns 0 when every check passes, 1 on a failed check (first failing row is
/// printed to `err`), 2 on a bad config or unknown subcommand.
int run_subcommand(const std::string& name, const std::optional<std::filesystem::path>& config,
                   const Overrides& overrides, std::ostream& out, std::ostream& err);

/// Parses argv and dispatches to run_subcommand.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

std::string usage_text();

}  // namespace lnlab
