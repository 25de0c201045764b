#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace tinbc {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitInfeasible = 3 };

struct CommandOptions {
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;     // overrides the config seed
  std::optional<std::uint64_t> samples;  // overrides the config sample count
};

/// Build identifier embedded in every CSV row.
std::string build_id();

/// Quotes a field per RFC 4180 when it contains a comma, quote or newline.
std::string csv_field(const std::string& s);
void write_csv_row(std::ostream& os, const std::vector<std::string>& fields);

int cmd_design(const CommandOptions& opts, std::ostream& out, std::ostream& err);
int cmd_rate_region(const CommandOptions& opts, std::ostream& out, std::ostream& err);
int cmd_benchmark(const CommandOptions& opts, std::ostream& out, std::ostream& err);
int cmd_simulate(const CommandOptions& opts, std::ostream& out, std::ostream& err);
int cmd_validate(const CommandOptions& opts, std::ostream& out, std::ostream& err);

/// Dispatches by command name ("design", "rate-region", ...).
int run_command(const std::string& name, const CommandOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace tinbc
