#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tinbc/scheme.hpp"

namespace tinbc {

inline constexpr int kConfigSchemaVersion = 1;

/// Malformed or schema-violating configuration / plan input.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Users are given either as {N, eps, h_re, h_im} or {N, eps, snr_db}; the
/// latter sets h = sqrt(10^(snr_db/10) / P) on the real axis.
SystemSpec system_from_json(const nlohmann::json& j);
nlohmann::json system_to_json(const SystemSpec& spec);

nlohmann::json plan_to_json(const SchemePlan& plan);

/// Rebuilds a plan from its JSON export and checks the stored power and scale
/// entries against the recomputed ones. Throws ConfigError on any mismatch.
SchemePlan plan_from_json(const nlohmann::json& j);

struct ExperimentConfig {
  SystemSpec system;
  std::vector<double> weights;
  std::optional<OrderMatrix> orders;
  std::uint64_t samples = 10000;
  std::uint64_t seed = 1;
  int power_steps = 20;
  int max_order_sum = 12;
  bool pareto_only = false;
  bool third_moment = false;
  std::vector<double> snr_offsets_db{0.0, 2.0, 4.0};
  std::uint64_t ber_bits = 100000;
  int id_frames = 200;
  std::string llr = "exact";
  std::optional<std::filesystem::path> dump_file;
  std::optional<std::filesystem::path> plan_file;  // plan to check in validate
  std::optional<std::filesystem::path> plan_out;   // plan export from design / simulate
};

/// Parses an experiment config. Relative paths resolve against `base_dir`.
ExperimentConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);

nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace tinbc
