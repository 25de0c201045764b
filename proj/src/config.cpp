#include "tinbc/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace tinbc {

using nlohmann::json;

namespace {

void require_version(const json& j) {
  if (!j.contains("schema_version")) throw ConfigError("missing schema_version");
  if (!j["schema_version"].is_number_integer() || j["schema_version"].get<int>() != kConfigSchemaVersion) {
    throw ConfigError("unsupported schema_version (expected " + std::to_string(kConfigSchemaVersion) + ")");
  }
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <class T>
T field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError("missing '" + std::string(key) + "' in " + where);
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("bad '" + std::string(key) + "' in " + where + ": " + e.what());
  }
}

OrderMatrix orders_from_json(const json& j) {
  try {
    return j.get<OrderMatrix>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad orders: ") + e.what());
  }
}

}  // namespace

SystemSpec system_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("system must be an object");
  reject_unknown(j, {"P", "users"}, "system");
  SystemSpec spec;
  spec.power = field<double>(j, "P", "system");
  if (!j.contains("users") || !j["users"].is_array() || j["users"].empty()) {
    throw ConfigError("system.users must be a non-empty array");
  }
  for (std::size_t k = 0; k < j["users"].size(); ++k) {
    const auto& u = j["users"][k];
    const std::string where = "system.users[" + std::to_string(k) + "]";
    if (!u.is_object()) throw ConfigError(where + " must be an object");
    reject_unknown(u, {"N", "eps", "h_re", "h_im", "snr_db"}, where);
    UserSpec us;
    us.blocklength = field<int>(u, "N", where);
    us.eps = field<double>(u, "eps", where);
    if (u.contains("snr_db")) {
      if (u.contains("h_re") || u.contains("h_im")) throw ConfigError(where + ": give snr_db or h_re/h_im, not both");
      if (!(spec.power > 0.0)) throw ConfigError("system.P must be positive");
      us.h = {std::sqrt(std::pow(10.0, field<double>(u, "snr_db", where) / 10.0) / spec.power), 0.0};
    } else {
      us.h = {field<double>(u, "h_re", where), u.contains("h_im") ? field<double>(u, "h_im", where) : 0.0};
    }
    spec.users.push_back(us);
  }
  try {
    validate(spec);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid system: ") + e.what());
  }
  return spec;
}

json system_to_json(const SystemSpec& spec) {
  json users = json::array();
  for (const auto& u : spec.users) {
    users.push_back({{"N", u.blocklength}, {"eps", u.eps}, {"h_re", u.h.real()}, {"h_im", u.h.imag()}});
  }
  return {{"P", spec.power}, {"users", users}};
}

json plan_to_json(const SchemePlan& plan) {
  json blocks = json::array();
  for (std::size_t j = 0; j < plan.layout.blocks.size(); ++j) {
    const auto& b = plan.layout.blocks[j];
    blocks.push_back({{"start", b.start},
                      {"length", b.length},
                      {"participants", b.participants},
                      {"ranking", b.ranking},
                      {"total_order", plan.blocks[j].total_order},
                      {"eta", plan.blocks[j].eta},
                      {"power", plan.blocks[j].power}});
  }
  json power = json::array(), scale = json::array();
  for (const auto& row : plan.assignment) {
    json p = json::array(), s = json::array();
    for (const auto& a : row) {
      p.push_back(a.power);
      s.push_back(a.scale);
    }
    power.push_back(p);
    scale.push_back(s);
  }
  return {{"schema_version", kConfigSchemaVersion},
          {"system", system_to_json(plan.spec)},
          {"orders", plan.orders},
          {"blocks", blocks},
          {"power", power},
          {"scale", scale},
          {"user_power", plan.user_power},
          {"codeword_length", plan.codeword_length}};
}

SchemePlan plan_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("plan must be a JSON object");
  require_version(j);
  reject_unknown(j, {"schema_version", "system", "orders", "blocks", "power", "scale", "user_power",
                     "codeword_length"},
                 "plan");
  if (!j.contains("system")) throw ConfigError("plan: missing system");
  if (!j.contains("orders")) throw ConfigError("plan: missing orders");
  const auto spec = system_from_json(j["system"]);
  const auto layout = build_layout(spec);
  const auto orders = orders_from_json(j["orders"]);
  SchemePlan plan;
  try {
    plan = assign_power(orders, spec, layout);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("plan: ") + e.what());
  }
  auto compare = [&](const char* key, auto getter) {
    if (!j.contains(key)) return;
    std::vector<std::vector<double>> stored;
    try {
      stored = j[key].get<std::vector<std::vector<double>>>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("plan: bad ") + key + ": " + e.what());
    }
    if (stored.size() != plan.assignment.size()) throw ConfigError(std::string("plan: ") + key + " has wrong shape");
    for (std::size_t k = 0; k < stored.size(); ++k) {
      if (stored[k].size() != plan.assignment[k].size()) {
        throw ConfigError(std::string("plan: ") + key + " has wrong shape");
      }
      for (std::size_t b = 0; b < stored[k].size(); ++b) {
        const double want = getter(plan.assignment[k][b]);
        if (std::abs(stored[k][b] - want) > 1e-9 * std::max(1.0, std::abs(want))) {
          throw ConfigError(std::string("plan: ") + key + " entry disagrees with the recomputed plan");
        }
      }
    }
  };
  compare("power", [](const BlockAssignment& a) { return a.power; });
  compare("scale", [](const BlockAssignment& a) { return a.scale; });
  if (j.contains("codeword_length")) {
    std::vector<int> n;
    try {
      n = j["codeword_length"].get<std::vector<int>>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("plan: bad codeword_length: ") + e.what());
    }
    if (n != plan.codeword_length) throw ConfigError("plan: codeword_length disagrees with the orders");
  }
  return plan;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

ExperimentConfig config_from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  require_version(j);
  reject_unknown(j,
                 {"schema_version", "system", "system_file", "weights", "orders", "samples", "seed", "power_steps",
                  "max_order_sum", "pareto_only", "third_moment", "snr_offsets_db", "ber_bits", "id_frames", "llr",
                  "dump_file", "plan_file", "plan_out", "description"},
                 "config");
  ExperimentConfig cfg;
  if (j.contains("system") == j.contains("system_file")) {
    throw ConfigError("config needs exactly one of system or system_file");
  }
  if (j.contains("system")) {
    cfg.system = system_from_json(j["system"]);
  } else {
    const auto sys = read_json_file(base_dir / field<std::string>(j, "system_file", "config"));
    cfg.system = system_from_json(sys.contains("system") ? sys["system"] : sys);
  }
  const std::size_t K = cfg.system.users.size();
  if (j.contains("weights")) {
    cfg.weights = field<std::vector<double>>(j, "weights", "config");
    if (cfg.weights.size() != K) throw ConfigError("weights needs one entry per user");
    for (double w : cfg.weights) {
      if (!(w >= 0.0)) throw ConfigError("weights must be non-negative");
    }
  }
  if (j.contains("orders")) cfg.orders = orders_from_json(j["orders"]);
  if (j.contains("samples")) cfg.samples = field<std::uint64_t>(j, "samples", "config");
  if (cfg.samples < 1000) throw ConfigError("samples must be at least 1000");
  if (j.contains("seed")) cfg.seed = field<std::uint64_t>(j, "seed", "config");
  if (j.contains("power_steps")) cfg.power_steps = field<int>(j, "power_steps", "config");
  if (cfg.power_steps < 1) throw ConfigError("power_steps must be positive");
  if (j.contains("max_order_sum")) cfg.max_order_sum = field<int>(j, "max_order_sum", "config");
  if (cfg.max_order_sum < 1 || cfg.max_order_sum > 12) throw ConfigError("max_order_sum must lie in [1, 12]");
  if (j.contains("pareto_only")) cfg.pareto_only = field<bool>(j, "pareto_only", "config");
  if (j.contains("third_moment")) cfg.third_moment = field<bool>(j, "third_moment", "config");
  if (j.contains("snr_offsets_db")) cfg.snr_offsets_db = field<std::vector<double>>(j, "snr_offsets_db", "config");
  if (cfg.snr_offsets_db.empty()) throw ConfigError("snr_offsets_db must not be empty");
  if (j.contains("ber_bits")) cfg.ber_bits = field<std::uint64_t>(j, "ber_bits", "config");
  if (j.contains("id_frames")) cfg.id_frames = field<int>(j, "id_frames", "config");
  if (cfg.id_frames < 1) throw ConfigError("id_frames must be positive");
  if (j.contains("llr")) cfg.llr = field<std::string>(j, "llr", "config");
  if (cfg.llr != "exact" && cfg.llr != "maxlog") throw ConfigError("llr must be 'exact' or 'maxlog'");
  if (j.contains("dump_file")) cfg.dump_file = base_dir / field<std::string>(j, "dump_file", "config");
  if (j.contains("plan_file")) cfg.plan_file = base_dir / field<std::string>(j, "plan_file", "config");
  if (j.contains("plan_out")) cfg.plan_out = base_dir / field<std::string>(j, "plan_out", "config");
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return config_from_json(read_json_file(path), path.parent_path());
}

}  // namespace tinbc
