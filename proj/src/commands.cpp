#include "tinbc/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include "tinbc/benchmark.hpp"
#include "tinbc/config.hpp"
#include "tinbc/design.hpp"
#include "tinbc/link.hpp"
#include "tinbc/random.hpp"
#include "tinbc/validation.hpp"

#ifndef TINBC_BUILD_ID
#define TINBC_BUILD_ID "unknown"
#endif

namespace tinbc {

using nlohmann::json;

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string num(std::uint64_t v) { return std::to_string(v); }
std::string num(int v) { return std::to_string(v); }

ExperimentConfig resolve(const CommandOptions& opts) {
  if (!opts.config) throw ConfigError("--config is required");
  auto cfg = load_config(*opts.config);
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.samples) {
    if (*opts.samples < 1000) throw ConfigError("--samples must be at least 1000");
    cfg.samples = *opts.samples;
  }
  return cfg;
}

std::vector<std::string> prefix(const ExperimentConfig& cfg) {
  return {build_id(), num(cfg.seed), num(cfg.samples)};
}

void append(std::vector<std::string>& row, const std::vector<std::string>& more) {
  row.insert(row.end(), more.begin(), more.end());
}

std::vector<std::string> per_user(const char* stem, std::size_t K) {
  std::vector<std::string> cols;
  for (std::size_t k = 1; k <= K; ++k) cols.push_back(std::string(stem) + "_" + std::to_string(k));
  return cols;
}

McOptions mc_options(const ExperimentConfig& cfg) {
  McOptions mc;
  mc.samples = cfg.samples;
  mc.seed = cfg.seed;
  mc.third_moment = cfg.third_moment;
  return mc;
}

// Effective per-user dispersion sum_j L_j V_j / N_k.
double user_dispersion(const UserRate& u) {
  double s = 0.0;
  for (const auto& t : u.terms) s += t.length * t.dispersion;
  return s / u.blocklength;
}

std::string power_json(const std::vector<std::vector<double>>& p) {
  std::string s = "[";
  for (std::size_t k = 0; k < p.size(); ++k) {
    s += k ? ",[" : "[";
    for (std::size_t j = 0; j < p[k].size(); ++j) s += (j ? "," : "") + num(p[k][j]);
    s += "]";
  }
  return s + "]";
}

std::string plan_power_json(const SchemePlan& plan) {
  std::vector<std::vector<double>> p;
  for (const auto& row : plan.assignment) {
    p.emplace_back();
    for (const auto& a : row) p.back().push_back(a.power);
  }
  return power_json(p);
}

void export_plan(const ExperimentConfig& cfg, const SchemePlan& plan) {
  if (!cfg.plan_out) return;
  std::ofstream f(*cfg.plan_out);
  if (!f) throw ConfigError("cannot write " + cfg.plan_out->string());
  f << plan_to_json(plan).dump(2) << "\n";
}

template <class Body>
int guarded(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    err << "invalid input: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

std::vector<std::string> rate_region_header(std::size_t K) {
  std::vector<std::string> h{"build_id", "seed", "samples", "scheme", "label", "pareto"};
  append(h, per_user("R", K));
  append(h, per_user("V", K));
  return h;
}

void benchmark_rows(const ExperimentConfig& cfg, bool pareto_only, std::ostream& out) {
  const auto& spec = cfg.system;
  const auto layout = build_layout(spec);
  const std::size_t K = spec.users.size();
  for (auto mode : {Decoding::PerfectSic, Decoding::Tin}) {
    BenchmarkOptions bo;
    bo.mode = mode;
    bo.power_steps = cfg.power_steps;
    const auto grid = benchmark_grid(spec, layout, bo);
    std::vector<std::vector<double>> g_rates, s_rates;
    for (const auto& p : grid) {
      g_rates.push_back(p.gaussian_rate);
      s_rates.push_back(p.shell_rate);
    }
    std::vector<bool> g_front(grid.size(), false), s_front(grid.size(), false);
    for (auto i : pareto_front(g_rates, cfg.weights)) g_front[i] = true;
    for (auto i : pareto_front(s_rates, cfg.weights)) s_front[i] = true;
    const std::string tag = mode == Decoding::PerfectSic ? "sic" : "tin";
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (pareto_only && !g_front[i]) continue;
      auto row = prefix(cfg);
      append(row, {"gaussian_" + tag, power_json(grid[i].power), g_front[i] ? "1" : "0"});
      for (std::size_t k = 0; k < K; ++k) row.push_back(num(grid[i].gaussian_rate[k]));
      for (std::size_t k = 0; k < K; ++k) row.push_back(num(grid[i].gaussian_dispersion[k]));
      write_csv_row(out, row);
    }
    if (mode != Decoding::PerfectSic) continue;
    // Shell values exist only for users without residual interference.
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (pareto_only && !g_front[i]) continue;
      auto row = prefix(cfg);
      append(row, {"shell_sic", power_json(grid[i].power), s_front[i] ? "1" : "0"});
      for (std::size_t k = 0; k < K; ++k) row.push_back(num(grid[i].shell_rate[k]));
      for (std::size_t k = 0; k < K; ++k) row.push_back(num(grid[i].shell_dispersion[k]));
      write_csv_row(out, row);
    }
  }
}

}  // namespace

std::string build_id() { return TINBC_BUILD_ID; }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

void write_csv_row(std::ostream& os, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) os << ',';
    os << csv_field(fields[i]);
  }
  os << "\r\n";
}

int cmd_design(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto cfg = resolve(opts);
    const std::size_t K = cfg.system.users.size();
    std::vector<std::string> header{"build_id", "seed",     "samples", "rank",     "orders",
                                    "score",    "pareto",   "feasible", "min_slack", "slacks", "power"};
    append(header, per_user("R", K));
    append(header, per_user("k", K));
    append(header, per_user("n", K));
    write_csv_row(out, header);

    DesignOptions d;
    d.weights = cfg.weights;
    d.max_block_order = cfg.max_order_sum;
    d.pareto_only = cfg.pareto_only;
    d.mc = mc_options(cfg);
    const auto res = design_search(cfg.system, d);
    if (res.candidates.empty()) {
      err << res.explanation << "\n";
      return static_cast<int>(kExitInfeasible);
    }
    int rank = 0;
    for (const auto& c : res.candidates) {
      int min_slack = 1 << 20;
      json slacks = json::array();
      for (const auto& chk : c.feasibility.checks) {
        if (chk.kind != ConstraintCheck::Kind::SumOrder || chk.vacuous) continue;
        min_slack = std::min(min_slack, chk.slack());
        slacks.push_back(json::array({chk.block + 1, chk.rank + 1, chk.slack()}));
      }
      auto row = prefix(cfg);
      append(row, {num(++rank), json(c.orders).dump(), num(c.score), c.pareto ? "1" : "0",
                   c.feasibility.feasible ? "1" : "0", slacks.empty() ? "" : num(min_slack), slacks.dump(),
                   plan_power_json(c.plan)});
      for (const auto& u : c.rates.users) row.push_back(num(u.rate));
      for (int v : c.info_bits) row.push_back(num(v));
      for (int v : c.codeword_length) row.push_back(num(v));
      write_csv_row(out, row);
    }
    export_plan(cfg, res.candidates.front().plan);
    return static_cast<int>(kExitOk);
  });
}

int cmd_rate_region(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto cfg = resolve(opts);
    const std::size_t K = cfg.system.users.size();
    write_csv_row(out, rate_region_header(K));
    DesignOptions d;
    d.weights = cfg.weights;
    d.max_block_order = cfg.max_order_sum;
    d.allow_unserved = true;
    d.mc = mc_options(cfg);
    auto res = design_search(cfg.system, d);
    // Grid order: ascending order matrix.
    std::stable_sort(res.candidates.begin(), res.candidates.end(),
                     [](const DesignCandidate& a, const DesignCandidate& b) { return a.orders < b.orders; });
    for (const auto& c : res.candidates) {
      auto row = prefix(cfg);
      append(row, {"qam_tin", json(c.orders).dump(), c.pareto ? "1" : "0"});
      for (const auto& u : c.rates.users) row.push_back(num(u.rate));
      for (const auto& u : c.rates.users) row.push_back(num(user_dispersion(u)));
      write_csv_row(out, row);
    }
    benchmark_rows(cfg, true, out);
    return static_cast<int>(kExitOk);
  });
}

int cmd_benchmark(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto cfg = resolve(opts);
    write_csv_row(out, rate_region_header(cfg.system.users.size()));
    benchmark_rows(cfg, cfg.pareto_only, out);
    return static_cast<int>(kExitOk);
  });
}

int cmd_simulate(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto cfg = resolve(opts);
    if (!cfg.orders) throw ConfigError("simulate needs 'orders'");
    const auto plan = assign_power(*cfg.orders, cfg.system, build_layout(cfg.system));
    export_plan(cfg, plan);
    const LlrMode mode = cfg.llr == "maxlog" ? LlrMode::MaxLog : LlrMode::Exact;
    const std::vector<std::string> header{"build_id", "seed",     "samples", "kind",     "user",       "block",
                                          "snr_offset_db", "bits", "errors", "ber",     "symbols",    "mean",
                                          "variance", "mi",       "dispersion", "z_mean", "z_variance", "flagged"};
    write_csv_row(out, header);
    const std::size_t K = cfg.system.users.size();
    for (std::size_t k = 0; k < K; ++k) {
      if (plan.codeword_length[k] == 0) continue;
      for (double off : cfg.snr_offsets_db) {
        const auto b = uncoded_ber(plan, static_cast<int>(k), off, cfg.ber_bits, derive_seed(cfg.seed, 100 + k), mode);
        auto row = prefix(cfg);
        append(row, {"ber", num(static_cast<int>(k) + 1), "", num(off), num(b.bits), num(b.errors), num(b.ber())});
        row.resize(header.size());
        write_csv_row(out, row);
      }
    }
    bool ok = true;
    for (std::size_t k = 0; k < K; ++k) {
      const auto rep = empirical_id_check(plan, static_cast<int>(k), cfg.id_frames, derive_seed(cfg.seed, 200 + k),
                                          mc_options(cfg));
      ok = ok && rep.ok;
      for (const auto& b : rep.blocks) {
        auto row = prefix(cfg);
        append(row, {"info_density", num(static_cast<int>(k) + 1), num(b.block + 1), "", "", "", "", num(b.symbols),
                     num(b.mean), num(b.variance), num(b.mi), num(b.dispersion), num(b.z_mean), num(b.z_variance),
                     b.flagged ? "1" : "0"});
        write_csv_row(out, row);
      }
    }
    if (cfg.dump_file) {
      std::vector<std::vector<std::uint8_t>> payload;
      for (std::size_t k = 0; k < K; ++k) {
        std::vector<std::uint8_t> bits(plan.codeword_length[k]);
        for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = (splitmix64(derive_seed(cfg.seed, 300 + k) + i) >> 11) & 1u;
        payload.push_back(std::move(bits));
      }
      ChannelOptions ch;
      ch.seed = derive_seed(cfg.seed, 400);
      const auto sim = simulate_frame(plan, payload, ch);
      std::vector<DumpRecord> recs;
      for (std::size_t k = 0; k < K; ++k) {
        DumpRecord r;
        r.user = static_cast<std::uint32_t>(k);
        r.bits = payload[k];
        r.symbols = sim.tx.per_user[k];
        r.y = sim.rx.y[k];
        r.llr = frame_llr(sim.rx.y[k], static_cast<int>(k), plan, mode);
        recs.push_back(std::move(r));
      }
      std::ofstream f(*cfg.dump_file, std::ios::binary);
      if (!f) throw ConfigError("cannot write " + cfg.dump_file->string());
      write_dump(f, recs);
    }
    if (!ok) err << "information-density check flagged a deviation above 4 sigma\n";
    return static_cast<int>(ok ? kExitOk : kExitFailure);
  });
}

int cmd_validate(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    SuiteScale scale = SuiteScale::quick();
    ExperimentConfig cfg;
    if (opts.config) {
      cfg = resolve(opts);
      scale.seed = cfg.seed;
      if (opts.samples || cfg.samples != ExperimentConfig{}.samples) {
        scale.oracle_samples = scale.dispersion_samples = cfg.samples;
      }
    } else {
      if (opts.seed) cfg.seed = scale.seed = *opts.seed;
      if (opts.samples) scale.oracle_samples = scale.dispersion_samples = *opts.samples;
    }
    // The design-point check is defined at 2e5 noise samples or more.
    scale.design_samples = std::max(scale.design_samples, scale.oracle_samples);
    cfg.samples = scale.oracle_samples;
    write_csv_row(out, {"build_id", "seed", "samples", "check", "name", "passed", "detail"});
    bool ok = true;
    if (cfg.plan_file) {
      const auto plan = plan_from_json(read_json_file(*cfg.plan_file));
      const auto dist = verify_min_distances(plan);
      auto row = prefix(cfg);
      append(row, {"plan", "plan file", dist.all_at_least_one ? "1" : "0",
                   "plan for " + std::to_string(plan.spec.users.size()) + " users rebuilt and checked"});
      write_csv_row(out, row);
      ok = ok && dist.all_at_least_one;
    }
    for (const auto& r : run_suite(scale)) {
      auto row = prefix(cfg);
      append(row, {num(r.id), r.name, r.passed ? "1" : "0", r.detail});
      write_csv_row(out, row);
      ok = ok && r.passed;
    }
    if (!ok) err << "validation failed\n";
    return static_cast<int>(ok ? kExitOk : kExitFailure);
  });
}

int run_command(const std::string& name, const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  if (name == "design") return cmd_design(opts, out, err);
  if (name == "rate-region") return cmd_rate_region(opts, out, err);
  if (name == "benchmark") return cmd_benchmark(opts, out, err);
  if (name == "simulate") return cmd_simulate(opts, out, err);
  if (name == "validate") return cmd_validate(opts, out, err);
  err << "unknown command: " << name << "\n";
  return kExitConfig;
}

}  // namespace tinbc
