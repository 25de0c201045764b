#include "tinbc/validation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>

#include "tinbc/benchmark.hpp"
#include "tinbc/constellation.hpp"
#include "tinbc/design.hpp"
#include "tinbc/link.hpp"
#include "tinbc/random.hpp"
#include "tinbc/rate.hpp"
#include "tinbc/scheme.hpp"

namespace tinbc {

namespace {

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

cdouble snr_gain(double snr_db) { return {std::sqrt(std::pow(10.0, snr_db / 10.0)), 0.0}; }

// (18, 5) dB, N = (128, 256), eps = (1e-6, 1e-4), P = 1.
SystemSpec heterogeneous_two_user() {
  SystemSpec s;
  s.power = 1.0;
  s.users = {{128, 1e-6, snr_gain(18.0)}, {256, 1e-4, snr_gain(5.0)}};
  return s;
}

// (24, 12) dB, N = 200, eps = 1e-6.
SystemSpec homogeneous_two_user() {
  SystemSpec s;
  s.power = 1.0;
  s.users = {{200, 1e-6, snr_gain(24.0)}, {200, 1e-6, snr_gain(12.0)}};
  return s;
}

double rel_diff(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / scale;
}

}  // namespace

SuiteScale SuiteScale::quick() {
  SuiteScale s;
  s.design_samples = 200000;
  s.oracle_samples = 20000;
  s.dispersion_samples = 20000;
  s.random_specs = 100;
  s.bernstein_trials = 100000;
  s.ber_bits = 100000;
  return s;
}

CheckResult check_design_point(const SuiteScale& s) {
  CheckResult r{1, "design point (2,4,4) rate pair", false, ""};
  const auto spec = heterogeneous_two_user();
  const auto layout = build_layout(spec);
  const auto plan = assign_power({{2}, {4, 4}}, spec, layout);
  McOptions mc;
  mc.samples = s.design_samples;
  mc.seed = s.seed;
  mc.workers = 1;
  const auto t0 = std::chrono::steady_clock::now();
  const auto res = evaluate_plan(plan, mc);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double r1 = res.users[0].rate;
  const double r2 = res.users[1].rate;
  r.passed = std::abs(r1 - 1.0174) <= 0.02 && std::abs(r2 - 1.5644) <= 0.02 && secs <= 300.0;
  r.detail = fmt("R=(%.4f, %.4f) target (1.0174, 1.5644) +-0.02, %llu samples, %.2f s on one worker", r1, r2,
                 static_cast<unsigned long long>(mc.samples), secs);
  return r;
}

CheckResult check_mapping_example(const SuiteScale&) {
  CheckResult r{2, "three-user codeword length and bit split", false, ""};
  SystemSpec spec;
  spec.power = 1.0;
  spec.users = {{200, 1e-5, snr_gain(20.0)}, {1000, 1e-5, snr_gain(30.0)}, {2000, 1e-5, snr_gain(10.0)}};
  const auto layout = build_layout(spec);
  const auto plan = assign_power({{2}, {2, 2}, {2, 4, 2}}, spec, layout);
  const int n3 = plan.codeword_length[2];

  // Distinct bit patterns per segment; decode each segment with its own
  // constellation and count how many bits it consumed.
  std::vector<std::uint8_t> bits(n3);
  for (int i = 0; i < n3; ++i) bits[i] = static_cast<std::uint8_t>((splitmix64(i) >> 7) & 1u);
  const auto sym = map_bits(bits, 2, plan);
  std::vector<int> split;
  std::vector<int> symbols;
  bool labels_ok = true;
  std::size_t pos = 0;
  for (int j = 0; j < 3; ++j) {
    const auto& blk = layout.blocks[j];
    const int m = plan.orders[2][j];
    const auto c = build_gray_qam(m);
    for (int t = 0; t < blk.length; ++t) {
      std::uint32_t label = 0;
      for (int b = 0; b < m; ++b) label = (label << 1) | bits[pos++];
      labels_ok = labels_ok && sym[blk.start + t] == c.point(label);
    }
    split.push_back(blk.length * m);
    symbols.push_back(blk.length);
  }
  const auto back = demap_hard(sym, 2, plan);
  r.passed = n3 == 5600 && split == std::vector<int>{400, 3200, 2000} &&
             symbols == std::vector<int>{200, 800, 1000} && labels_ok && back == bits;
  r.detail = fmt("n3=%d, bit split %d/%d/%d over %d/%d/%d symbols, labels %s, round trip %s", n3, split[0], split[1],
                 split[2], symbols[0], symbols[1], symbols[2], labels_ok ? "ok" : "wrong",
                 back == bits ? "ok" : "wrong");
  return r;
}

CheckResult check_constraint_rhs(const SuiteScale&) {
  CheckResult r{3, "order constraint bounds and feasibility", false, ""};
  const auto spec = heterogeneous_two_user();
  const auto layout = build_layout(spec);
  const auto ok = check_modulation_constraints({{2}, {4, 4}}, spec, layout);
  const auto bad = check_modulation_constraints({{2}, {5, 4}}, spec, layout);
  std::vector<int> rhs;
  for (const auto& c : ok.checks) {
    if (c.kind == ConstraintCheck::Kind::SumOrder) rhs.push_back(c.rhs);
  }
  bool flagged = false;
  for (const auto* v : bad.violations()) {
    flagged = flagged || (v->kind == ConstraintCheck::Kind::SumOrder && v->block == 0 && v->rank == 1);
  }
  std::string kinds;
  for (const auto* v : bad.violations()) kinds += " " + to_string(v->kind) + fmt("@b%dr%d", v->block, v->rank);
  r.passed = rhs == std::vector<int>{8, 4, 4} && ok.feasible && !bad.feasible && flagged;
  r.detail = fmt("bounds (%d, %d, %d); (2,4,4) %s; (2,5,4) %s, violations:", rhs.size() > 0 ? rhs[0] : -1,
                 rhs.size() > 1 ? rhs[1] : -1, rhs.size() > 2 ? rhs[2] : -1, ok.feasible ? "feasible" : "infeasible",
                 bad.feasible ? "feasible" : "infeasible") +
             kinds;
  return r;
}

CheckResult check_reductions(const SuiteScale& s) {
  CheckResult r{4, "K-user / two-block / single-block rate identities", false, ""};
  McOptions mc;
  mc.samples = 20000;
  mc.seed = s.seed;

  // General formula vs two-block formula on the heterogeneous design.
  const auto spec = heterogeneous_two_user();
  const auto plan = assign_power({{2}, {4, 4}}, spec, build_layout(spec));
  const auto res = evaluate_plan(plan, mc);
  const auto& u2 = res.users[1];
  const double two = two_block_rate(u2.stats[0].mi, u2.stats[0].dispersion, u2.stats[1].mi, u2.stats[1].dispersion,
                                    128, 256, u2.eps);
  const double d1 = rel_diff(u2.rate, two);

  // Two-block formula with N1 = N2 vs single-block formula.
  auto hom = homogeneous_two_user();
  const auto hplan = assign_power({{2}, {4, 0}}, hom, build_layout(hom));
  const auto hres = evaluate_plan(hplan, mc);
  const auto direct = estimate_mi_dispersion(hplan.effective_constellation(1, 0), hplan.interferers(1, 0),
                                             hom.users[1].h, mc);
  const double single = single_block_rate(direct.mi, direct.dispersion, 200, 1e-6);
  const double d2 = rel_diff(hres.users[1].rate, single);
  const double two_eq = two_block_rate(direct.mi, direct.dispersion, 0.0, 0.0, 200, 200, 1e-6);
  const double d3 = rel_diff(two_eq, single);
  const double d4 = rel_diff(hres.users[0].rate, single_block_rate(hres.users[0].stats[0].mi,
                                                                   hres.users[0].stats[0].dispersion, 200, 1e-6));
  const double worst = std::max({d1, d2, d3, d4});
  r.passed = worst < 1e-9;
  r.detail = fmt("max relative difference %.3g (general vs two-block %.3g, two-block N1=N2 vs single %.3g)", worst, d1,
                 std::max({d2, d3, d4}));
  return r;
}

CheckResult check_estimator_oracle(const SuiteScale& s) {
  CheckResult r{5, "estimator vs Gauss-Hermite oracle", true, ""};
  std::ostringstream os;
  double worst_z = 0.0;
  for (int m : {2, 4, 6}) {
    const auto c = scale(build_gray_qam(m), normalization_factor(m));
    for (double snr : {0.0, 6.0, 12.0}) {
      McOptions mc;
      mc.samples = s.oracle_samples;
      mc.seed = s.seed + 100 * m + static_cast<std::uint64_t>(snr);
      const auto h = snr_gain(snr);
      const auto st = estimate_mi_dispersion(c, {}, h, mc);
      const double q = quadrature_mi(c, h, 96);
      const double z = std::abs(st.mi - q) / st.std_err_mi;
      worst_z = std::max(worst_z, z);
      if (z > 3.0 || !(st.dispersion >= 0.0)) r.passed = false;
    }
  }
  // V shrinks with |h| and vanishes at h = 0.
  const auto c16 = scale(build_gray_qam(4), normalization_factor(4));
  McOptions mc;
  mc.samples = 20000;
  mc.seed = s.seed;
  double prev = INFINITY;
  bool monotone = true;
  double last = 0.0;
  for (double g : {1.0, 1e-1, 1e-2, 1e-3}) {
    const auto st = estimate_mi_dispersion(c16, {}, {g, 0.0}, mc);
    monotone = monotone && st.dispersion >= 0.0 && st.dispersion < prev;
    prev = st.dispersion;
    last = st.dispersion;
  }
  const auto zero = estimate_mi_dispersion(c16, {}, {0.0, 0.0}, mc);
  const bool vanishes = monotone && last < 1e-5 && zero.dispersion == 0.0 && zero.mi == 0.0;
  r.passed = r.passed && vanishes;
  r.detail = fmt("max |I_mc - I_quad| = %.2f standard errors over 9 cases; V(|h|=1e-3) = %.2e, V(0) = %g", worst_z,
                 last, zero.dispersion);
  return r;
}

CheckResult check_dispersion_ordering(const SuiteScale& s) {
  CheckResult r{6, "QAM/TIN dispersion vs shell and Gaussian at equal rate", true, ""};
  const auto spec = homogeneous_two_user();
  const auto layout = build_layout(spec);
  McOptions mc;
  mc.samples = s.dispersion_samples;
  mc.seed = s.seed;
  std::ostringstream os;
  const std::vector<std::pair<int, int>> points{{2, 4}, {4, 4}, {2, 6}, {6, 2}};
  for (auto [m1, m2] : points) {
    const auto plan = assign_power({{m1}, {m2, 0}}, spec, layout);
    const auto res = evaluate_plan(plan, mc);
    os << "(" << m1 << "," << m2 << ")";
    for (const auto& u : res.users) {
      const double gamma = std::pow(2.0, u.first_order) - 1.0;
      const double v = u.stats[0].dispersion;
      const double vs = shell_dispersion(gamma);
      const double vg = gaussian_dispersion(gamma);
      if (!(v <= vs && v < vg)) r.passed = false;
      os << fmt(" V=%.3f/%.3f/%.3f", v, vs, vg);
    }
    os << ";";
  }
  r.detail = "V_qam/V_shell/V_gauss per user: " + os.str();
  return r;
}

CheckResult check_power_and_distance(const SuiteScale& s) {
  CheckResult r{7, "total power and effective minimum distance", false, ""};
  std::mt19937_64 rng(s.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int accepted = 0, attempts = 0;
  double worst_power = 0.0, worst_user_power = 0.0, min_dmin = INFINITY;
  bool all_ok = true;
  while (accepted < s.random_specs && attempts < 100 * s.random_specs) {
    ++attempts;
    SystemSpec spec;
    spec.power = std::pow(10.0, 2.0 * unit(rng) - 1.0);
    const int K = 1 + static_cast<int>(unit(rng) * 4.0);
    std::vector<int> n;
    for (int k = 0; k < K; ++k) {
      n.push_back(!n.empty() && unit(rng) < 0.2 ? n.back() : 1 + static_cast<int>(unit(rng) * 400.0));
    }
    std::sort(n.begin(), n.end());
    for (int k = 0; k < K; ++k) {
      const double snr = std::pow(10.0, 3.0 * unit(rng));
      const double phase = 2.0 * std::numbers::pi * unit(rng);
      spec.users.push_back({n[k], 1e-7 + 0.4 * unit(rng), std::polar(std::sqrt(snr / spec.power), phase)});
    }
    try {
      validate(spec);
    } catch (const std::invalid_argument&) {
      continue;
    }
    const auto layout = build_layout(spec);
    OrderMatrix orders = empty_orders(layout);
    bool usable = true;
    for (int j = 0; j < static_cast<int>(layout.blocks.size()) && usable; ++j) {
      if (layout.blocks[j].length == 0) continue;
      auto options = feasible_block_orders(spec, layout, j, 12);
      std::erase_if(options, [](const std::vector<int>& v) {
        return std::all_of(v.begin(), v.end(), [](int m) { return m == 0; });
      });
      if (options.empty()) {
        usable = false;
        break;
      }
      const auto& pick = options[static_cast<std::size_t>(unit(rng) * options.size())];
      for (std::size_t p = 0; p < pick.size(); ++p) orders[layout.blocks[j].participants[p]][j] = pick[p];
    }
    if (!usable) continue;
    ++accepted;
    const auto plan = assign_power(orders, spec, layout);
    const int NK = layout.frame_length;
    double total = 0.0;
    for (std::size_t j = 0; j < layout.blocks.size(); ++j) {
      double sub = 0.0;
      for (int k : layout.blocks[j].participants) sub += plan.assignment[k][j].power;
      total += static_cast<double>(layout.blocks[j].length) / NK * sub;
    }
    worst_power = std::max(worst_power, std::abs(total - spec.power) / spec.power);
    for (int k = 0; k < K; ++k) {
      double pk = 0.0;
      for (int j = 0; j <= layout.position[k]; ++j) {
        pk += static_cast<double>(layout.blocks[j].length) / spec.users[k].blocklength * plan.assignment[k][j].power;
      }
      worst_user_power = std::max(worst_user_power, std::abs(pk - plan.user_power[k]) / spec.power);
    }
    const auto dist = verify_min_distances(plan);
    for (const auto& e : dist.entries) min_dmin = std::min(min_dmin, e.d_min);
    all_ok = all_ok && dist.all_at_least_one;
  }
  r.passed = accepted == s.random_specs && worst_power <= 1e-9 && worst_user_power <= 1e-9 && all_ok &&
             min_dmin >= 1.0 - 1e-9;
  r.detail = fmt("%d specs (%d drawn): max total-power error %.2e, max user-power error %.2e, min d_min %.6f", accepted,
                 attempts, worst_power, worst_user_power, min_dmin);
  return r;
}

CheckResult check_bernstein(const SuiteScale& s) {
  CheckResult r{8, "Bernstein concentration of codeword power", true, ""};
  constexpr int n = 64;
  constexpr double eps = 0.5;
  std::ostringstream os;
  for (int m : {3, 4, 6, 8}) {
    const auto base = build_gray_qam(m);
    const auto c = scale(base, unit_energy_gain(base.bits_i(), base.bits_q()));
    double mean = 0.0, second = 0.0, peak = 0.0;
    for (auto p : c.points()) {
      const double e = std::norm(p);
      mean += e;
      second += e * e;
      peak = std::max(peak, e);
    }
    mean /= c.size();
    second /= c.size();
    const double var = second - mean * mean;
    const double bound = std::exp(-n * eps * eps / (2.0 * (var + peak * eps / 3.0)));
    std::uint64_t violations = 0;
    const std::uint64_t key = derive_seed(s.seed, static_cast<std::uint64_t>(m));
    for (std::uint64_t t = 0; t < s.bernstein_trials; ++t) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        const std::uint64_t draw = splitmix64(key ^ (t * n + i));
        acc += std::norm(c.point(static_cast<std::uint32_t>(draw >> (64 - m))));
      }
      violations += acc / n - mean >= eps;
    }
    const double freq = static_cast<double>(violations) / static_cast<double>(s.bernstein_trials);
    if (freq > bound) r.passed = false;
    os << fmt(" %d-QAM %.2e<=%.2e;", 1 << m, freq, bound);
  }
  r.detail = fmt("n=%d eps=%.1f, %llu trials:", n, eps, static_cast<unsigned long long>(s.bernstein_trials)) + os.str();
  return r;
}

CheckResult check_llr_and_ber(const SuiteScale& s) {
  CheckResult r{9, "noiseless LLR round trip and monotone uncoded BER", true, ""};
  const auto spec = heterogeneous_two_user();
  const auto plan = assign_power({{2}, {4, 4}}, spec, build_layout(spec));
  std::vector<std::vector<std::uint8_t>> payload;
  for (int k = 0; k < 2; ++k) {
    std::vector<std::uint8_t> b(plan.codeword_length[k]);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = (splitmix64(derive_seed(s.seed, k) + i) >> 13) & 1u;
    payload.push_back(std::move(b));
  }
  ChannelOptions ch;
  ch.noise_std = 0.0;
  const auto sim = simulate_frame(plan, payload, ch);
  bool roundtrip = true;
  for (int k = 0; k < 2; ++k) {
    for (auto mode : {LlrMode::Exact, LlrMode::MaxLog}) {
      // Noiseless observation scored with a near-zero assumed variance.
      const auto llr = frame_llr(sim.rx.y[k], k, plan, mode, 1e-3);
      roundtrip = roundtrip && hard_decisions(llr) == payload[k];
    }
  }
  std::ostringstream os;
  bool monotone = true;
  for (int k = 0; k < 2; ++k) {
    double prev = 2.0;
    os << " user " << k + 1 << ":";
    for (double off : {0.0, 2.0, 4.0}) {
      const auto b = uncoded_ber(plan, k, off, s.ber_bits, derive_seed(s.seed, 10 + k));
      monotone = monotone && b.ber() < prev;
      prev = b.ber();
      os << fmt(" %.3e", b.ber());
    }
    os << ";";
  }
  r.passed = roundtrip && monotone;
  r.detail = std::string("round trip ") + (roundtrip ? "ok" : "FAILED") + ", BER at +0/+2/+4 dB" + os.str();
  return r;
}

std::vector<CheckResult> run_suite(const SuiteScale& s) {
  return {check_design_point(s),       check_mapping_example(s),    check_constraint_rhs(s),
          check_reductions(s),         check_estimator_oracle(s),   check_dispersion_ordering(s),
          check_power_and_distance(s), check_bernstein(s),          check_llr_and_ber(s)};
}

}  // namespace tinbc
