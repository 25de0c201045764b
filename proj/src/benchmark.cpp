#include "tinbc/benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace tinbc {

namespace {

constexpr double kLog2eSq = std::numbers::log2e * std::numbers::log2e;

// All compositions of `steps` into `parts` non-negative integers.
std::vector<std::vector<int>> compositions(int steps, int parts) {
  std::vector<std::vector<int>> out;
  if (parts <= 0) return out;
  std::vector<int> cur(parts, 0);
  auto rec = [&](auto&& self, int idx, int left) -> void {
    if (idx == parts - 1) {
      cur[idx] = left;
      out.push_back(cur);
      return;
    }
    for (int v = left; v >= 0; --v) {
      cur[idx] = v;
      self(self, idx + 1, left - v);
    }
  };
  rec(rec, 0, steps);
  return out;
}

}  // namespace

double gaussian_dispersion(double snr) {
  if (snr < 0.0) throw std::invalid_argument("gaussian_dispersion: negative SNR");
  return 2.0 * kLog2eSq * snr / (snr + 1.0);
}

double shell_dispersion(double snr) {
  if (snr < 0.0) throw std::invalid_argument("shell_dispersion: negative SNR");
  return kLog2eSq * snr * (snr + 2.0) / ((snr + 1.0) * (snr + 1.0));
}

SecondOrderRate gaussian_benchmark(std::span<const double> sinr, std::span<const int> lengths, double eps,
                                   int blocklength) {
  if (sinr.size() != lengths.size()) throw std::invalid_argument("gaussian_benchmark: size mismatch");
  std::vector<BlockTerm> terms;
  for (std::size_t j = 0; j < sinr.size(); ++j) {
    terms.push_back({lengths[j], std::log2(1.0 + sinr[j]), gaussian_dispersion(sinr[j])});
  }
  return second_order_rate(terms, eps, blocklength);
}

SecondOrderRate shell_benchmark(double snr, int blocklength, double eps) {
  const double s[] = {snr};
  const int l[] = {blocklength};
  return shell_benchmark(s, l, eps, blocklength);
}

SecondOrderRate shell_benchmark(std::span<const double> snr, std::span<const int> lengths, double eps,
                                int blocklength) {
  if (snr.size() != lengths.size()) throw std::invalid_argument("shell_benchmark: size mismatch");
  std::vector<BlockTerm> terms;
  for (std::size_t j = 0; j < snr.size(); ++j) {
    terms.push_back({lengths[j], std::log2(1.0 + snr[j]), shell_dispersion(snr[j])});
  }
  return second_order_rate(terms, eps, blocklength);
}

std::vector<std::vector<double>> benchmark_sinr(const SystemSpec& spec, const SubBlockLayout& layout,
                                                const std::vector<std::vector<double>>& power,
                                                Decoding mode) {
  const int K = static_cast<int>(spec.users.size());
  if (static_cast<int>(power.size()) != K) throw std::invalid_argument("benchmark_sinr: power rows != K");
  std::vector<std::vector<double>> out(K);
  for (int k = 0; k < K; ++k) {
    const double g = std::norm(spec.users[k].h);
    if (static_cast<int>(power[k].size()) != layout.position[k] + 1) {
      throw std::invalid_argument("benchmark_sinr: power row has the wrong length");
    }
    for (int j = 0; j <= layout.position[k]; ++j) {
      double interference = 0.0;
      for (int other : layout.blocks[j].participants) {
        if (other == k) continue;
        const bool stronger = std::abs(spec.users[other].h) > std::abs(spec.users[k].h);
        if (mode == Decoding::Tin || stronger) interference += power[other][j];
      }
      out[k].push_back(g * power[k][j] / (g * interference + 1.0));
    }
  }
  return out;
}

bool interference_free(const SystemSpec& spec, const SubBlockLayout& layout,
                       const std::vector<std::vector<double>>& power, int user, Decoding mode) {
  for (int j = 0; j <= layout.position[user]; ++j) {
    if (layout.blocks[j].length == 0) continue;
    for (int other : layout.blocks[j].participants) {
      if (other == user || power[other][j] == 0.0) continue;
      const bool stronger = std::abs(spec.users[other].h) > std::abs(spec.users[user].h);
      if (mode == Decoding::Tin || stronger) return false;
    }
  }
  return true;
}

std::vector<BenchmarkPoint> benchmark_grid(const SystemSpec& spec, const SubBlockLayout& layout,
                                           const BenchmarkOptions& opts) {
  validate(spec);
  if (opts.power_steps < 1) throw std::invalid_argument("benchmark_grid: power_steps must be positive");
  const int K = static_cast<int>(spec.users.size());
  const int J = static_cast<int>(layout.blocks.size());
  std::vector<int> active;
  for (int j = 0; j < J; ++j) {
    if (layout.blocks[j].length > 0) active.push_back(j);
  }
  const double total_energy = static_cast<double>(layout.frame_length) * spec.power;
  const auto energy_splits = compositions(opts.power_steps, static_cast<int>(active.size()));
  std::vector<std::vector<std::vector<int>>> inner(J);
  for (int j : active) {
    inner[j] = compositions(opts.power_steps, static_cast<int>(layout.blocks[j].participants.size()));
  }

  std::vector<BenchmarkPoint> out;
  for (const auto& es : energy_splits) {
    std::vector<double> block_power(J, 0.0);
    for (std::size_t a = 0; a < active.size(); ++a) {
      const int j = active[a];
      block_power[j] = total_energy * es[a] / opts.power_steps / layout.blocks[j].length;
    }
    // Mixed-radix walk over the participant splits of every active block;
    // blocks with no power only take their first split.
    std::vector<std::size_t> idx(active.size(), 0);
    for (;;) {
      BenchmarkPoint pt;
      pt.power.resize(K);
      for (int k = 0; k < K; ++k) pt.power[k].assign(layout.position[k] + 1, 0.0);
      for (std::size_t a = 0; a < active.size(); ++a) {
        const int j = active[a];
        const auto& split = inner[j][idx[a]];
        const auto& parts = layout.blocks[j].participants;
        for (std::size_t p = 0; p < parts.size(); ++p) {
          pt.power[parts[p]][j] = block_power[j] * split[p] / opts.power_steps;
        }
      }
      const auto sinr = benchmark_sinr(spec, layout, pt.power, opts.mode);
      for (int k = 0; k < K; ++k) {
        std::vector<int> lengths;
        for (int j = 0; j <= layout.position[k]; ++j) lengths.push_back(layout.blocks[j].length);
        const auto& u = spec.users[k];
        const auto g = gaussian_benchmark(sinr[k], lengths, u.eps, u.blocklength);
        pt.gaussian_rate.push_back(g.rate);
        double vg = 0.0, vs = 0.0;
        for (std::size_t j = 0; j < lengths.size(); ++j) {
          vg += lengths[j] * gaussian_dispersion(sinr[k][j]);
          vs += lengths[j] * shell_dispersion(sinr[k][j]);
        }
        pt.gaussian_dispersion.push_back(vg / u.blocklength);
        if (interference_free(spec, layout, pt.power, k, opts.mode)) {
          pt.shell_rate.push_back(shell_benchmark(sinr[k], lengths, u.eps, u.blocklength).rate);
          pt.shell_dispersion.push_back(vs / u.blocklength);
        } else {
          pt.shell_rate.push_back(std::numeric_limits<double>::quiet_NaN());
          pt.shell_dispersion.push_back(std::numeric_limits<double>::quiet_NaN());
        }
      }
      out.push_back(std::move(pt));

      std::size_t a = 0;
      for (; a < active.size(); ++a) {
        const std::size_t limit = block_power[active[a]] > 0.0 ? inner[active[a]].size() : 1;
        if (++idx[a] < limit) break;
        idx[a] = 0;
      }
      if (a == active.size()) break;
    }
  }
  return out;
}

std::vector<std::size_t> pareto_front(const std::vector<std::vector<double>>& rates,
                                      std::span<const double> weights) {
  if (rates.empty()) return {};
  const std::size_t K = rates.front().size();
  std::vector<std::size_t> dims;
  for (std::size_t k = 0; k < K; ++k) {
    if (weights.empty() || (k < weights.size() && weights[k] > 0.0)) dims.push_back(k);
  }
  if (dims.empty()) {
    for (std::size_t k = 0; k < K; ++k) dims.push_back(k);
  }
  std::vector<std::size_t> order(rates.size());
  std::iota(order.begin(), order.end(), 0);
  auto lex_greater = [&](std::size_t a, std::size_t b) {
    for (auto d : dims) {
      if (rates[a][d] != rates[b][d]) return rates[a][d] > rates[b][d];
    }
    return a < b;
  };
  std::stable_sort(order.begin(), order.end(), lex_greater);
  auto dominates = [&](std::size_t a, std::size_t b) {
    bool strict = false;
    for (auto d : dims) {
      if (rates[a][d] < rates[b][d]) return false;
      if (rates[a][d] > rates[b][d]) strict = true;
    }
    return strict;
  };
  std::vector<std::size_t> front;
  for (auto i : order) {
    if (std::any_of(dims.begin(), dims.end(), [&](std::size_t d) { return std::isnan(rates[i][d]); })) {
      continue;
    }
    bool dominated = false;
    for (auto f : front) {
      if (dominates(f, i)) {
        dominated = true;
        break;
      }
    }
    if (!dominated) front.push_back(i);
  }
  std::sort(front.begin(), front.end());
  return front;
}

}  // namespace tinbc
