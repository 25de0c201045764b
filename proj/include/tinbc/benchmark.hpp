#pragma once

#include <span>
#include <vector>

#include "tinbc/rate.hpp"
#include "tinbc/scheme.hpp"

namespace tinbc {

/// Complex-channel Gaussian-code dispersion, twice the real-channel value:
/// 2 log2(e)^2 snr / (snr + 1).
double gaussian_dispersion(double snr);

/// Complex-channel shell-code dispersion: log2(e)^2 snr (snr + 2) / (snr + 1)^2.
double shell_dispersion(double snr);

/// Second-order rate of i.i.d. Gaussian codes over sub-blocks with SINRs
/// `sinr` and lengths `lengths`, combined as in second_order_rate.
SecondOrderRate gaussian_benchmark(std::span<const double> sinr, std::span<const int> lengths, double eps,
                                   int blocklength);

/// Second-order rate of shell codes on an interference-free link.
SecondOrderRate shell_benchmark(double snr, int blocklength, double eps);

/// Shell rate over several interference-free sub-blocks, treating symbols as
/// independent.
SecondOrderRate shell_benchmark(std::span<const double> snr, std::span<const int> lengths, double eps,
                                int blocklength);

enum class Decoding { Tin, PerfectSic };

/// Per-user, per-owned-sub-block SINR for a power matrix power[k][j].
/// Under perfect SIC user k still sees the power of participants with larger
/// |h| (they are never decoded by k); under TIN it sees everyone else.
std::vector<std::vector<double>> benchmark_sinr(const SystemSpec& spec, const SubBlockLayout& layout,
                                                const std::vector<std::vector<double>>& power,
                                                Decoding mode);

/// True when user k sees no interference in any of its sub-blocks.
bool interference_free(const SystemSpec& spec, const SubBlockLayout& layout,
                       const std::vector<std::vector<double>>& power, int user, Decoding mode);

struct BenchmarkPoint {
  std::vector<std::vector<double>> power;  // [user][block]
  std::vector<double> gaussian_rate;       // per user
  std::vector<double> gaussian_dispersion; // sum_j L_j V_j / N_k
  std::vector<double> shell_rate;          // NaN where interference is present
  std::vector<double> shell_dispersion;
};

struct BenchmarkOptions {
  Decoding mode = Decoding::PerfectSic;
  int power_steps = 20;  // grid resolution of each simplex
};

/// Enumerates power matrices satisfying sum_j L_j S_j = N_K P on a simplex grid
/// (sub-block energy fractions, then participant fractions inside each
/// sub-block) and evaluates both benchmarks at each.
std::vector<BenchmarkPoint> benchmark_grid(const SystemSpec& spec, const SubBlockLayout& layout,
                                           const BenchmarkOptions& opts);

/// Indices of points not dominated on the given per-point rate vectors,
/// considering only users with positive weight (all users if `weights` is
/// empty). Ascending index order.
std::vector<std::size_t> pareto_front(const std::vector<std::vector<double>>& rates,
                                      std::span<const double> weights = {});

}  // namespace tinbc
