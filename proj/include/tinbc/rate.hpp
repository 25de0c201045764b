#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "tinbc/constellation.hpp"
#include "tinbc/scheme.hpp"

namespace tinbc {

/// Largest number of (desired, interferer...) symbol tuples enumerated exactly.
inline constexpr std::size_t kMaxTuples = 4096;

/// Mutual information and dispersion of one user over one sub-block, in bits
/// and bits^2 per complex symbol.
struct SubBlockRateStats {
  double mi = 0.0;
  double dispersion = 0.0;
  std::uint64_t sample_count = 0;
  double std_err_mi = 0.0;
  double std_err_dispersion = 0.0;
  /// E|i - I|^3, only filled when requested.
  double third_abs_moment = std::numeric_limits<double>::quiet_NaN();
};

struct McOptions {
  enum class Path { Auto, Generic, Separable };

  std::uint64_t samples = 10000;
  std::uint64_t seed = 1;
  bool third_moment = false;
  Path path = Path::Auto;
  unsigned workers = 0;  // 0: worker_count()
};

/// Monte Carlo estimate of I(X;Y) and V(X;Y) for Y = h (X + U) + Z with X
/// uniform on `desired`, U uniform on the sum set of `interferers` and
/// Z ~ CN(0,1). Symbol tuples are enumerated exactly; only the noise is
/// sampled, with the same noise draws shared by every tuple.
///
/// When all constellations are grids with a common phase the Gaussian sums
/// factor over the two axes and the separable path is used; the generic path
/// sums over the full superimposed set.
SubBlockRateStats estimate_mi_dispersion(const LabeledConstellation& desired,
                                         std::span<const LabeledConstellation> interferers,
                                         cdouble h, const McOptions& opts);

/// Deterministic 2-D Gauss-Hermite evaluation of interference-free I(X;Y).
double quadrature_mi(const LabeledConstellation& c, cdouble h, int nodes = 96);

struct GaussHermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;  // for the weight function exp(-t^2)
};

/// n-point rule, ascending nodes, 1 <= n <= 512.
GaussHermiteRule gauss_hermite(int n);

/// Sub-block contribution to a second-order rate.
struct BlockTerm {
  int length = 0;  // N_j - N_{j-1}
  double mi = 0.0;
  double dispersion = 0.0;
};

struct SecondOrderRate {
  double rate = 0.0;
  double first_order = 0.0;  // sum L_j I_j / N_k
  double penalty = 0.0;      // sqrt(sum L_j V_j) Q^{-1}(eps) / N_k
  bool non_positive = false;
};

/// R_k = [sum_j L_j I_j - sqrt(sum_j L_j V_j) Q^{-1}(eps)] / N_k, without the
/// O(log N / N) term.
SecondOrderRate second_order_rate(std::span<const BlockTerm> blocks, double eps, int blocklength);

/// Homogeneous-blocklength form: I - sqrt(V / N) Q^{-1}(eps).
double single_block_rate(double mi, double dispersion, int blocklength, double eps);

/// Two-sub-block form for a partially interfered user with N_1 <= N_2.
double two_block_rate(double mi_1, double disp_1, double mi_2, double disp_2, int n1, int n2,
                      double eps);

/// Berry-Esseen constant B_k of the third-order term (diagnostic only).
/// Requires third_abs_moment in every active stats entry.
double berry_esseen_constant(std::span<const BlockTerm> blocks,
                             std::span<const SubBlockRateStats> stats, int blocklength);

inline constexpr double kBerryEsseenC0 = 0.5600;

struct UserRate {
  int user = 0;
  double rate = 0.0;
  double first_order = 0.0;
  bool non_positive = false;
  double eps = 0.0;
  int blocklength = 0;
  std::vector<BlockTerm> terms;               // one per owned sub-block
  std::vector<SubBlockRateStats> stats;       // aligned with terms
  double berry_esseen = std::numeric_limits<double>::quiet_NaN();
};

struct RateResult {
  std::vector<UserRate> users;
};

/// Stats of user k in sub-block j of a plan under TIN (zeros when silent).
SubBlockRateStats plan_block_stats(const SchemePlan& plan, int user, int block,
                                   const McOptions& opts);

/// Second-order TIN rate of every user of a plan.
RateResult evaluate_plan(const SchemePlan& plan, const McOptions& opts);

}  // namespace tinbc
