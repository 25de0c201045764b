#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tinbc/constellation.hpp"

namespace tinbc {

struct UserSpec {
  int blocklength = 0;  // N_k, symbols
  double eps = 0.0;     // target average error probability
  cdouble h{};          // quasi-static channel coefficient
};

/// Downlink broadcast setup: K users sharing a superimposed frame of total
/// per-symbol power P.
struct SystemSpec {
  double power = 0.0;
  std::vector<UserSpec> users;

  std::size_t user_count() const noexcept { return users.size(); }
};

/// Throws std::invalid_argument on P <= 0, eps outside (0, 0.5), N < 1,
/// h = 0 or two users with equal |h|. Unsorted blocklengths are accepted.
void validate(const SystemSpec& spec);

/// One run of symbol indices with a constant set of active users.
struct SubBlock {
  int start = 0;   // first symbol index (0-based)
  int length = 0;  // N_j - N_{j-1}
  std::vector<int> participants;  // users active here, ascending
  std::vector<int> ranking;       // participants by descending |h|
};

/// Sub-block decomposition of the frame. Users are referred to by their index
/// in the SystemSpec; `sorted_users` lists them by non-decreasing blocklength
/// (stable), and user k owns sub-blocks 0..position[k].
struct SubBlockLayout {
  std::vector<int> sorted_users;
  std::vector<int> position;
  bool reordered = false;  // input blocklengths were not already sorted
  std::vector<SubBlock> blocks;
  int frame_length = 0;

  int rank_of(int user, int block) const;
};

SubBlockLayout build_layout(const SystemSpec& spec);

/// orders[k][j] is the modulation order of user k in sub-block j, for
/// j = 0..position[k].
using OrderMatrix = std::vector<std::vector<int>>;

/// Zero-filled order matrix with the right shape for `layout`.
OrderMatrix empty_orders(const SubBlockLayout& layout);

struct ConstraintCheck {
  enum class Kind {
    SumOrder,      // floor-log order constraint for one rank
    OrderRange,    // order negative or sub-block total above the cap
    Regularity,    // an odd order on a non-weakest active participant
    ExactDistance  // exact-energy distance check for odd sub-block totals
  };
  Kind kind = Kind::SumOrder;
  int block = 0;
  int rank = 0;   // position in SubBlock::ranking
  int user = -1;
  int lhs = 0;    // sum of orders at this rank and weaker
  int rhs = 0;    // floor(log2(...)) bound
  double margin = 0.0;
  bool top_rank = false;  // "+1" variant inside the logarithm
  bool vacuous = false;   // the ranked user is silent in this block
  bool satisfied = true;

  int slack() const noexcept { return rhs - lhs; }
};

struct FeasibilityReport {
  std::vector<ConstraintCheck> checks;
  bool feasible = true;

  std::vector<const ConstraintCheck*> violations() const;
};

/// Evaluates the per-sub-block order constraints under balanced power (every
/// sub-block of the frame carries P). For rank i of sub-block j:
///   sum_{i' >= i} m_{g_i', j} <= floor(log2(6 P |h_{g_i}|^2))
/// with 1 added inside the logarithm for the strongest active participant.
FeasibilityReport check_modulation_constraints(const OrderMatrix& orders, const SystemSpec& spec,
                                               const SubBlockLayout& layout,
                                               int max_block_order = kMaxOrder);

/// Power and gain of one user's symbols inside one sub-block.
struct BlockAssignment {
  int order = 0;
  int rank = 0;
  double power = 0.0;  // P_{k,j}
  double scale = 0.0;  // gain applied to unit-d_min symbols
};

struct SubBlockPlan {
  int total_order = 0;
  int bits_i = 0;
  int bits_q = 0;
  double eta = 0.0;    // unit-energy gain of the superimposed grid
  double power = 0.0;  // sum of participant powers (P, or 0 when silent)
};

/// Transmission plan: orders, two-layer power assignment and code lengths.
struct SchemePlan {
  SystemSpec spec;
  SubBlockLayout layout;
  OrderMatrix orders;
  std::vector<SubBlockPlan> blocks;
  std::vector<std::vector<BlockAssignment>> assignment;  // [user][block]
  std::vector<double> user_power;                        // P_k
  std::vector<int> codeword_length;                      // n_k

  /// Unit-d_min Gray QAM of user k in sub-block j.
  LabeledConstellation unit_constellation(int user, int block) const;
  /// The same constellation after power assignment (transmit side).
  LabeledConstellation effective_constellation(int user, int block) const;
  /// Points of the participants of `block` other than `user`, transmit side.
  std::vector<LabeledConstellation> interferers(int user, int block) const;
};

/// Balanced two-layer assignment. Throws std::invalid_argument for
/// infeasible orders.
SchemePlan assign_power(const OrderMatrix& orders, const SystemSpec& spec,
                        const SubBlockLayout& layout);

struct DistanceEntry {
  enum class Kind { Individual, Superimposed };
  Kind kind = Kind::Individual;
  int user = 0;  // owner, or the receiving user for superimposed entries
  int block = 0;
  double d_min = 0.0;
};

struct DistanceReport {
  std::vector<DistanceEntry> entries;
  bool all_at_least_one = true;
};

/// Effective minimum distances after the channel: each user's own scaled
/// constellation times h_k, and each superimposed sub-block constellation
/// seen through the channel of its strongest active participant.
DistanceReport verify_min_distances(const SchemePlan& plan);

/// n_k = sum_j (N_j - N_{j-1}) m_{k,j}.
std::vector<int> codeword_lengths(const OrderMatrix& orders, const SubBlockLayout& layout);

/// Maps n_k bits (0/1 bytes) of user k onto N_k unit-grid symbols, sub-block
/// by sub-block, m_{k,j} bits per symbol, most significant label bit first.
/// Symbols of silent sub-blocks are 0.
std::vector<cdouble> map_bits(std::span<const std::uint8_t> bits, int user, const SchemePlan& plan);

/// Nearest-point inverse of map_bits on unit-grid symbols.
std::vector<std::uint8_t> demap_hard(std::span<const cdouble> symbols, int user,
                                     const SchemePlan& plan);

struct Frame {
  std::vector<cdouble> x;                     // superimposed, length N_K
  std::vector<std::vector<cdouble>> per_user; // x_k, length N_k
};

/// Applies the per-sub-block gains to each user's unit-grid symbols and sums
/// the zero-padded results.
Frame build_frame(const std::vector<std::vector<cdouble>>& unit_symbols, const SchemePlan& plan);

std::string to_string(ConstraintCheck::Kind kind);

}  // namespace tinbc
