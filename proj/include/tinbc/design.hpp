#pragma once

#include <string>
#include <vector>

#include "tinbc/rate.hpp"
#include "tinbc/scheme.hpp"

namespace tinbc {

struct DesignOptions {
  std::vector<double> weights;  // empty: all ones
  int max_block_order = 12;     // cap on the order sum of one sub-block
  bool pareto_only = false;
  bool allow_unserved = false;  // keep matrices that give some user n_k = 0
  McOptions mc;
};

struct DesignCandidate {
  OrderMatrix orders;
  SchemePlan plan;
  FeasibilityReport feasibility;
  RateResult rates;
  double score = 0.0;                // weighted rate sum
  bool pareto = false;               // not dominated on positively weighted users
  std::vector<int> info_bits;        // k_k = floor(R_k N_k), 0 when R_k <= 0
  std::vector<int> codeword_length;  // n_k
};

struct DesignResult {
  std::vector<DesignCandidate> candidates;  // best score first
  std::string explanation;                  // set when nothing is feasible
};

/// All feasible order vectors of one sub-block (indexed like
/// SubBlock::participants), ascending lexicographically.
std::vector<std::vector<int>> feasible_block_orders(const SystemSpec& spec, const SubBlockLayout& layout,
                                                    int block, int max_block_order);

/// Enumerates every feasible order matrix, evaluates the TIN rates and ranks
/// the candidates by weighted sum; ties go to the lexicographically smaller
/// order matrix. Per-sub-block statistics are computed once per distinct
/// sub-block order vector and shared across matrices.
DesignResult design_search(const SystemSpec& spec, const DesignOptions& opts);

}  // namespace tinbc
