#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tinbc {

struct CheckResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Work sizes of the property suite. The defaults are the full acceptance
/// sizes; quick() shrinks them for interactive validation runs.
struct SuiteScale {
  std::uint64_t design_samples = 200000;
  std::uint64_t oracle_samples = 100000;
  std::uint64_t dispersion_samples = 100000;
  int random_specs = 1000;
  std::uint64_t bernstein_trials = 1000000;
  std::uint64_t ber_bits = 1000000;
  std::uint64_t seed = 1;

  static SuiteScale quick();
};

CheckResult check_design_point(const SuiteScale& s);
CheckResult check_mapping_example(const SuiteScale& s);
CheckResult check_constraint_rhs(const SuiteScale& s);
CheckResult check_reductions(const SuiteScale& s);
CheckResult check_estimator_oracle(const SuiteScale& s);
CheckResult check_dispersion_ordering(const SuiteScale& s);
CheckResult check_power_and_distance(const SuiteScale& s);
CheckResult check_bernstein(const SuiteScale& s);
CheckResult check_llr_and_ber(const SuiteScale& s);

/// All nine checks in order.
std::vector<CheckResult> run_suite(const SuiteScale& s);

}  // namespace tinbc
