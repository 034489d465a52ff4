#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fairsim/common.hpp"

// Rank statistics used by the experiment runners.  Ties take midranks
// throughout.  Exact null distributions are used at desk scale so that no
// experiment verdict depends on a normal approximation; the method field on
// TestResult records which route produced the p-value.

namespace fairsim::stats {

enum class TestMethod {
  MannWhitneyExact,
  MannWhitneyNormal,
  KendallTauExact,
  KendallTauNormal,
};

const char* to_string(TestMethod method);

enum class Alternative { TwoSided, Less, Greater };

const char* to_string(Alternative alternative);
Alternative alternative_from_string(const std::string& s);

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  TestMethod method = TestMethod::MannWhitneyExact;
  std::vector<std::size_t> n;  // sample sizes
};

// U statistic for sample_a (pairs where a > b count 1, ties 1/2).  The exact
// p-value conditions on the observed pooled values and enumerates group
// assignments; it is used when min(n_a, n_b) <= 12 and the pooled size is
// small enough for the count table, otherwise the tie-corrected normal
// approximation applies.
TestResult mann_whitney_u(std::span<const double> sample_a, std::span<const double> sample_b,
                          Alternative alternative);

// Step-down Holm-Bonferroni at level alpha; the returned flags are in the
// original order of p_values.
std::vector<bool> holm_bonferroni(std::span<const double> p_values, double alpha);

// Tie-adjusted tau-b.  Exact p-value by permutation (full enumeration for
// n <= 8, fixed-seed randomisation with 100000 draws for n <= 30), normal
// approximation with tie-corrected variance above that.
TestResult kendall_tau(std::span<const double> x, std::span<const double> y,
                       Alternative alternative);

enum class BootstrapStatistic { Mean, Median };

// Percentile bootstrap interval; deterministic per seed.
std::pair<double, double> bootstrap_ci(std::span<const double> values,
                                       BootstrapStatistic statistic, int iterations,
                                       std::uint64_t seed, double level);

// Midranks of the pooled vector (average rank over tied runs, 1-based).
std::vector<double> midranks(std::span<const double> pooled);

}  // namespace fairsim::stats
