#include "fairsim/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>

#include "fairsim/rng.hpp"

namespace fairsim::stats {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

double normal_sf(double z) { return 0.5 * std::erfc(z / kSqrt2); }

// Largest pooled size for which the exact Mann-Whitney count table is built.
// Together with min(n_a, n_b) <= 12 this keeps the table under a few MB.
constexpr std::size_t kExactPooledLimit = 500;
constexpr std::size_t kExactMinGroup = 12;

constexpr std::size_t kTauEnumerationLimit = 8;
constexpr std::size_t kTauRandomisationLimit = 30;
constexpr int kTauRandomisationDraws = 100000;
constexpr std::uint64_t kTauRandomisationSeed = 0x6b656e64616c6cull;

double two_sided_from_tails(double p_less, double p_greater) {
  return std::min(1.0, 2.0 * std::min(p_less, p_greater));
}

double pick_tail(Alternative alternative, double p_less, double p_greater) {
  switch (alternative) {
    case Alternative::Less: return p_less;
    case Alternative::Greater: return p_greater;
    case Alternative::TwoSided: return two_sided_from_tails(p_less, p_greater);
  }
  throw InputError("unknown alternative");
}

}  // namespace

const char* to_string(TestMethod method) {
  switch (method) {
    case TestMethod::MannWhitneyExact: return "mann_whitney_exact";
    case TestMethod::MannWhitneyNormal: return "mann_whitney_normal";
    case TestMethod::KendallTauExact: return "kendall_tau_exact";
    case TestMethod::KendallTauNormal: return "kendall_tau_normal";
  }
  throw InputError("unknown TestMethod");
}

const char* to_string(Alternative alternative) {
  switch (alternative) {
    case Alternative::TwoSided: return "two_sided";
    case Alternative::Less: return "less";
    case Alternative::Greater: return "greater";
  }
  throw InputError("unknown Alternative");
}

Alternative alternative_from_string(const std::string& s) {
  if (s == "two_sided") return Alternative::TwoSided;
  if (s == "less") return Alternative::Less;
  if (s == "greater") return Alternative::Greater;
  throw InputError("unknown alternative: " + s);
}

std::vector<double> midranks(std::span<const double> pooled) {
  const std::size_t n = pooled.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return pooled[i] < pooled[j]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;  // average of ranks i+1 .. j+1
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mid;
    i = j + 1;
  }
  return ranks;
}

TestResult mann_whitney_u(std::span<const double> sample_a, std::span<const double> sample_b,
                          Alternative alternative) {
  const std::size_t na = sample_a.size();
  const std::size_t nb = sample_b.size();
  if (na == 0 || nb == 0) throw InputError("mann_whitney_u: empty sample");
  const std::size_t n = na + nb;

  std::vector<double> pooled(sample_a.begin(), sample_a.end());
  pooled.insert(pooled.end(), sample_b.begin(), sample_b.end());
  for (double v : pooled) {
    if (!std::isfinite(v)) throw InputError("mann_whitney_u: non-finite value");
  }
  const std::vector<double> ranks = midranks(pooled);

  // Doubled ranks are integers even with midranks, so all comparisons below
  // are exact.
  std::vector<long long> twice_ranks(n);
  for (std::size_t i = 0; i < n; ++i) twice_ranks[i] = std::llround(2.0 * ranks[i]);
  long long twice_rank_sum_a = 0;
  for (std::size_t i = 0; i < na; ++i) twice_rank_sum_a += twice_ranks[i];
  const long long twice_u_a =
      twice_rank_sum_a - static_cast<long long>(na) * static_cast<long long>(na + 1);
  const double u_a = 0.5 * static_cast<double>(twice_u_a);

  TestResult result;
  result.statistic = u_a;
  result.n = {na, nb};

  const bool exact = std::min(na, nb) <= kExactMinGroup && n <= kExactPooledLimit;
  if (exact) {
    // Distribution of the doubled rank sum of the smaller group over all
    // C(n, m) equally likely assignments, conditioned on the observed ties.
    const bool a_is_small = na <= nb;
    const std::size_t m = a_is_small ? na : nb;
    long long total = 0;
    for (long long r : twice_ranks) total += r;
    std::vector<std::vector<unsigned __int128>> count(
        m + 1, std::vector<unsigned __int128>(static_cast<std::size_t>(total) + 1, 0));
    count[0][0] = 1;
    for (std::size_t e = 0; e < n; ++e) {
      const long long r = twice_ranks[e];
      const std::size_t kmax = std::min(m, e + 1);
      for (std::size_t k = kmax; k >= 1; --k) {
        auto& row = count[k];
        const auto& prev = count[k - 1];
        for (long long s = total - r; s >= 0; --s) {
          if (prev[static_cast<std::size_t>(s)] != 0) {
            row[static_cast<std::size_t>(s + r)] += prev[static_cast<std::size_t>(s)];
          }
        }
      }
    }
    const auto& dist = count[m];
    // Rank sum threshold for the small group matching the observed statistic.
    long long twice_rank_sum_small = twice_rank_sum_a;
    if (!a_is_small) twice_rank_sum_small = total - twice_rank_sum_a;
    unsigned __int128 le = 0, ge = 0, all = 0;
    for (long long s = 0; s <= total; ++s) {
      const unsigned __int128 c = dist[static_cast<std::size_t>(s)];
      if (c == 0) continue;
      all += c;
      if (s <= twice_rank_sum_small) le += c;
      if (s >= twice_rank_sum_small) ge += c;
    }
    auto frac = [&](unsigned __int128 c) {
      return static_cast<double>(c) / static_cast<double>(all);
    };
    // Small rank sum for group a means small U_a; if b is the small group the
    // tails swap.
    double p_less = a_is_small ? frac(le) : frac(ge);
    double p_greater = a_is_small ? frac(ge) : frac(le);
    result.method = TestMethod::MannWhitneyExact;
    result.p_value = pick_tail(alternative, p_less, p_greater);
    return result;
  }

  // Tie-corrected normal approximation with continuity correction.
  const double mean = 0.5 * static_cast<double>(na) * static_cast<double>(nb);
  double tie_term = 0.0;
  {
    std::vector<double> sorted(pooled);
    std::sort(sorted.begin(), sorted.end());
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && sorted[j + 1] == sorted[i]) ++j;
      const double t = static_cast<double>(j - i + 1);
      tie_term += t * t * t - t;
      i = j + 1;
    }
  }
  const double nn = static_cast<double>(n);
  const double var = (static_cast<double>(na) * static_cast<double>(nb) / 12.0) *
                     ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
  result.method = TestMethod::MannWhitneyNormal;
  if (var <= 0.0) {
    result.p_value = 1.0;
    return result;
  }
  const double sd = std::sqrt(var);
  const double p_greater = normal_sf((u_a - mean - 0.5) / sd);
  const double p_less = 1.0 - normal_sf((u_a - mean + 0.5) / sd);
  result.p_value = pick_tail(alternative, p_less, p_greater);
  return result;
}

std::vector<bool> holm_bonferroni(std::span<const double> p_values, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("holm_bonferroni: alpha must be in (0,1)");
  const std::size_t m = p_values.size();
  for (double p : p_values) {
    if (!(p >= 0.0 && p <= 1.0)) throw InputError("holm_bonferroni: p-value outside [0,1]");
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return p_values[i] < p_values[j]; });
  std::vector<bool> reject(m, false);
  for (std::size_t i = 0; i < m; ++i) {
    const double threshold = alpha / static_cast<double>(m - i);
    if (p_values[order[i]] <= threshold) {
      reject[order[i]] = true;
    } else {
      break;
    }
  }
  return reject;
}

namespace {

// Concordant-minus-discordant count; integer, so permutation comparisons are exact.
long long kendall_s(std::span<const double> x, std::span<const double> y,
                    std::span<const std::size_t> y_order) {
  const std::size_t n = x.size();
  long long s = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = x[i] - x[j];
      const double dy = y[y_order[i]] - y[y_order[j]];
      if (dx == 0.0 || dy == 0.0) continue;
      s += ((dx > 0.0) == (dy > 0.0)) ? 1 : -1;
    }
  }
  return s;
}

double tie_pair_count(std::span<const double> v) {
  std::vector<double> sorted(v.begin(), v.end());
  std::sort(sorted.begin(), sorted.end());
  double pairs = 0.0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    pairs += 0.5 * t * (t - 1.0);
    i = j + 1;
  }
  return pairs;
}

}  // namespace

TestResult kendall_tau(std::span<const double> x, std::span<const double> y,
                       Alternative alternative) {
  const std::size_t n = x.size();
  if (n != y.size()) throw InputError("kendall_tau: length mismatch");
  if (n < 2) throw InputError("kendall_tau: need at least 2 observations");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw InputError("kendall_tau: non-finite value");
  }

  std::vector<std::size_t> identity(n);
  std::iota(identity.begin(), identity.end(), std::size_t{0});
  const long long s_obs = kendall_s(x, y, identity);

  const double n0 = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
  const double n1 = tie_pair_count(x);
  const double n2 = tie_pair_count(y);
  const double denom = std::sqrt((n0 - n1) * (n0 - n2));

  TestResult result;
  result.n = {n};
  if (denom == 0.0) {
    // One side entirely tied: tau-b undefined, report no association.
    result.statistic = 0.0;
    result.p_value = 1.0;
    result.method = TestMethod::KendallTauExact;
    return result;
  }
  result.statistic = static_cast<double>(s_obs) / denom;

  if (n <= kTauEnumerationLimit) {
    // All n! pairings of y against x.
    std::vector<std::size_t> perm(identity);
    long long le = 0, ge = 0, total = 0;
    std::sort(perm.begin(), perm.end());
    do {
      const long long s = kendall_s(x, y, perm);
      ++total;
      if (s <= s_obs) ++le;
      if (s >= s_obs) ++ge;
    } while (std::next_permutation(perm.begin(), perm.end()));
    const double p_less = static_cast<double>(le) / static_cast<double>(total);
    const double p_greater = static_cast<double>(ge) / static_cast<double>(total);
    result.method = TestMethod::KendallTauExact;
    result.p_value = pick_tail(alternative, p_less, p_greater);
    return result;
  }

  if (n <= kTauRandomisationLimit) {
    // Fixed-seed randomisation test; the observed pairing counts as one draw.
    rng::SplitMix64 gen(kTauRandomisationSeed);
    std::vector<std::size_t> perm(identity);
    long long le = 1, ge = 1;
    for (int it = 0; it < kTauRandomisationDraws; ++it) {
      rng::shuffle(perm, gen);
      const long long s = kendall_s(x, y, perm);
      if (s <= s_obs) ++le;
      if (s >= s_obs) ++ge;
    }
    const double total = static_cast<double>(kTauRandomisationDraws) + 1.0;
    result.method = TestMethod::KendallTauExact;
    result.p_value = pick_tail(alternative, static_cast<double>(le) / total,
                               static_cast<double>(ge) / total);
    return result;
  }

  // Normal approximation with the tie-corrected variance of S.
  auto tie_sum = [](std::span<const double> v, auto f) {
    std::vector<double> sorted(v.begin(), v.end());
    std::sort(sorted.begin(), sorted.end());
    double acc = 0.0;
    std::size_t i = 0;
    while (i < sorted.size()) {
      std::size_t j = i;
      while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
      acc += f(static_cast<double>(j - i + 1));
      i = j + 1;
    }
    return acc;
  };
  const double dn = static_cast<double>(n);
  auto v_term = [](double t) { return t * (t - 1.0) * (2.0 * t + 5.0); };
  auto pair_term = [](double t) { return t * (t - 1.0); };
  auto triple_term = [](double t) { return t * (t - 1.0) * (t - 2.0); };
  const double v0 = dn * (dn - 1.0) * (2.0 * dn + 5.0);
  const double vt = tie_sum(x, v_term);
  const double vu = tie_sum(y, v_term);
  const double t_pairs = tie_sum(x, pair_term);
  const double u_pairs = tie_sum(y, pair_term);
  const double t_triples = tie_sum(x, triple_term);
  const double u_triples = tie_sum(y, triple_term);
  double var = (v0 - vt - vu) / 18.0;
  var += t_triples * u_triples / (9.0 * dn * (dn - 1.0) * (dn - 2.0));
  var += t_pairs * u_pairs / (2.0 * dn * (dn - 1.0));
  result.method = TestMethod::KendallTauNormal;
  if (var <= 0.0) {
    result.p_value = 1.0;
    return result;
  }
  const double z = static_cast<double>(s_obs) / std::sqrt(var);
  const double p_greater = normal_sf(z);
  const double p_less = 1.0 - p_greater;
  result.p_value = pick_tail(alternative, p_less, p_greater);
  return result;
}

std::pair<double, double> bootstrap_ci(std::span<const double> values,
                                       BootstrapStatistic statistic, int iterations,
                                       std::uint64_t seed, double level) {
  if (values.empty()) throw InputError("bootstrap_ci: empty sample");
  if (iterations < 100) throw InputError("bootstrap_ci: need at least 100 iterations");
  if (!(level > 0.0 && level < 1.0)) throw InputError("bootstrap_ci: level must be in (0,1)");

  const std::size_t n = values.size();
  rng::SplitMix64 gen(seed);
  std::vector<double> resample(n);
  std::vector<double> stats(static_cast<std::size_t>(iterations));
  for (int it = 0; it < iterations; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      resample[i] = values[gen.next_below(n)];
    }
    if (statistic == BootstrapStatistic::Mean) {
      stats[static_cast<std::size_t>(it)] =
          std::accumulate(resample.begin(), resample.end(), 0.0) / static_cast<double>(n);
    } else {
      std::sort(resample.begin(), resample.end());
      stats[static_cast<std::size_t>(it)] =
          (n % 2 == 1) ? resample[n / 2] : 0.5 * (resample[n / 2 - 1] + resample[n / 2]);
    }
  }
  std::sort(stats.begin(), stats.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(stats.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, stats.size() - 1);
    const double w = pos - static_cast<double>(lo);
    return (1.0 - w) * stats[lo] + w * stats[hi];
  };
  const double tail = 0.5 * (1.0 - level);
  return {quantile(tail), quantile(1.0 - tail)};
}

}  // namespace fairsim::stats
