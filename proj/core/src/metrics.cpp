#include "fairsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "fairsim/rng.hpp"
#include "fairsim/stats.hpp"

namespace fairsim::metrics {

namespace {

constexpr double kMiZeroClamp = 1e-12;

double clamp_mi(double value) {
  if (value < 0.0 && value > -1e-9) return 0.0;
  if (value < 0.0) throw InputError("mutual information came out negative beyond tolerance");
  return value < kMiZeroClamp ? (value <= 0.0 ? 0.0 : value) : value;
}

// Per-column discretisation: columns with at most `bins` distinct values keep
// their value codes, others get equal-mass bin codes.
struct ColumnCodes {
  std::vector<int> codes;  // per row
  int n_codes = 1;
};

ColumnCodes discretise_column(std::span<const double> column, int bins) {
  const std::size_t n = column.size();
  std::vector<double> sorted(column.begin(), column.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  ColumnCodes out;
  out.codes.resize(n);
  if (sorted.size() <= static_cast<std::size_t>(bins)) {
    out.n_codes = static_cast<int>(std::max<std::size_t>(sorted.size(), 1));
    for (std::size_t i = 0; i < n; ++i) {
      out.codes[i] = static_cast<int>(
          std::lower_bound(sorted.begin(), sorted.end(), column[i]) - sorted.begin());
    }
    return out;
  }

  // Equal-mass thresholds at the k/bins quantiles of the raw (tied) values.
  std::vector<double> all(column.begin(), column.end());
  std::sort(all.begin(), all.end());
  std::vector<double> thresholds;
  for (int k = 1; k < bins; ++k) {
    const std::size_t pos = (n * static_cast<std::size_t>(k)) / static_cast<std::size_t>(bins);
    thresholds.push_back(all[pos]);
  }
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  out.n_codes = static_cast<int>(thresholds.size()) + 1;
  for (std::size_t i = 0; i < n; ++i) {
    out.codes[i] = static_cast<int>(
        std::upper_bound(thresholds.begin(), thresholds.end(), column[i]) - thresholds.begin());
  }
  return out;
}

struct JointCodes {
  std::vector<std::uint64_t> x;  // joint code of all x columns, per row
  std::vector<int> y;
  std::uint64_t n_x_codes = 1;
  int n_y_codes = 1;
};

JointCodes make_codes(const Matrix& samples_x, std::span<const double> samples_y, int bins) {
  if (samples_x.rows != samples_y.size()) {
    throw InputError("mutual_information_plugin: row count mismatch");
  }
  if (samples_x.rows == 0) throw InputError("mutual_information_plugin: empty sample");
  if (bins < 2) throw InputError("mutual_information_plugin: need at least 2 bins");

  const std::size_t n = samples_x.rows;
  JointCodes out;
  out.x.assign(n, 0);
  std::vector<double> column(n);
  for (std::size_t c = 0; c < samples_x.cols; ++c) {
    for (std::size_t i = 0; i < n; ++i) column[i] = samples_x.at(i, c);
    const ColumnCodes codes = discretise_column(column, bins);
    if (out.n_x_codes > (std::uint64_t{1} << 57) / static_cast<std::uint64_t>(codes.n_codes)) {
      throw CapacityError("mutual_information_plugin: joint bin space too large");
    }
    for (std::size_t i = 0; i < n; ++i) {
      out.x[i] = out.x[i] * static_cast<std::uint64_t>(codes.n_codes) +
                 static_cast<std::uint64_t>(codes.codes[i]);
    }
    out.n_x_codes *= static_cast<std::uint64_t>(codes.n_codes);
  }
  const ColumnCodes ycodes = discretise_column(samples_y, bins);
  out.y = ycodes.codes;
  out.n_y_codes = ycodes.n_codes;
  return out;
}

double plugin_mi_from_codes(const std::vector<std::uint64_t>& xc, const std::vector<int>& yc,
                            int n_y_codes) {
  const std::size_t n = xc.size();
  std::unordered_map<std::uint64_t, std::size_t> cx;
  std::unordered_map<std::uint64_t, std::size_t> cxy;
  std::vector<std::size_t> cy(static_cast<std::size_t>(n_y_codes), 0);
  cx.reserve(n * 2);
  cxy.reserve(n * 2);
  for (std::size_t i = 0; i < n; ++i) {
    ++cx[xc[i]];
    ++cy[static_cast<std::size_t>(yc[i])];
    ++cxy[xc[i] * static_cast<std::uint64_t>(n_y_codes) + static_cast<std::uint64_t>(yc[i])];
  }
  const double dn = static_cast<double>(n);
  double mi = 0.0;
  for (const auto& [key, count] : cxy) {
    const std::uint64_t xkey = key / static_cast<std::uint64_t>(n_y_codes);
    const std::size_t ykey = static_cast<std::size_t>(key % static_cast<std::uint64_t>(n_y_codes));
    const double pxy = static_cast<double>(count) / dn;
    const double px = static_cast<double>(cx.at(xkey)) / dn;
    const double py = static_cast<double>(cy[ykey]) / dn;
    mi += pxy * std::log(pxy / (px * py));
  }
  return clamp_mi(mi);
}

std::vector<double> to_doubles(std::span<const std::uint8_t> values) {
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = static_cast<double>(values[i]);
  return out;
}

}  // namespace

AucResult auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw InputError("auc: size mismatch");
  if (scores.empty()) throw InputError("auc: empty input");
  std::size_t n_pos = 0;
  for (std::uint8_t y : labels) {
    if (y > 1) throw InputError("auc: labels must be 0/1");
    n_pos += y;
  }
  const std::size_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw InputError("auc: both classes required");

  const std::vector<double> ranks = stats::midranks(scores);
  double rank_sum_pos = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] == 1) rank_sum_pos += ranks[i];
  }
  const double u = rank_sum_pos -
                   0.5 * static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0);
  AucResult result;
  result.n_pos = n_pos;
  result.n_neg = n_neg;
  result.auc = u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
  return result;
}

AucResult measure_separability(const data::Dataset& train, const data::Dataset& test,
                               const model::ModelSpec& spec) {
  auto relabel = [](const data::Dataset& d) {
    std::vector<data::Record> records = d.records();
    for (data::Record& r : records) r.y = r.a;
    return data::Dataset(d.x_z_width(), d.x_a_width(), std::move(records), d.manifest());
  };
  auto has_both_groups = [](const data::Dataset& d) {
    bool g0 = false, g1 = false;
    for (const data::Record& r : d.records()) {
      (r.a == 1 ? g1 : g0) = true;
      if (g0 && g1) return true;
    }
    return false;
  };
  if (!has_both_groups(train) || !has_both_groups(test)) {
    throw InputError("measure_separability: both groups required in train and test");
  }
  const model::TrainedModel subgroup_model = model::train_erm(relabel(train), spec);
  const model::Predictions preds = model::predict(subgroup_model, test);
  return auc(preds.scores, test.groups());
}

GroupAccuracy group_accuracy(const model::TrainedModel& model, const data::Dataset& test) {
  if (test.empty()) throw InputError("group_accuracy: empty dataset");
  const model::Predictions preds = model::predict(model, test);
  std::size_t count[2] = {0, 0};
  std::size_t correct[2] = {0, 0};
  for (std::size_t i = 0; i < test.size(); ++i) {
    const data::Record& r = test.record(i);
    ++count[r.a];
    correct[r.a] += (preds.labels[i] == r.y) ? 1 : 0;
  }
  GroupAccuracy out;
  if (count[0] > 0) out.group0 = static_cast<double>(correct[0]) / static_cast<double>(count[0]);
  if (count[1] > 0) out.group1 = static_cast<double>(correct[1]) / static_cast<double>(count[1]);
  out.overall = static_cast<double>(correct[0] + correct[1]) / static_cast<double>(test.size());
  return out;
}

MiEstimate mutual_information_exact(const scm::JointTable& joint,
                                    const std::vector<std::string>& vars_x,
                                    const std::vector<std::string>& vars_y,
                                    const std::vector<std::string>& given) {
  if (vars_x.empty() || vars_y.empty()) {
    throw InputError("mutual_information_exact: empty variable set");
  }
  std::vector<std::size_t> xi, yi, gi;
  std::vector<char> used(joint.variables.size(), 0);
  auto lookup = [&](const std::vector<std::string>& names, std::vector<std::size_t>& out) {
    for (const std::string& name : names) {
      const std::size_t i = joint.index_of_variable(name);
      if (used[i]) throw InputError("mutual_information_exact: variable sets overlap: " + name);
      used[i] = 1;
      out.push_back(i);
    }
  };
  lookup(vars_x, xi);
  lookup(vars_y, yi);
  lookup(given, gi);

  auto group_card = [&](const std::vector<std::size_t>& idx) {
    std::size_t card = 1;
    for (std::size_t i : idx) card *= static_cast<std::size_t>(joint.cards[i]);
    return card;
  };
  const std::size_t cx = group_card(xi);
  const std::size_t cy = group_card(yi);
  const std::size_t cg = group_card(gi);
  if (cx > (std::size_t{1} << 26) / std::max<std::size_t>(cy, 1) ||
      cx * cy > (std::size_t{1} << 26) / std::max<std::size_t>(cg, 1)) {
    throw CapacityError("mutual_information_exact: marginal table too large");
  }

  std::vector<std::size_t> strides(joint.variables.size());
  std::size_t stride = 1;
  for (std::size_t i = joint.variables.size(); i > 0; --i) {
    strides[i - 1] = stride;
    stride *= static_cast<std::size_t>(joint.cards[i - 1]);
  }
  auto group_value = [&](std::size_t idx, const std::vector<std::size_t>& vars) {
    std::size_t v = 0;
    for (std::size_t i : vars) {
      v = v * static_cast<std::size_t>(joint.cards[i]) +
          (idx / strides[i]) % static_cast<std::size_t>(joint.cards[i]);
    }
    return v;
  };

  std::vector<double> pxyg(cx * cy * cg, 0.0);
  for (std::size_t idx = 0; idx < joint.probabilities.size(); ++idx) {
    const double p = joint.probabilities[idx];
    if (p == 0.0) continue;
    const std::size_t vx = group_value(idx, xi);
    const std::size_t vy = group_value(idx, yi);
    const std::size_t vg = group_value(idx, gi);
    pxyg[(vx * cy + vy) * cg + vg] += p;
  }

  std::vector<double> pxg(cx * cg, 0.0), pyg(cy * cg, 0.0), pg(cg, 0.0);
  for (std::size_t vx = 0; vx < cx; ++vx) {
    for (std::size_t vy = 0; vy < cy; ++vy) {
      for (std::size_t vg = 0; vg < cg; ++vg) {
        const double p = pxyg[(vx * cy + vy) * cg + vg];
        pxg[vx * cg + vg] += p;
        pyg[vy * cg + vg] += p;
        pg[vg] += p;
      }
    }
  }

  double mi = 0.0;
  for (std::size_t vx = 0; vx < cx; ++vx) {
    for (std::size_t vy = 0; vy < cy; ++vy) {
      for (std::size_t vg = 0; vg < cg; ++vg) {
        const double p = pxyg[(vx * cy + vy) * cg + vg];
        if (p == 0.0) continue;
        mi += p * std::log(p * pg[vg] / (pxg[vx * cg + vg] * pyg[vy * cg + vg]));
      }
    }
  }

  MiEstimate out;
  out.value = clamp_mi(mi);
  out.method = MiMethod::Exact;
  out.details = "joint-table summation";
  return out;
}

MiEstimate mutual_information_plugin(const Matrix& samples_x, std::span<const double> samples_y,
                                     const BinSpec& bins) {
  const JointCodes codes = make_codes(samples_x, samples_y, bins.bins);
  MiEstimate out;
  out.value = plugin_mi_from_codes(codes.x, codes.y, codes.n_y_codes);
  out.method = MiMethod::PlugIn;
  out.details = "equal-mass bins=" + std::to_string(bins.bins);
  return out;
}

MiEstimate mutual_information_plugin(const Matrix& samples_x,
                                     std::span<const std::uint8_t> samples_y,
                                     const BinSpec& bins) {
  const std::vector<double> y = to_doubles(samples_y);
  return mutual_information_plugin(samples_x, y, bins);
}

PermutationNull mi_permutation_null(const Matrix& samples_x, std::span<const double> samples_y,
                                    const BinSpec& bins, int iterations, std::uint64_t seed) {
  if (iterations < 2) throw InputError("mi_permutation_null: need at least 2 iterations");
  const JointCodes codes = make_codes(samples_x, samples_y, bins.bins);
  std::vector<int> permuted = codes.y;
  rng::SplitMix64 gen(seed);
  std::vector<double> values(static_cast<std::size_t>(iterations));
  for (int it = 0; it < iterations; ++it) {
    rng::shuffle(permuted, gen);
    values[static_cast<std::size_t>(it)] =
        plugin_mi_from_codes(codes.x, permuted, codes.n_y_codes);
  }
  PermutationNull null;
  null.iterations = iterations;
  null.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(iterations);
  double ss = 0.0;
  for (double v : values) ss += (v - null.mean) * (v - null.mean);
  null.sd = std::sqrt(ss / static_cast<double>(iterations - 1));
  std::sort(values.begin(), values.end());
  const std::size_t q_index =
      std::min(static_cast<std::size_t>(std::ceil(0.95 * iterations)) - 1,
               values.size() - 1);
  null.q95 = values[q_index];
  return null;
}

FairnessVerdict fairness_verdict(const model::TrainedModel& erm, const model::TrainedModel& frl,
                                 const data::Dataset& train, const data::Dataset& test,
                                 const scm::JointTable* test_joint,
                                 const VerdictOptions& options) {
  if (train.empty() || test.empty()) throw InputError("fairness_verdict: empty dataset");
  {
    bool has[2] = {false, false};
    for (const data::Record& r : train.records()) has[r.a] = true;
    if (!has[0] || !has[1]) throw InputError("fairness_verdict: both groups required in train");
    bool cls[2] = {false, false};
    for (const data::Record& r : test.records()) cls[r.y] = true;
    if (!cls[0] || !cls[1]) throw InputError("fairness_verdict: both classes required in test");
  }

  FairnessVerdict verdict;
  const std::vector<double> a_train = to_doubles(train.groups());
  const std::vector<double> y_test = to_doubles(test.labels());

  // Train-time sensitive information in the representations.
  const Matrix reps_erm = model::representations(erm, train);
  const Matrix reps_frl = model::representations(frl, train);
  verdict.i_a_r_erm = mutual_information_plugin(reps_erm, a_train, options.bins);
  verdict.i_a_r_frl = mutual_information_plugin(reps_frl, a_train, options.bins);
  const PermutationNull null_erm = mi_permutation_null(
      reps_erm, a_train, options.bins, options.permutations, rng::derive(options.seed, 1));
  const PermutationNull null_frl = mi_permutation_null(
      reps_frl, a_train, options.bins, options.permutations, rng::derive(options.seed, 2));
  verdict.epsilon_erm = std::max(options.epsilon_floor, null_erm.q95);
  verdict.epsilon_frl = std::max(options.epsilon_floor, null_frl.q95);
  verdict.effective = verdict.i_a_r_frl.value <= verdict.epsilon_frl &&
                      verdict.i_a_r_erm.value > verdict.epsilon_erm;

  // Test-time target information retained by the constrained representation.
  const Matrix reps_frl_test = model::representations(frl, test);
  verdict.i_y_r_frl = mutual_information_plugin(reps_frl_test, y_test, options.bins);
  const PermutationNull null_yr = mi_permutation_null(
      reps_frl_test, y_test, options.bins, options.permutations, rng::derive(options.seed, 3));
  if (test_joint != nullptr) {
    verdict.i_y_x = mutual_information_exact(*test_joint, {"Y"}, {"X_Z", "X_A"});
  } else {
    verdict.i_y_x = mutual_information_plugin(test.feature_matrix(), y_test, options.bins);
  }
  verdict.delta = std::max(options.delta_floor, 3.0 * null_yr.sd);
  verdict.harmless = verdict.i_y_r_frl.value >= verdict.i_y_x.value - verdict.delta;
  return verdict;
}

}  // namespace fairsim::metrics
