#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fairsim/common.hpp"
#include "fairsim/dataset.hpp"
#include "fairsim/model.hpp"
#include "fairsim/scm.hpp"

// Separability AUC, per-group accuracy, mutual information (exact over joint
// tables, histogram plug-in over samples) and the effectiveness/harmlessness
// verdicts for fair-representation training.  All MI values are in nats.

namespace fairsim::metrics {

struct AucResult {
  double auc = 0.5;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
};

// Probability that a positive outranks a negative, ties counting 1/2; equal
// to the Mann-Whitney U statistic divided by n_pos * n_neg.
AucResult auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

// Test AUC of a classifier trained to predict the group attribute from all
// input channels.  Operationalises how much sensitive information the input
// carries.
AucResult measure_separability(const data::Dataset& train, const data::Dataset& test,
                               const model::ModelSpec& spec);

struct GroupAccuracy {
  std::optional<double> group0;  // absent when the group has no records
  std::optional<double> group1;
  double overall = 0.0;
};

GroupAccuracy group_accuracy(const model::TrainedModel& model, const data::Dataset& test);

enum class MiMethod { Exact, PlugIn };

struct MiEstimate {
  double value = 0.0;  // nats
  MiMethod method = MiMethod::PlugIn;
  std::string details;
};

// Conditional mutual information I(vars_x ; vars_y | given) by direct
// summation over the joint table.  Zero exactly when the table satisfies the
// corresponding conditional independence.
MiEstimate mutual_information_exact(const scm::JointTable& joint,
                                    const std::vector<std::string>& vars_x,
                                    const std::vector<std::string>& vars_y,
                                    const std::vector<std::string>& given = {});

struct BinSpec {
  int bins = 8;  // equal-mass bins per continuous column
};

// Histogram plug-in MI between the rows of samples_x and samples_y.  Columns
// with at most `bins` distinct values are used as-is; other columns are
// discretised into equal-mass bins.  A constant column contributes a single
// bin and therefore nothing to the estimate.
MiEstimate mutual_information_plugin(const Matrix& samples_x, std::span<const double> samples_y,
                                     const BinSpec& bins);
MiEstimate mutual_information_plugin(const Matrix& samples_x,
                                     std::span<const std::uint8_t> samples_y, const BinSpec& bins);

struct PermutationNull {
  double mean = 0.0;
  double sd = 0.0;
  double q95 = 0.0;
  int iterations = 0;
};

// Null distribution of the plug-in MI under random pairings (samples_y
// permuted), with the binning held fixed.
PermutationNull mi_permutation_null(const Matrix& samples_x, std::span<const double> samples_y,
                                    const BinSpec& bins, int iterations, std::uint64_t seed);

struct VerdictOptions {
  BinSpec bins;
  int permutations = 100;
  // Representation-independence threshold: eps = max(floor, null q95).
  double epsilon_floor = 0.01;
  // Harmlessness band: delta = max(floor, 3 * null sd of the R-side estimate).
  double delta_floor = 0.015;
  std::uint64_t seed = 0;
};

struct FairnessVerdict {
  bool effective = false;
  bool harmless = false;
  MiEstimate i_a_r_erm;
  MiEstimate i_a_r_frl;
  MiEstimate i_y_r_frl;
  MiEstimate i_y_x;
  double epsilon_erm = 0.0;
  double epsilon_frl = 0.0;
  double delta = 0.0;
};

// Effectiveness is judged on train-time representations (does the constrained
// model drop sensitive information the unconstrained one encodes?);
// harmlessness on test-time information about the target (does the
// constrained representation keep everything the input offers?).  When
// test_joint is supplied, I(Y; X) is exact; otherwise it is estimated from
// the raw feature channels.
FairnessVerdict fairness_verdict(const model::TrainedModel& erm, const model::TrainedModel& frl,
                                 const data::Dataset& train, const data::Dataset& test,
                                 const scm::JointTable* test_joint, const VerdictOptions& options);

}  // namespace fairsim::metrics
