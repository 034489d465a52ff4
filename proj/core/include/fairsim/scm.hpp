#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fairsim/causal_graph.hpp"
#include "fairsim/common.hpp"
#include "fairsim/dataset.hpp"

// Discrete structural causal models over the bias-mechanism templates.  Every
// node carries a conditional probability table, so the induced joint
// distribution is available exactly; this is what lets the independence
// claims about bias mechanisms be checked without estimator noise.
//
// A, Z and Y are binary.  The feature blocks X_Z and X_A are vectors of
// binary channels encoded as single categorical nodes of cardinality 2^k;
// channels are conditionally independent given the node's parents.

namespace fairsim::scm {

struct ScmConfig {
  graph::BiasMechanism mechanism = graph::BiasMechanism::Unbiased;
  // Fidelity of the sensitive channels: each X_A channel flips away from the
  // group-indicative value with probability (1 - separability_strength) / 2.
  double separability_strength = 0.5;
  // Scales the CPT shift carried by the mechanism's unfair edges; 0 recovers
  // the unbiased distribution on any template.
  double mechanism_strength = 0.5;
  int x_z_channels = 4;
  int x_a_channels = 4;
  double base_prevalence = 0.5;  // p(z=1) absent prevalence disparity
  double group_balance = 0.5;    // p(a=1)
  std::uint64_t seed = 0;
  // FeatureEntanglement cross edges, individually toggleable.
  bool entangle_a_to_xz = true;
  bool entangle_z_to_xa = true;

  void validate() const;
  // Deterministic key=value rendering; hashed into dataset manifests.
  std::string canonical_string() const;
  std::string hash() const;

  bool operator==(const ScmConfig&) const = default;
};

// Conditional probability table.  Rows are indexed by the parent assignment
// in mixed radix (first parent most significant); parents are listed in the
// SCM's topological order.
struct Cpt {
  std::vector<std::string> parents;
  std::vector<int> parent_cards;
  int card = 2;
  std::vector<double> table;  // rows * card, row-major

  std::size_t row_count() const;
  std::size_t row_index(const std::vector<int>& parent_values) const;
  const double* row(std::size_t r) const { return table.data() + r * static_cast<std::size_t>(card); }
  double* row(std::size_t r) { return table.data() + r * static_cast<std::size_t>(card); }
};

enum class ScmLabel { Train, Test };

struct DiscreteScm {
  graph::CausalDag dag;
  std::vector<std::string> order;           // topological node order
  std::map<std::string, int> cardinality;
  std::map<std::string, Cpt> cpts;
  ScmLabel label = ScmLabel::Train;
  ScmConfig config;                          // provenance

  // Checks row sums (1 within 1e-9) and table dimensions.
  void validate() const;
};

// Dense joint distribution over `variables` (row-major, last variable fastest).
struct JointTable {
  std::vector<std::string> variables;
  std::vector<int> cards;
  std::vector<double> probabilities;

  std::size_t size() const { return probabilities.size(); }
  int card_of(const std::string& variable) const;
  std::size_t index_of_variable(const std::string& variable) const;
  // Marginal distribution of one variable.
  std::vector<double> marginal(const std::string& variable) const;
};

// Parameterise an SCM on the mechanism's template graph.
//  * X_A channel c: p(bit=1 | a) walks from flip to 1-flip with
//    flip = (1 - separability_strength) / 2.
//  * X_Z channel c: flip rates are a fixed ladder over [0.10, 0.35] so that
//    p(z | x_z) takes many distinct values across the channel lattice.
//  * PrevalenceDisparity: p(z=1|a) = base_prevalence +/- strength *
//    min(base, 1-base) / 2 (group 1 on the low side).
//  * AnnotationDisparity: p(y=1|z=1, a=1) = 1 - strength/2; group 0 clean.
//  * FeatureEntanglement: enabled cross edges mix the channel's source
//    distribution with the other factor's at weight strength/2.
DiscreteScm build_scm(const ScmConfig& config);

// Chain-rule product over all joint states; throws CapacityError above 2^24 states.
JointTable exact_joint(const DiscreteScm& scm);

// n i.i.d. ancestral samples.  Draw (i, node j) uses the counter stream
// rng::unit_at(seed, j, i), so output is independent of sampling order.
data::Dataset sample_dataset(const DiscreteScm& scm, std::size_t n, std::uint64_t seed);

// SCM on the graph with unfair edges removed.  A node that loses parents has
// its CPT averaged over the deleted parents' train-time marginals; fair
// mechanisms are untouched.  Label flips to Test.
DiscreteScm unbiased_counterpart(const DiscreteScm& scm);

}  // namespace fairsim::scm
