#include <doctest.h>

#include <cmath>

#include "fairsim/metrics.hpp"
#include "fairsim/rng.hpp"
#include "fairsim/scm.hpp"
#include "support/oracles.hpp"

using namespace fairsim;
using graph::BiasMechanism;
using scm::DiscreteScm;
using scm::JointTable;
using scm::ScmConfig;

namespace {

ScmConfig base_config(BiasMechanism mechanism, double separability, double strength) {
  ScmConfig config;
  config.mechanism = mechanism;
  config.separability_strength = separability;
  config.mechanism_strength = strength;
  return config;
}

double exact_i_y_xa_given_xz(const DiscreteScm& scm) {
  const JointTable joint = scm::exact_joint(scm);
  return metrics::mutual_information_exact(joint, {"Y"}, {"X_A"}, {"X_Z"}).value;
}

}  // namespace

TEST_CASE("config validation") {
  ScmConfig config;
  config.separability_strength = 1.5;
  CHECK_THROWS_AS(config.validate(), InputError);
  config = ScmConfig{};
  config.base_prevalence = 0.0;
  CHECK_THROWS_AS(config.validate(), InputError);
  config = ScmConfig{};
  config.mechanism = BiasMechanism::FeatureEntanglement;
  config.entangle_a_to_xz = false;
  config.entangle_z_to_xa = false;
  CHECK_THROWS_AS(config.validate(), InputError);
}

TEST_CASE("build_scm produces valid tables on the template graphs") {
  for (BiasMechanism m : {BiasMechanism::Unbiased, BiasMechanism::FeatureEntanglement,
                          BiasMechanism::PrevalenceDisparity, BiasMechanism::AnnotationDisparity}) {
    const DiscreteScm scm = scm::build_scm(base_config(m, 0.7, 0.5));
    scm.validate();
    CHECK(graph::graphically_unbiased(scm.dag) == (m == BiasMechanism::Unbiased));
  }
}

TEST_CASE("zero mechanism strength reduces every mechanism to the unbiased distribution") {
  const JointTable reference = scm::exact_joint(scm::build_scm(base_config(BiasMechanism::Unbiased, 0.6, 0.0)));
  for (BiasMechanism m : {BiasMechanism::FeatureEntanglement, BiasMechanism::PrevalenceDisparity,
                          BiasMechanism::AnnotationDisparity}) {
    const JointTable joint = scm::exact_joint(scm::build_scm(base_config(m, 0.6, 0.0)));
    REQUIRE(joint.variables == reference.variables);
    for (std::size_t i = 0; i < joint.probabilities.size(); ++i) {
      REQUIRE(joint.probabilities[i] == doctest::Approx(reference.probabilities[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("zero separability makes the sensitive channels uninformative about the group") {
  const DiscreteScm scm = scm::build_scm(base_config(BiasMechanism::Unbiased, 0.0, 0.0));
  const scm::Cpt& cpt = scm.cpts.at("X_A");
  REQUIRE(cpt.parents == std::vector<std::string>{"A"});
  for (int v = 0; v < cpt.card; ++v) {
    CHECK(cpt.row(0)[v] == doctest::Approx(cpt.row(1)[v]).epsilon(1e-15));
  }
}

TEST_CASE("exact_joint on hand-built models") {
  // Single binary node.
  {
    DiscreteScm s;
    using Nodes = std::vector<std::pair<graph::NodeId, graph::NodeRole>>;
    s.dag = graph::CausalDag(Nodes{{"v", graph::NodeRole::Exogenous}}, {});
    s.order = {"v"};
    s.cardinality["v"] = 2;
    scm::Cpt cpt;
    cpt.card = 2;
    cpt.table = {0.3, 0.7};
    s.cpts.emplace("v", cpt);
    const JointTable joint = scm::exact_joint(s);
    REQUIRE(joint.probabilities.size() == 2);
    CHECK(joint.probabilities[0] == doctest::Approx(0.3));
    CHECK(joint.probabilities[1] == doctest::Approx(0.7));
  }
  // Two independent fair coins.
  {
    DiscreteScm s;
    using Nodes = std::vector<std::pair<graph::NodeId, graph::NodeRole>>;
    s.dag = graph::CausalDag(Nodes{{"u", graph::NodeRole::Exogenous},
                                   {"v", graph::NodeRole::Exogenous}},
                             {});
    s.order = s.dag.topological_order();
    s.cardinality["u"] = 2;
    s.cardinality["v"] = 2;
    scm::Cpt cpt;
    cpt.card = 2;
    cpt.table = {0.5, 0.5};
    s.cpts.emplace("u", cpt);
    s.cpts.emplace("v", cpt);
    const JointTable joint = scm::exact_joint(s);
    for (double p : joint.probabilities) CHECK(p == doctest::Approx(0.25));
  }
}

TEST_CASE("exact joint mass and label marginal") {
  ScmConfig config = base_config(BiasMechanism::Unbiased, 0.5, 0.0);
  config.base_prevalence = 0.37;
  const JointTable joint = scm::exact_joint(scm::build_scm(config));
  double total = 0.0;
  for (double p : joint.probabilities) total += p;
  CHECK(std::abs(total - 1.0) < 1e-9);
  const std::vector<double> y_marginal = joint.marginal("Y");
  CHECK(y_marginal[1] == doctest::Approx(0.37).epsilon(1e-12));
}

TEST_CASE("exact_joint capacity guard") {
  ScmConfig config = base_config(BiasMechanism::Unbiased, 0.5, 0.0);
  config.x_z_channels = 16;
  config.x_a_channels = 16;
  const DiscreteScm scm = scm::build_scm(config);
  CHECK_THROWS_AS(scm::exact_joint(scm), CapacityError);
}

TEST_CASE("sampling is deterministic and prefix-stable") {
  const DiscreteScm scm = scm::build_scm(base_config(BiasMechanism::PrevalenceDisparity, 0.6, 0.5));
  const data::Dataset d1 = scm::sample_dataset(scm, 1000, 42);
  const data::Dataset d2 = scm::sample_dataset(scm, 1000, 42);
  CHECK(d1 == d2);
  // Counter-based draws: a shorter run is a prefix of a longer one.
  const data::Dataset d3 = scm::sample_dataset(scm, 300, 42);
  for (std::size_t i = 0; i < d3.size(); ++i) {
    CHECK(d3.record(i) == d1.record(i));
  }
  const data::Dataset other_seed = scm::sample_dataset(scm, 1000, 43);
  CHECK_FALSE(d1 == other_seed);
}

TEST_CASE("full separability makes the group a function of its channels") {
  const DiscreteScm scm = scm::build_scm(base_config(BiasMechanism::Unbiased, 1.0, 0.0));
  const data::Dataset d = scm::sample_dataset(scm, 2000, 7);
  for (const data::Record& r : d.records()) {
    CHECK(r.x_a == (r.a == 1 ? 0xFu : 0x0u));
  }
}

TEST_CASE("empirical label rate tracks the exact marginal") {
  ScmConfig config = base_config(BiasMechanism::Unbiased, 0.5, 0.0);
  config.base_prevalence = 0.3;
  const DiscreteScm scm = scm::build_scm(config);
  const JointTable joint = scm::exact_joint(scm);
  const double p1 = joint.marginal("Y")[1];
  const std::size_t n = 100000;
  const data::Dataset d = scm::sample_dataset(scm, n, 11);
  std::size_t positives = 0;
  for (const data::Record& r : d.records()) positives += r.y;
  const double se = std::sqrt(p1 * (1.0 - p1) / static_cast<double>(n));
  CHECK(std::abs(static_cast<double>(positives) / static_cast<double>(n) - p1) <= 3.0 * se);
}

TEST_CASE("sampled frequencies pass a goodness-of-fit check against the exact joint") {
  const DiscreteScm scm = scm::build_scm(base_config(BiasMechanism::AnnotationDisparity, 0.7, 0.5));
  const JointTable joint = scm::exact_joint(scm);
  const std::size_t n = 100000;
  int rejections = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const data::Dataset d = scm::sample_dataset(scm, n, seed);
    std::vector<std::size_t> counts(joint.probabilities.size(), 0);
    for (const data::Record& r : d.records()) {
      const std::size_t idx =
          ((((static_cast<std::size_t>(r.a) * 2 + r.z) * 2 + r.y) * 16) + r.x_z) * 16 + r.x_a;
      ++counts[idx];
    }
    // Merge low-expectation cells; structurally impossible cells must be empty.
    double chi2 = 0.0;
    double rest_expected = 0.0;
    std::size_t rest_observed = 0;
    std::size_t kept = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      const double expected = joint.probabilities[i] * static_cast<double>(n);
      if (joint.probabilities[i] == 0.0) {
        REQUIRE(counts[i] == 0);
        continue;
      }
      if (expected < 5.0) {
        rest_expected += expected;
        rest_observed += counts[i];
        continue;
      }
      const double diff = static_cast<double>(counts[i]) - expected;
      chi2 += diff * diff / expected;
      ++kept;
    }
    std::size_t df = kept;
    if (rest_expected > 0.0) {
      const double diff = static_cast<double>(rest_observed) - rest_expected;
      chi2 += diff * diff / rest_expected;
      ++df;
    }
    df -= 1;
    const double critical = oracles::chi_square_quantile(static_cast<double>(df), 2.3263478740408408);
    if (chi2 > critical) ++rejections;
  }
  CHECK(rejections <= 1);
}

TEST_CASE("exact sensitive-channel information is monotone in separability strength") {
  double previous = -1.0;
  for (int k = 0; k <= 10; ++k) {
    const double strength = static_cast<double>(k) / 10.0;
    const DiscreteScm scm = scm::build_scm(base_config(BiasMechanism::Unbiased, strength, 0.0));
    const double mi =
        metrics::mutual_information_exact(scm::exact_joint(scm), {"A"}, {"X_A"}).value;
    CHECK(mi >= previous - 1e-12);
    previous = mi;
  }
}

TEST_CASE("biased mechanisms violate the no-bias criterion; counterparts restore it") {
  for (BiasMechanism m : {BiasMechanism::FeatureEntanglement, BiasMechanism::PrevalenceDisparity,
                          BiasMechanism::AnnotationDisparity}) {
    const DiscreteScm biased = scm::build_scm(base_config(m, 0.8, 0.5));
    CHECK(exact_i_y_xa_given_xz(biased) > 1e-3);
    const DiscreteScm counterpart = scm::unbiased_counterpart(biased);
    CHECK(counterpart.label == scm::ScmLabel::Test);
    CHECK(graph::graphically_unbiased(counterpart.dag));
    CHECK(exact_i_y_xa_given_xz(counterpart) <= 1e-9);
  }
}

TEST_CASE("unbiased counterpart of an unbiased model changes only the label") {
  const DiscreteScm scm = scm::build_scm(base_config(BiasMechanism::Unbiased, 0.5, 0.0));
  const DiscreteScm counterpart = scm::unbiased_counterpart(scm);
  CHECK(counterpart.label == scm::ScmLabel::Test);
  CHECK(counterpart.dag == scm.dag);
  for (const std::string& id : scm.order) {
    CHECK(counterpart.cpts.at(id).table == scm.cpts.at(id).table);
  }
}

TEST_CASE("unbiased counterpart is idempotent up to the label") {
  const DiscreteScm biased = scm::build_scm(base_config(BiasMechanism::PrevalenceDisparity, 0.6, 0.5));
  const DiscreteScm once = scm::unbiased_counterpart(biased);
  const DiscreteScm twice = scm::unbiased_counterpart(once);
  CHECK(once.dag == twice.dag);
  for (const std::string& id : once.order) {
    const scm::Cpt& a = once.cpts.at(id);
    const scm::Cpt& b = twice.cpts.at(id);
    REQUIRE(a.table.size() == b.table.size());
    for (std::size_t i = 0; i < a.table.size(); ++i) {
      CHECK(a.table[i] == doctest::Approx(b.table[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("prevalence disparity shifts group base rates by the documented amount") {
  ScmConfig config = base_config(BiasMechanism::PrevalenceDisparity, 0.5, 0.8);
  config.base_prevalence = 0.4;
  const DiscreteScm scm = scm::build_scm(config);
  const scm::Cpt& z = scm.cpts.at("Z");
  const double p0 = z.row(0)[1];
  const double p1 = z.row(1)[1];
  // Difference = strength * min(base, 1-base); group 1 on the low side.
  CHECK(p0 - p1 == doctest::Approx(0.8 * 0.4).epsilon(1e-12));
  CHECK(p0 + p1 == doctest::Approx(2 * 0.4).epsilon(1e-12));
}

TEST_CASE("annotation disparity corrupts only group-1 positives") {
  const DiscreteScm scm = scm::build_scm(base_config(BiasMechanism::AnnotationDisparity, 0.5, 0.5));
  const scm::Cpt& y = scm.cpts.at("Y");
  REQUIRE(y.parents == std::vector<std::string>{"A", "Z"});
  CHECK(y.row(y.row_index({0, 1}))[1] == doctest::Approx(1.0));    // group 0 clean
  CHECK(y.row(y.row_index({1, 1}))[1] == doctest::Approx(0.75));   // strength/2 corruption
  CHECK(y.row(y.row_index({0, 0}))[1] == doctest::Approx(0.0));
  CHECK(y.row(y.row_index({1, 0}))[1] == doctest::Approx(0.0));
}
