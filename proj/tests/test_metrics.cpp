#include <doctest.h>

#include <cmath>

#include "fairsim/metrics.hpp"
#include "fairsim/rng.hpp"
#include "fairsim/scm.hpp"
#include "fairsim/stats.hpp"
#include "support/oracles.hpp"

using namespace fairsim;
using metrics::AucResult;
using metrics::BinSpec;

TEST_CASE("auc fixtures") {
  {
    const std::vector<double> scores = {0.9, 0.8, 0.1};
    const std::vector<std::uint8_t> labels = {1, 1, 0};
    CHECK(metrics::auc(scores, labels).auc == 1.0);
  }
  {
    const std::vector<double> scores = {0.4, 0.4, 0.4, 0.4};
    const std::vector<std::uint8_t> labels = {1, 0, 1, 0};
    CHECK(metrics::auc(scores, labels).auc == 0.5);
  }
  {
    const std::vector<double> scores = {0.7, 0.3, 0.5};
    const std::vector<std::uint8_t> labels = {1, 1, 0};
    CHECK(metrics::auc(scores, labels).auc == 0.5);  // one concordant, one discordant pair
  }
  const std::vector<double> s = {0.5, 0.6};
  CHECK_THROWS_AS(metrics::auc(s, std::vector<std::uint8_t>{1, 1}), InputError);
  CHECK_THROWS_AS(metrics::auc(s, std::vector<std::uint8_t>{0, 0}), InputError);
}

TEST_CASE("auc equals the normalised rank-sum statistic on tied data") {
  rng::SplitMix64 gen(0xa0c);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + gen.next_below(199);
    std::vector<double> scores(n);
    std::vector<std::uint8_t> labels(n);
    bool has0 = false, has1 = false;
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = static_cast<double>(gen.next_below(12)) / 4.0;  // ties guaranteed
      labels[i] = static_cast<std::uint8_t>(gen.next_below(2));
      (labels[i] ? has1 : has0) = true;
    }
    if (!has0 || !has1) continue;
    const AucResult result = metrics::auc(scores, labels);
    std::vector<double> pos, neg;
    for (std::size_t i = 0; i < n; ++i) (labels[i] ? pos : neg).push_back(scores[i]);
    const stats::TestResult u =
        stats::mann_whitney_u(pos, neg, stats::Alternative::TwoSided);
    // Identity at half-integer resolution: 2*auc*n_pos*n_neg == 2*U exactly.
    const double scaled =
        result.auc * 2.0 * static_cast<double>(result.n_pos) * static_cast<double>(result.n_neg);
    REQUIRE(std::llround(scaled) == std::llround(2.0 * u.statistic));
    REQUIRE(std::abs(scaled - 2.0 * u.statistic) < 1e-6);
  }
}

TEST_CASE("exact mutual information fixtures") {
  // Two independent fair coins.
  using Nodes = std::vector<std::pair<graph::NodeId, graph::NodeRole>>;
  scm::DiscreteScm independent;
  independent.dag = graph::CausalDag(
      Nodes{{"u", graph::NodeRole::Exogenous}, {"v", graph::NodeRole::Exogenous}}, {});
  independent.order = independent.dag.topological_order();
  independent.cardinality = {{"u", 2}, {"v", 2}};
  scm::Cpt coin;
  coin.card = 2;
  coin.table = {0.5, 0.5};
  independent.cpts.emplace("u", coin);
  independent.cpts.emplace("v", coin);
  const scm::JointTable ind_joint = scm::exact_joint(independent);
  CHECK(metrics::mutual_information_exact(ind_joint, {"u"}, {"v"}).value == 0.0);

  // v copies u exactly: ln 2 nats.
  scm::DiscreteScm copy;
  copy.dag = graph::CausalDag(
      Nodes{{"u", graph::NodeRole::Exogenous}, {"v", graph::NodeRole::Exogenous}},
      {{"u", "v", graph::EdgeFairness::Fair}});
  copy.order = copy.dag.topological_order();
  copy.cardinality = {{"u", 2}, {"v", 2}};
  copy.cpts.emplace("u", coin);
  scm::Cpt identity;
  identity.parents = {"u"};
  identity.parent_cards = {2};
  identity.card = 2;
  identity.table = {1.0, 0.0, 0.0, 1.0};
  copy.cpts.emplace("v", identity);
  const scm::JointTable copy_joint = scm::exact_joint(copy);
  CHECK(metrics::mutual_information_exact(copy_joint, {"u"}, {"v"}).value ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));

  // Symmetry and input checks.
  CHECK(metrics::mutual_information_exact(copy_joint, {"v"}, {"u"}).value ==
        doctest::Approx(metrics::mutual_information_exact(copy_joint, {"u"}, {"v"}).value));
  CHECK_THROWS_AS(metrics::mutual_information_exact(copy_joint, {"u"}, {"u"}), InputError);
  CHECK_THROWS_AS(metrics::mutual_information_exact(copy_joint, {"u"}, {"nope"}), InputError);
}

TEST_CASE("conditional information flags the biased mechanisms") {
  scm::ScmConfig config;
  config.mechanism = graph::BiasMechanism::PrevalenceDisparity;
  config.separability_strength = 0.8;
  config.mechanism_strength = 0.5;
  const scm::JointTable joint = scm::exact_joint(scm::build_scm(config));
  CHECK(metrics::mutual_information_exact(joint, {"Y"}, {"X_A"}, {"X_Z"}).value > 1e-3);
}

TEST_CASE("exact conditional MI is zero exactly when the joint factorises") {
  rng::SplitMix64 gen(0x1f);
  for (int trial = 0; trial < 12; ++trial) {
    const graph::CausalDag dag = oracles::random_dag(gen, 5);
    const scm::DiscreteScm s = oracles::random_scm(dag, gen);
    const scm::JointTable joint = scm::exact_joint(s);
    std::vector<graph::NodeId> ids;
    for (const auto& [id, role] : dag.nodes()) ids.push_back(id);
    if (ids.size() < 3) continue;
    const std::set<graph::NodeId> given = {ids[2]};
    const double mi =
        metrics::mutual_information_exact(joint, {ids[0]}, {ids[1]}, {ids[2]}).value;
    const double deviation = oracles::ci_deviation(joint, ids[0], ids[1], given);
    if (deviation <= 1e-12) {
      CHECK(mi <= 1e-9);
    }
    if (mi <= 1e-12) {
      CHECK(deviation <= 1e-9);
    }
    CHECK(mi >= 0.0);
  }
}

TEST_CASE("plug-in MI behaviour") {
  rng::SplitMix64 gen(0x9b);
  const std::size_t n = 4000;
  Matrix x(n, 1);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x.at(i, 0) = gen.next_unit();
    y[i] = x.at(i, 0);
  }

  // Deterministic binning of x: the estimate recovers the bin entropy.
  std::vector<double> y_binned(n);
  for (std::size_t i = 0; i < n; ++i) y_binned[i] = std::floor(y[i] * 4.0);
  const metrics::MiEstimate dependent =
      metrics::mutual_information_plugin(x, y_binned, BinSpec{8});
  CHECK(dependent.value > 0.9 * std::log(4.0));
  CHECK(dependent.value < 1.1 * std::log(4.0));

  // Independent pairing: below the permutation-null 95th percentile.
  std::vector<double> y_shuffled(y_binned);
  rng::shuffle(y_shuffled, gen);
  const metrics::MiEstimate independent =
      metrics::mutual_information_plugin(x, y_shuffled, BinSpec{8});
  const metrics::PermutationNull null =
      metrics::mi_permutation_null(x, y_shuffled, BinSpec{8}, 200, 5);
  CHECK(independent.value <= std::max(null.q95, 0.01));

  // Duplicating every sample leaves the estimate unchanged.
  Matrix x2(2 * n, 1);
  std::vector<double> y2(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    x2.at(2 * i, 0) = x.at(i, 0);
    x2.at(2 * i + 1, 0) = x.at(i, 0);
    y2[2 * i] = y_binned[i];
    y2[2 * i + 1] = y_binned[i];
  }
  const metrics::MiEstimate doubled = metrics::mutual_information_plugin(x2, y2, BinSpec{8});
  CHECK(doubled.value == doctest::Approx(dependent.value).epsilon(1e-12));

  // Constant column: defined, contributes nothing.
  Matrix constant(n, 1, 1.0);
  CHECK(metrics::mutual_information_plugin(constant, y_binned, BinSpec{8}).value == 0.0);

  CHECK_THROWS_AS(metrics::mutual_information_plugin(x, std::vector<double>{1.0}, BinSpec{8}),
                  InputError);
  CHECK_THROWS_AS(metrics::mutual_information_plugin(x, y, BinSpec{1}), InputError);
}

TEST_CASE("group accuracy on hand-built predictors") {
  // Model reads the first disease channel; labels equal that channel.
  std::vector<data::Record> records;
  rng::SplitMix64 gen(3);
  for (int i = 0; i < 400; ++i) {
    data::Record r;
    r.x_z = static_cast<std::uint32_t>(gen.next_below(16));
    r.x_a = static_cast<std::uint32_t>(gen.next_below(16));
    r.a = static_cast<std::uint8_t>(i % 2);
    r.y = static_cast<std::uint8_t>(r.x_z & 1u);
    r.z = r.y;
    records.push_back(r);
  }
  const data::Dataset d(4, 4, std::move(records), data::Manifest{});

  model::TrainedModel perfect;
  perfect.spec.representation_dim = 1;
  perfect.mode = model::Mode::Erm;
  perfect.input_mask.assign(8, 1);
  perfect.params.weights.push_back(Matrix(1, 8, 0.0));
  perfect.params.weights[0].at(0, 0) = 10.0;
  perfect.params.biases.push_back(std::vector<double>{0.0});
  const metrics::GroupAccuracy acc = metrics::group_accuracy(perfect, d);
  CHECK(acc.overall == 1.0);
  CHECK(*acc.group0 == 1.0);
  CHECK(*acc.group1 == 1.0);

  model::TrainedModel constant_negative = perfect;
  constant_negative.params.weights[0].at(0, 0) = 0.0;
  constant_negative.params.biases[0][0] = -10.0;
  const metrics::GroupAccuracy acc0 = metrics::group_accuracy(constant_negative, d);
  CHECK(*acc0.group0 == doctest::Approx(0.5).epsilon(0.1));
  CHECK(*acc0.group1 == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("separability measurement tracks the strength knob") {
  model::ModelSpec spec;
  spec.hidden_widths = {};
  spec.representation_dim = 1;
  spec.learning_rate = 0.3;
  spec.epochs = 12;
  spec.batch_size = 128;
  spec.seed = 4;

  scm::ScmConfig config;
  config.mechanism = graph::BiasMechanism::Unbiased;
  config.mechanism_strength = 0.0;

  config.separability_strength = 1.0;
  {
    const scm::DiscreteScm scm = scm::build_scm(config);
    const data::Dataset train = scm::sample_dataset(scm, 4000, 71);
    const data::Dataset test = scm::sample_dataset(scm, 10000, 72);
    CHECK(metrics::measure_separability(train, test, spec).auc >= 0.99);
  }
  config.separability_strength = 0.0;
  {
    const scm::DiscreteScm scm = scm::build_scm(config);
    const data::Dataset train = scm::sample_dataset(scm, 4000, 73);
    const data::Dataset test = scm::sample_dataset(scm, 10000, 74);
    const double auc = metrics::measure_separability(train, test, spec).auc;
    CHECK(auc >= 0.45);
    CHECK(auc <= 0.55);
  }
}

TEST_CASE("representation information never exceeds input information") {
  const BinSpec bins;
  for (graph::BiasMechanism m :
       {graph::BiasMechanism::Unbiased, graph::BiasMechanism::PrevalenceDisparity,
        graph::BiasMechanism::AnnotationDisparity}) {
    scm::ScmConfig config;
    config.mechanism = m;
    config.separability_strength = 0.8;
    config.mechanism_strength = m == graph::BiasMechanism::Unbiased ? 0.0 : 0.5;
    const scm::DiscreteScm scm = scm::build_scm(config);
    const data::Dataset train = scm::sample_dataset(scm, 5000, 81);
    model::ModelSpec spec;
    spec.hidden_widths = {8, 2};
    spec.representation_dim = 2;
    spec.learning_rate = 0.15;
    spec.epochs = 12;
    spec.batch_size = 64;
    spec.seed = 5;
    const model::TrainedModel erm = model::train_erm(train, spec);
    const std::vector<std::uint8_t> groups = train.groups();
    const double i_a_r =
        metrics::mutual_information_plugin(model::representations(erm, train), groups, bins).value;
    const double i_a_x =
        metrics::mutual_information_plugin(train.feature_matrix(), groups, bins).value;
    CHECK(i_a_r <= i_a_x + 0.01);
  }
}

TEST_CASE("fairness verdict on an unbiased training distribution is not effective") {
  scm::ScmConfig config;
  config.mechanism = graph::BiasMechanism::Unbiased;
  config.separability_strength = 0.8;
  config.mechanism_strength = 0.0;
  const scm::DiscreteScm scm = scm::build_scm(config);
  const scm::JointTable joint = scm::exact_joint(scm);
  const data::Dataset train = scm::sample_dataset(scm, 5000, 91);
  const data::Dataset test = scm::sample_dataset(scm, 5000, 92);

  model::ModelSpec spec;
  spec.hidden_widths = {8, 2};
  spec.representation_dim = 2;
  spec.learning_rate = 0.15;
  spec.epochs = 16;
  spec.batch_size = 64;
  spec.seed = 6;
  model::FrlPenaltySpec penalty;
  penalty.penalty_weight = 8.0;
  const model::TrainedModel erm = model::train_erm(train, spec);
  const model::TrainedModel frl = model::train_frl(train, spec, penalty);

  metrics::VerdictOptions options;
  options.seed = 17;
  const metrics::FairnessVerdict verdict =
      metrics::fairness_verdict(erm, frl, train, test, &joint, options);
  CHECK_FALSE(verdict.effective);
}
