#include <doctest.h>

#include "fairsim/causal_graph.hpp"
#include "fairsim/metrics.hpp"
#include "fairsim/rng.hpp"
#include "support/oracles.hpp"

using namespace fairsim;
using graph::BiasMechanism;
using graph::CausalDag;
using graph::EdgeFairness;
using graph::NodeRole;

TEST_CASE("mechanism templates carry the documented edge sets") {
  const CausalDag unbiased = graph::mechanism_template(BiasMechanism::Unbiased);
  CHECK(unbiased.nodes().size() == 5);
  CHECK(unbiased.edges().size() == 3);
  CHECK(unbiased.has_edge("Z", "X_Z"));
  CHECK(unbiased.has_edge("A", "X_A"));
  CHECK(unbiased.has_edge("Z", "Y"));
  for (const graph::Edge& e : unbiased.edges()) CHECK(e.fairness == EdgeFairness::Fair);

  const CausalDag prevalence = graph::mechanism_template(BiasMechanism::PrevalenceDisparity);
  CHECK(prevalence.edges().size() == 4);
  CHECK(prevalence.fairness("A", "Z") == EdgeFairness::Unfair);

  const CausalDag annotation = graph::mechanism_template(BiasMechanism::AnnotationDisparity);
  CHECK(annotation.has_edge("A", "Y"));
  CHECK(annotation.fairness("A", "Y") == EdgeFairness::Unfair);

  const CausalDag entangled = graph::mechanism_template(BiasMechanism::FeatureEntanglement);
  CHECK(entangled.has_edge("A", "X_Z"));
  CHECK(entangled.has_edge("Z", "X_A"));
}

TEST_CASE("constructor rejects malformed graphs") {
  using Nodes = std::vector<std::pair<graph::NodeId, NodeRole>>;
  CHECK_THROWS_AS(CausalDag(Nodes{{"a", NodeRole::Exogenous}, {"a", NodeRole::Exogenous}}, {}),
                  InputError);
  CHECK_THROWS_AS(CausalDag(Nodes{{"a", NodeRole::Exogenous}},
                            {{"a", "a", EdgeFairness::Fair}}),
                  InputError);
  CHECK_THROWS_AS(CausalDag(Nodes{{"a", NodeRole::Exogenous}, {"b", NodeRole::Exogenous}},
                            {{"a", "b", EdgeFairness::Fair}, {"a", "b", EdgeFairness::Fair}}),
                  InputError);
  CHECK_THROWS_AS(CausalDag(Nodes{{"a", NodeRole::Exogenous}, {"b", NodeRole::Exogenous}},
                            {{"a", "b", EdgeFairness::Fair}, {"b", "a", EdgeFairness::Fair}}),
                  InputError);
}

TEST_CASE("d-separation on the templates") {
  const CausalDag unbiased = graph::mechanism_template(BiasMechanism::Unbiased);
  CHECK(graph::d_separated(unbiased, {"Y"}, {"X_A"}, {"X_Z"}));

  const CausalDag prevalence = graph::mechanism_template(BiasMechanism::PrevalenceDisparity);
  CHECK_FALSE(graph::d_separated(prevalence, {"Y"}, {"X_A"}, {"X_Z"}));
  // Conditioning on Z itself blocks the remaining trail.
  CHECK(graph::d_separated(prevalence, {"Y"}, {"X_A"}, {"X_Z", "Z"}));

  CHECK_THROWS_AS(graph::d_separated(unbiased, {"A"}, {"A"}, {}), InputError);
  CHECK_THROWS_AS(graph::d_separated(unbiased, {"A"}, {"nope"}, {}), InputError);
}

TEST_CASE("collider conditioning opens trails") {
  using Nodes = std::vector<std::pair<graph::NodeId, NodeRole>>;
  // a -> c <- b, with d a descendant of the collider.
  const CausalDag dag(Nodes{{"a", NodeRole::Exogenous},
                            {"b", NodeRole::Exogenous},
                            {"c", NodeRole::Exogenous},
                            {"d", NodeRole::Exogenous}},
                      {{"a", "c", EdgeFairness::Fair},
                       {"b", "c", EdgeFairness::Fair},
                       {"c", "d", EdgeFairness::Fair}});
  CHECK(graph::d_separated(dag, {"a"}, {"b"}, {}));
  CHECK_FALSE(graph::d_separated(dag, {"a"}, {"b"}, {"c"}));
  CHECK_FALSE(graph::d_separated(dag, {"a"}, {"b"}, {"d"}));
}

TEST_CASE("graphically_unbiased is true exactly for the unbiased template") {
  for (BiasMechanism m : {BiasMechanism::Unbiased, BiasMechanism::FeatureEntanglement,
                          BiasMechanism::PrevalenceDisparity, BiasMechanism::AnnotationDisparity}) {
    CHECK(graph::graphically_unbiased(graph::mechanism_template(m)) ==
          (m == BiasMechanism::Unbiased));
  }
}

TEST_CASE("remove_unfair_pathways") {
  const CausalDag prevalence = graph::mechanism_template(BiasMechanism::PrevalenceDisparity);
  const CausalDag stripped = graph::remove_unfair_pathways(prevalence);
  CHECK(stripped == graph::mechanism_template(BiasMechanism::Unbiased));

  const CausalDag unbiased = graph::mechanism_template(BiasMechanism::Unbiased);
  CHECK(graph::remove_unfair_pathways(unbiased) == unbiased);

  // Idempotent.
  CHECK(graph::remove_unfair_pathways(stripped) == stripped);

  using Nodes = std::vector<std::pair<graph::NodeId, NodeRole>>;
  const CausalDag unspecified(Nodes{{"a", NodeRole::Exogenous}, {"b", NodeRole::Exogenous}},
                              {{"a", "b", EdgeFairness::Unspecified}});
  CHECK_THROWS_AS(graph::remove_unfair_pathways(unspecified), InputError);
}

TEST_CASE("d-separation matches trail enumeration on random DAGs") {
  rng::SplitMix64 gen(0xd5e9);
  int queries = 0;
  for (int g = 0; g < 60; ++g) {
    const CausalDag dag = oracles::random_dag(gen);
    std::vector<graph::NodeId> ids;
    for (const auto& [id, role] : dag.nodes()) ids.push_back(id);
    const std::size_t n = ids.size();
    for (std::size_t xi = 0; xi < n; ++xi) {
      for (std::size_t yi = 0; yi < n; ++yi) {
        if (xi == yi) continue;
        std::vector<graph::NodeId> rest;
        for (std::size_t k = 0; k < n; ++k) {
          if (k != xi && k != yi) rest.push_back(ids[k]);
        }
        for (std::size_t mask = 0; mask < (std::size_t{1} << rest.size()); ++mask) {
          std::set<graph::NodeId> given;
          for (std::size_t k = 0; k < rest.size(); ++k) {
            if ((mask >> k) & 1u) given.insert(rest[k]);
          }
          const bool fast = graph::d_separated(dag, {ids[xi]}, {ids[yi]}, given);
          const bool slow = oracles::d_separated_by_paths(dag, {ids[xi]}, {ids[yi]}, given);
          REQUIRE(fast == slow);
          ++queries;
        }
      }
    }
  }
  CHECK(queries > 1000);
}

TEST_CASE("d-separation is symmetric in the two query sets") {
  rng::SplitMix64 gen(0x51de);
  for (int g = 0; g < 30; ++g) {
    const CausalDag dag = oracles::random_dag(gen);
    std::vector<graph::NodeId> ids;
    for (const auto& [id, role] : dag.nodes()) ids.push_back(id);
    if (ids.size() < 3) continue;
    const std::set<graph::NodeId> xs = {ids[0]};
    const std::set<graph::NodeId> ys = {ids[1]};
    const std::set<graph::NodeId> given = {ids[2]};
    CHECK(graph::d_separated(dag, xs, ys, given) == graph::d_separated(dag, ys, xs, given));
  }
}

TEST_CASE("graphical separation agrees with exact conditional independence") {
  // Soundness on random parameterisations: separation implies CI in the exact
  // joint; with non-degenerate tables, connection implies dependence.
  rng::SplitMix64 gen(0xfa17);
  int graphs = 0;
  while (graphs < 40) {
    const CausalDag dag = oracles::random_dag(gen);
    const scm::DiscreteScm s = oracles::random_scm(dag, gen);
    const scm::JointTable joint = scm::exact_joint(s);
    std::vector<graph::NodeId> ids;
    for (const auto& [id, role] : dag.nodes()) ids.push_back(id);
    const std::size_t n = ids.size();
    for (std::size_t xi = 0; xi < n; ++xi) {
      for (std::size_t yi = xi + 1; yi < n; ++yi) {
        std::vector<graph::NodeId> rest;
        for (std::size_t k = 0; k < n; ++k) {
          if (k != xi && k != yi) rest.push_back(ids[k]);
        }
        for (std::size_t mask = 0; mask < (std::size_t{1} << rest.size()); ++mask) {
          std::set<graph::NodeId> given;
          for (std::size_t k = 0; k < rest.size(); ++k) {
            if ((mask >> k) & 1u) given.insert(rest[k]);
          }
          const bool separated = graph::d_separated(dag, {ids[xi]}, {ids[yi]}, given);
          const double deviation = oracles::ci_deviation(joint, ids[xi], ids[yi], given);
          if (separated) {
            REQUIRE(deviation <= 1e-9);
          } else {
            REQUIRE(deviation > 1e-9);
          }
        }
      }
    }
    ++graphs;
  }
}
