#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "fairsim/common.hpp"

// Role-tagged causal DAGs for classification settings where the input
// decomposes into disease features X_Z (caused by the underlying condition Z)
// and sensitive features X_A (caused by the group attribute A), with Y the
// recorded label.  The three canonical bias mechanisms are template graphs on
// these five roles; edges carry a fairness annotation so unfair pathways can
// be deleted to form the unbiased counterpart of a model.

namespace fairsim::graph {

using NodeId = std::string;

enum class NodeRole {
  Attribute,          // A: group membership
  Condition,          // Z: unobserved underlying condition
  Target,             // Y: recorded label
  DiseaseFeatures,    // X_Z: input features caused by Z
  SensitiveFeatures,  // X_A: input features caused by A
  Exogenous,
};

enum class EdgeFairness { Fair, Unfair, Unspecified };

enum class BiasMechanism {
  Unbiased,
  FeatureEntanglement,   // cross edges A -> X_Z and Z -> X_A
  PrevalenceDisparity,   // A -> Z: base rates differ across groups
  AnnotationDisparity,   // A -> Y: labelling policy differs across groups
};

const char* to_string(NodeRole role);
const char* to_string(EdgeFairness fairness);
const char* to_string(BiasMechanism mechanism);
NodeRole node_role_from_string(const std::string& s);
EdgeFairness edge_fairness_from_string(const std::string& s);
BiasMechanism bias_mechanism_from_string(const std::string& s);

struct Edge {
  NodeId from;
  NodeId to;
  EdgeFairness fairness = EdgeFairness::Unspecified;
};

// Immutable after construction.  The constructor validates acyclicity, edge
// uniqueness and the absence of self-loops.
class CausalDag {
 public:
  CausalDag() = default;
  CausalDag(std::vector<std::pair<NodeId, NodeRole>> nodes, std::vector<Edge> edges);

  const std::vector<std::pair<NodeId, NodeRole>>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }

  bool has_node(const NodeId& id) const;
  NodeRole role(const NodeId& id) const;
  // Unique node carrying `role`; throws InputError if absent or duplicated.
  NodeId node_with_role(NodeRole role) const;

  bool has_edge(const NodeId& from, const NodeId& to) const;
  EdgeFairness fairness(const NodeId& from, const NodeId& to) const;

  std::vector<NodeId> parents(const NodeId& id) const;
  std::vector<NodeId> children(const NodeId& id) const;

  // Node ids in a deterministic topological order.
  std::vector<NodeId> topological_order() const { return topo_order_; }

  bool operator==(const CausalDag& other) const;

 private:
  std::vector<std::pair<NodeId, NodeRole>> nodes_;
  std::vector<Edge> edges_;
  std::map<NodeId, std::size_t> index_;
  std::vector<std::vector<std::size_t>> parents_;   // by node index
  std::vector<std::vector<std::size_t>> children_;  // by node index
  std::vector<NodeId> topo_order_;

  std::size_t index_of(const NodeId& id) const;
  friend bool d_separated(const CausalDag&, const std::set<NodeId>&, const std::set<NodeId>&,
                          const std::set<NodeId>&);
};

// Canonical five-node template for a bias mechanism.  Base edges Z->X_Z,
// A->X_A, Z->Y are Fair in every template; the mechanism-specific edges are
// Unfair.  FeatureEntanglement carries both cross edges.
CausalDag mechanism_template(BiasMechanism mechanism);

// True iff every path between set_x and set_y is blocked by `given`
// (Bayes-ball reachability).  The three sets must be pairwise disjoint and
// name existing nodes.
bool d_separated(const CausalDag& dag, const std::set<NodeId>& set_x,
                 const std::set<NodeId>& set_y, const std::set<NodeId>& given);

// No-bias criterion on the graph: Y independent of X_A given X_Z.
bool graphically_unbiased(const CausalDag& dag);

// Copy of the graph with all Unfair edges removed.  Every edge must be
// annotated Fair or Unfair; an Unspecified edge is an error so that graphs
// cannot silently skip the ethical annotation step.
CausalDag remove_unfair_pathways(const CausalDag& dag);

}  // namespace fairsim::graph
