#include "fairsim/causal_graph.hpp"

#include <algorithm>
#include <deque>
#include <queue>

namespace fairsim::graph {

const char* to_string(NodeRole role) {
  switch (role) {
    case NodeRole::Attribute: return "attribute";
    case NodeRole::Condition: return "condition";
    case NodeRole::Target: return "target";
    case NodeRole::DiseaseFeatures: return "disease_features";
    case NodeRole::SensitiveFeatures: return "sensitive_features";
    case NodeRole::Exogenous: return "exogenous";
  }
  throw InputError("unknown NodeRole");
}

const char* to_string(EdgeFairness fairness) {
  switch (fairness) {
    case EdgeFairness::Fair: return "fair";
    case EdgeFairness::Unfair: return "unfair";
    case EdgeFairness::Unspecified: return "unspecified";
  }
  throw InputError("unknown EdgeFairness");
}

const char* to_string(BiasMechanism mechanism) {
  switch (mechanism) {
    case BiasMechanism::Unbiased: return "unbiased";
    case BiasMechanism::FeatureEntanglement: return "feature_entanglement";
    case BiasMechanism::PrevalenceDisparity: return "prevalence_disparity";
    case BiasMechanism::AnnotationDisparity: return "annotation_disparity";
  }
  throw InputError("unknown BiasMechanism");
}

NodeRole node_role_from_string(const std::string& s) {
  if (s == "attribute") return NodeRole::Attribute;
  if (s == "condition") return NodeRole::Condition;
  if (s == "target") return NodeRole::Target;
  if (s == "disease_features") return NodeRole::DiseaseFeatures;
  if (s == "sensitive_features") return NodeRole::SensitiveFeatures;
  if (s == "exogenous") return NodeRole::Exogenous;
  throw InputError("unknown node role: " + s);
}

EdgeFairness edge_fairness_from_string(const std::string& s) {
  if (s == "fair") return EdgeFairness::Fair;
  if (s == "unfair") return EdgeFairness::Unfair;
  if (s == "unspecified") return EdgeFairness::Unspecified;
  throw InputError("unknown edge fairness: " + s);
}

BiasMechanism bias_mechanism_from_string(const std::string& s) {
  if (s == "unbiased") return BiasMechanism::Unbiased;
  if (s == "feature_entanglement") return BiasMechanism::FeatureEntanglement;
  if (s == "prevalence_disparity") return BiasMechanism::PrevalenceDisparity;
  if (s == "annotation_disparity") return BiasMechanism::AnnotationDisparity;
  throw InputError("unknown bias mechanism: " + s);
}

CausalDag::CausalDag(std::vector<std::pair<NodeId, NodeRole>> nodes, std::vector<Edge> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].first.empty()) throw InputError("empty node id");
    if (!index_.emplace(nodes_[i].first, i).second) {
      throw InputError("duplicate node id: " + nodes_[i].first);
    }
  }
  parents_.resize(nodes_.size());
  children_.resize(nodes_.size());
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const Edge& e : edges_) {
    const std::size_t u = index_of(e.from);
    const std::size_t v = index_of(e.to);
    if (u == v) throw InputError("self-loop on node: " + e.from);
    if (!seen.emplace(u, v).second) {
      throw InputError("duplicate edge: " + e.from + " -> " + e.to);
    }
    children_[u].push_back(v);
    parents_[v].push_back(u);
  }

  // Kahn's algorithm; smallest-index tie-break keeps the order deterministic.
  std::vector<std::size_t> indegree(nodes_.size());
  for (std::size_t v = 0; v < nodes_.size(); ++v) indegree[v] = parents_[v].size();
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t v = 0; v < nodes_.size(); ++v) {
    if (indegree[v] == 0) ready.push(v);
  }
  while (!ready.empty()) {
    const std::size_t v = ready.top();
    ready.pop();
    topo_order_.push_back(nodes_[v].first);
    for (std::size_t c : children_[v]) {
      if (--indegree[c] == 0) ready.push(c);
    }
  }
  if (topo_order_.size() != nodes_.size()) throw InputError("graph contains a cycle");
}

std::size_t CausalDag::index_of(const NodeId& id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) throw InputError("unknown node id: " + id);
  return it->second;
}

bool CausalDag::has_node(const NodeId& id) const { return index_.count(id) != 0; }

NodeRole CausalDag::role(const NodeId& id) const { return nodes_[index_of(id)].second; }

NodeId CausalDag::node_with_role(NodeRole role) const {
  NodeId found;
  for (const auto& [id, r] : nodes_) {
    if (r != role) continue;
    if (!found.empty()) throw InputError(std::string("duplicate node with role ") + to_string(role));
    found = id;
  }
  if (found.empty()) throw InputError(std::string("no node with role ") + to_string(role));
  return found;
}

bool CausalDag::has_edge(const NodeId& from, const NodeId& to) const {
  const std::size_t u = index_of(from);
  const std::size_t v = index_of(to);
  return std::find(children_[u].begin(), children_[u].end(), v) != children_[u].end();
}

EdgeFairness CausalDag::fairness(const NodeId& from, const NodeId& to) const {
  for (const Edge& e : edges_) {
    if (e.from == from && e.to == to) return e.fairness;
  }
  throw InputError("unknown edge: " + from + " -> " + to);
}

std::vector<NodeId> CausalDag::parents(const NodeId& id) const {
  std::vector<NodeId> out;
  for (std::size_t p : parents_[index_of(id)]) out.push_back(nodes_[p].first);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<NodeId> CausalDag::children(const NodeId& id) const {
  std::vector<NodeId> out;
  for (std::size_t c : children_[index_of(id)]) out.push_back(nodes_[c].first);
  std::sort(out.begin(), out.end());
  return out;
}

bool CausalDag::operator==(const CausalDag& other) const {
  auto key = [](const CausalDag& g) {
    std::set<std::pair<NodeId, NodeRole>> ns(g.nodes_.begin(), g.nodes_.end());
    std::set<std::tuple<NodeId, NodeId, EdgeFairness>> es;
    for (const Edge& e : g.edges_) es.emplace(e.from, e.to, e.fairness);
    return std::make_pair(ns, es);
  };
  return key(*this) == key(other);
}

CausalDag mechanism_template(BiasMechanism mechanism) {
  std::vector<std::pair<NodeId, NodeRole>> nodes = {
      {"A", NodeRole::Attribute},
      {"Z", NodeRole::Condition},
      {"Y", NodeRole::Target},
      {"X_Z", NodeRole::DiseaseFeatures},
      {"X_A", NodeRole::SensitiveFeatures},
  };
  std::vector<Edge> edges = {
      {"Z", "X_Z", EdgeFairness::Fair},
      {"A", "X_A", EdgeFairness::Fair},
      {"Z", "Y", EdgeFairness::Fair},
  };
  switch (mechanism) {
    case BiasMechanism::Unbiased:
      break;
    case BiasMechanism::FeatureEntanglement:
      edges.push_back({"A", "X_Z", EdgeFairness::Unfair});
      edges.push_back({"Z", "X_A", EdgeFairness::Unfair});
      break;
    case BiasMechanism::PrevalenceDisparity:
      edges.push_back({"A", "Z", EdgeFairness::Unfair});
      break;
    case BiasMechanism::AnnotationDisparity:
      edges.push_back({"A", "Y", EdgeFairness::Unfair});
      break;
  }
  return CausalDag(std::move(nodes), std::move(edges));
}

bool d_separated(const CausalDag& dag, const std::set<NodeId>& set_x,
                 const std::set<NodeId>& set_y, const std::set<NodeId>& given) {
  auto to_indices = [&](const std::set<NodeId>& ids) {
    std::set<std::size_t> out;
    for (const NodeId& id : ids) out.insert(dag.index_of(id));
    return out;
  };
  const std::set<std::size_t> xs = to_indices(set_x);
  const std::set<std::size_t> ys = to_indices(set_y);
  const std::set<std::size_t> zs = to_indices(given);
  for (std::size_t x : xs) {
    if (ys.count(x)) throw InputError("d_separated: set_x and set_y overlap");
    if (zs.count(x)) throw InputError("d_separated: set_x and given overlap");
  }
  for (std::size_t y : ys) {
    if (zs.count(y)) throw InputError("d_separated: set_y and given overlap");
  }

  const std::size_t n = dag.nodes_.size();

  // Ancestors of the conditioning set, conditioning nodes included: a collider
  // passes the ball iff it lies in this set.
  std::vector<char> anc_given(n, 0);
  {
    std::deque<std::size_t> queue(zs.begin(), zs.end());
    for (std::size_t z : zs) anc_given[z] = 1;
    while (!queue.empty()) {
      const std::size_t v = queue.front();
      queue.pop_front();
      for (std::size_t p : dag.parents_[v]) {
        if (!anc_given[p]) {
          anc_given[p] = 1;
          queue.push_back(p);
        }
      }
    }
  }

  // Bayes-ball walk over (node, entry direction) states.
  enum Dir : int { FromChild = 0, FromParent = 1 };
  std::vector<char> visited(2 * n, 0);
  std::deque<std::pair<std::size_t, int>> queue;
  for (std::size_t x : xs) queue.emplace_back(x, FromChild);
  while (!queue.empty()) {
    const auto [v, dir] = queue.front();
    queue.pop_front();
    if (visited[2 * v + dir]) continue;
    visited[2 * v + dir] = 1;
    const bool conditioned = zs.count(v) != 0;
    if (!conditioned && ys.count(v)) return false;
    if (dir == FromChild) {
      if (!conditioned) {
        for (std::size_t p : dag.parents_[v]) queue.emplace_back(p, FromChild);
        for (std::size_t c : dag.children_[v]) queue.emplace_back(c, FromParent);
      }
    } else {
      if (!conditioned) {
        for (std::size_t c : dag.children_[v]) queue.emplace_back(c, FromParent);
      }
      if (anc_given[v]) {
        // v is a collider on the trail and is activated by the conditioning set.
        for (std::size_t p : dag.parents_[v]) queue.emplace_back(p, FromChild);
      }
    }
  }
  return true;
}

bool graphically_unbiased(const CausalDag& dag) {
  const NodeId y = dag.node_with_role(NodeRole::Target);
  const NodeId xa = dag.node_with_role(NodeRole::SensitiveFeatures);
  const NodeId xz = dag.node_with_role(NodeRole::DiseaseFeatures);
  return d_separated(dag, {y}, {xa}, {xz});
}

CausalDag remove_unfair_pathways(const CausalDag& dag) {
  std::vector<Edge> kept;
  for (const Edge& e : dag.edges()) {
    switch (e.fairness) {
      case EdgeFairness::Unspecified:
        throw InputError("edge " + e.from + " -> " + e.to +
                         " has unspecified fairness; annotate all edges first");
      case EdgeFairness::Unfair:
        break;
      case EdgeFairness::Fair:
        kept.push_back(e);
        break;
    }
  }
  return CausalDag(dag.nodes(), std::move(kept));
}

}  // namespace fairsim::graph
