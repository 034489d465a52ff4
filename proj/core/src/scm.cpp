#include "fairsim/scm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "fairsim/rng.hpp"

namespace fairsim::scm {

namespace {

constexpr double kRowSumTolerance = 1e-9;
constexpr std::size_t kJointStateCap = std::size_t{1} << 24;

// Flip-rate ladder for the disease channels: heterogeneous rates spread the
// posterior p(z | x_z) over many values instead of a symmetric lattice.
constexpr double kXzFlipLow = 0.10;
constexpr double kXzFlipHigh = 0.35;

double xz_channel_flip(int channel, int channel_count) {
  if (channel_count <= 1) return 0.5 * (kXzFlipLow + kXzFlipHigh);
  const double t = static_cast<double>(channel) / static_cast<double>(channel_count - 1);
  return kXzFlipLow + (kXzFlipHigh - kXzFlipLow) * t;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// Bernoulli(p) product distribution over k channel bits.
std::vector<double> channel_product_row(const std::vector<double>& p_one) {
  const std::size_t card = std::size_t{1} << p_one.size();
  std::vector<double> row(card);
  for (std::size_t v = 0; v < card; ++v) {
    double p = 1.0;
    for (std::size_t c = 0; c < p_one.size(); ++c) {
      p *= ((v >> c) & 1u) ? p_one[c] : 1.0 - p_one[c];
    }
    row[v] = p;
  }
  return row;
}

int topo_position(const std::vector<std::string>& order, const std::string& id) {
  const auto it = std::find(order.begin(), order.end(), id);
  if (it == order.end()) throw InputError("scm: node missing from order: " + id);
  return static_cast<int>(it - order.begin());
}

std::vector<std::string> sorted_parents(const graph::CausalDag& dag,
                                        const std::vector<std::string>& order,
                                        const std::string& id) {
  std::vector<std::string> parents = dag.parents(id);
  std::sort(parents.begin(), parents.end(), [&](const std::string& a, const std::string& b) {
    return topo_position(order, a) < topo_position(order, b);
  });
  return parents;
}

}  // namespace

void ScmConfig::validate() const {
  if (!(separability_strength >= 0.0 && separability_strength <= 1.0)) {
    throw InputError("scm config: separability_strength must be in [0,1]");
  }
  if (!(mechanism_strength >= 0.0 && mechanism_strength <= 1.0)) {
    throw InputError("scm config: mechanism_strength must be in [0,1]");
  }
  if (x_z_channels < 1 || x_z_channels > 16 || x_a_channels < 1 || x_a_channels > 16) {
    throw InputError("scm config: channel counts must be in [1,16]");
  }
  if (!(base_prevalence > 0.0 && base_prevalence < 1.0)) {
    throw InputError("scm config: base_prevalence must be in (0,1)");
  }
  if (!(group_balance > 0.0 && group_balance < 1.0)) {
    throw InputError("scm config: group_balance must be in (0,1)");
  }
  if (mechanism == graph::BiasMechanism::FeatureEntanglement && !entangle_a_to_xz &&
      !entangle_z_to_xa) {
    throw InputError("scm config: feature_entanglement needs at least one cross edge enabled");
  }
}

std::string ScmConfig::canonical_string() const {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "mechanism=%s;sep=%.17g;str=%.17g;xz=%d;xa=%d;prev=%.17g;bal=%.17g;seed=%llu;"
                "axz=%d;zxa=%d",
                graph::to_string(mechanism), separability_strength, mechanism_strength,
                x_z_channels, x_a_channels, base_prevalence, group_balance,
                static_cast<unsigned long long>(seed), entangle_a_to_xz ? 1 : 0,
                entangle_z_to_xa ? 1 : 0);
  return std::string(buf);
}

std::string ScmConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical_string())));
  return std::string(buf);
}

std::size_t Cpt::row_count() const {
  std::size_t rows = 1;
  for (int c : parent_cards) rows *= static_cast<std::size_t>(c);
  return rows;
}

std::size_t Cpt::row_index(const std::vector<int>& parent_values) const {
  if (parent_values.size() != parent_cards.size()) {
    throw InputError("cpt: parent value count mismatch");
  }
  std::size_t idx = 0;
  for (std::size_t i = 0; i < parent_values.size(); ++i) {
    const int v = parent_values[i];
    if (v < 0 || v >= parent_cards[i]) throw InputError("cpt: parent value out of range");
    idx = idx * static_cast<std::size_t>(parent_cards[i]) + static_cast<std::size_t>(v);
  }
  return idx;
}

void DiscreteScm::validate() const {
  for (const std::string& id : order) {
    const auto cit = cpts.find(id);
    if (cit == cpts.end()) throw InputError("scm: missing cpt for node " + id);
    const Cpt& cpt = cit->second;
    if (cpt.card != cardinality.at(id)) throw InputError("scm: cardinality mismatch for " + id);
    if (cpt.table.size() != cpt.row_count() * static_cast<std::size_t>(cpt.card)) {
      throw InputError("scm: cpt table size mismatch for " + id);
    }
    for (std::size_t r = 0; r < cpt.row_count(); ++r) {
      double sum = 0.0;
      for (int v = 0; v < cpt.card; ++v) {
        const double p = cpt.row(r)[v];
        if (!(p >= 0.0 && p <= 1.0 + kRowSumTolerance)) {
          throw InputError("scm: cpt entry outside [0,1] for " + id);
        }
        sum += p;
      }
      if (std::abs(sum - 1.0) > kRowSumTolerance) {
        throw InputError("scm: cpt row does not sum to 1 for " + id);
      }
    }
  }
}

DiscreteScm build_scm(const ScmConfig& config) {
  config.validate();

  graph::CausalDag dag = graph::mechanism_template(config.mechanism);
  if (config.mechanism == graph::BiasMechanism::FeatureEntanglement &&
      (!config.entangle_a_to_xz || !config.entangle_z_to_xa)) {
    std::vector<graph::Edge> edges;
    for (const graph::Edge& e : dag.edges()) {
      if (!config.entangle_a_to_xz && e.from == "A" && e.to == "X_Z") continue;
      if (!config.entangle_z_to_xa && e.from == "Z" && e.to == "X_A") continue;
      edges.push_back(e);
    }
    dag = graph::CausalDag(dag.nodes(), std::move(edges));
  }

  DiscreteScm scm;
  scm.dag = dag;
  scm.order = dag.topological_order();
  scm.label = ScmLabel::Train;
  scm.config = config;
  scm.cardinality = {
      {"A", 2},
      {"Z", 2},
      {"Y", 2},
      {"X_Z", 1 << config.x_z_channels},
      {"X_A", 1 << config.x_a_channels},
  };

  const double strength = config.mechanism_strength;
  const double entangle_weight = 0.5 * strength;
  const double xa_flip = 0.5 * (1.0 - config.separability_strength);
  auto bit_prob = [](int value, double flip) { return value == 1 ? 1.0 - flip : flip; };

  auto make_cpt = [&](const std::string& id) {
    Cpt cpt;
    cpt.parents = sorted_parents(dag, scm.order, id);
    for (const std::string& p : cpt.parents) cpt.parent_cards.push_back(scm.cardinality.at(p));
    cpt.card = scm.cardinality.at(id);
    cpt.table.assign(cpt.row_count() * static_cast<std::size_t>(cpt.card), 0.0);
    return cpt;
  };

  auto parent_value = [](const Cpt& cpt, const std::vector<int>& values, const std::string& id) {
    for (std::size_t i = 0; i < cpt.parents.size(); ++i) {
      if (cpt.parents[i] == id) return values[i];
    }
    throw InputError("scm: parent lookup failed for " + id);
  };

  for (const std::string& id : scm.order) {
    Cpt cpt = make_cpt(id);
    const std::size_t rows = cpt.row_count();
    std::vector<int> pv(cpt.parents.size(), 0);
    for (std::size_t r = 0; r < rows; ++r) {
      // Decode row r into parent values (first parent most significant).
      std::size_t rem = r;
      for (std::size_t i = cpt.parents.size(); i > 0; --i) {
        pv[i - 1] = static_cast<int>(rem % static_cast<std::size_t>(cpt.parent_cards[i - 1]));
        rem /= static_cast<std::size_t>(cpt.parent_cards[i - 1]);
      }

      if (id == "A") {
        cpt.row(r)[0] = 1.0 - config.group_balance;
        cpt.row(r)[1] = config.group_balance;
      } else if (id == "Z") {
        double p_one = config.base_prevalence;
        if (config.mechanism == graph::BiasMechanism::PrevalenceDisparity) {
          const double half_shift = 0.5 * strength *
                                    std::min(config.base_prevalence, 1.0 - config.base_prevalence);
          const int a = parent_value(cpt, pv, "A");
          p_one = config.base_prevalence + (a == 0 ? half_shift : -half_shift);
        }
        cpt.row(r)[0] = 1.0 - p_one;
        cpt.row(r)[1] = p_one;
      } else if (id == "Y") {
        const int z = parent_value(cpt, pv, "Z");
        double p_one = z == 1 ? 1.0 : 0.0;
        if (config.mechanism == graph::BiasMechanism::AnnotationDisparity && z == 1) {
          const int a = parent_value(cpt, pv, "A");
          // Underdiagnosis: group 1 positives recorded negative at rate strength/2.
          if (a == 1) p_one = 1.0 - 0.5 * strength;
        }
        cpt.row(r)[0] = 1.0 - p_one;
        cpt.row(r)[1] = p_one;
      } else if (id == "X_Z") {
        const int z = parent_value(cpt, pv, "Z");
        std::vector<double> p_one(static_cast<std::size_t>(config.x_z_channels));
        for (int c = 0; c < config.x_z_channels; ++c) {
          const double flip = xz_channel_flip(c, config.x_z_channels);
          double p = bit_prob(z, flip);
          if (config.mechanism == graph::BiasMechanism::FeatureEntanglement &&
              config.entangle_a_to_xz) {
            const int a = parent_value(cpt, pv, "A");
            p = (1.0 - entangle_weight) * p + entangle_weight * bit_prob(a, flip);
          }
          p_one[static_cast<std::size_t>(c)] = p;
        }
        const std::vector<double> row = channel_product_row(p_one);
        std::copy(row.begin(), row.end(), cpt.row(r));
      } else if (id == "X_A") {
        const int a = parent_value(cpt, pv, "A");
        std::vector<double> p_one(static_cast<std::size_t>(config.x_a_channels));
        for (int c = 0; c < config.x_a_channels; ++c) {
          double p = bit_prob(a, xa_flip);
          if (config.mechanism == graph::BiasMechanism::FeatureEntanglement &&
              config.entangle_z_to_xa) {
            const int z = parent_value(cpt, pv, "Z");
            p = (1.0 - entangle_weight) * p + entangle_weight * bit_prob(z, xa_flip);
          }
          p_one[static_cast<std::size_t>(c)] = p;
        }
        const std::vector<double> row = channel_product_row(p_one);
        std::copy(row.begin(), row.end(), cpt.row(r));
      } else {
        throw InputError("scm: unexpected node " + id);
      }
    }
    scm.cpts.emplace(id, std::move(cpt));
  }

  scm.validate();
  return scm;
}

int JointTable::card_of(const std::string& variable) const {
  return cards[index_of_variable(variable)];
}

std::size_t JointTable::index_of_variable(const std::string& variable) const {
  const auto it = std::find(variables.begin(), variables.end(), variable);
  if (it == variables.end()) throw InputError("joint table: unknown variable " + variable);
  return static_cast<std::size_t>(it - variables.begin());
}

std::vector<double> JointTable::marginal(const std::string& variable) const {
  const std::size_t vi = index_of_variable(variable);
  std::vector<double> out(static_cast<std::size_t>(cards[vi]), 0.0);
  std::size_t stride = 1;
  for (std::size_t i = variables.size(); i > vi + 1; --i) {
    stride *= static_cast<std::size_t>(cards[i - 1]);
  }
  for (std::size_t idx = 0; idx < probabilities.size(); ++idx) {
    const std::size_t value = (idx / stride) % static_cast<std::size_t>(cards[vi]);
    out[value] += probabilities[idx];
  }
  return out;
}

JointTable exact_joint(const DiscreteScm& scm) {
  scm.validate();
  JointTable joint;
  joint.variables = scm.order;
  std::size_t total = 1;
  for (const std::string& id : scm.order) {
    const std::size_t card = static_cast<std::size_t>(scm.cardinality.at(id));
    if (total > kJointStateCap / card) {
      throw CapacityError("exact_joint: state space exceeds 2^24");
    }
    total *= card;
    joint.cards.push_back(static_cast<int>(card));
  }
  joint.probabilities.assign(total, 0.0);

  const std::size_t n_vars = scm.order.size();
  std::vector<const Cpt*> cpts(n_vars);
  std::vector<std::vector<std::size_t>> parent_positions(n_vars);
  for (std::size_t j = 0; j < n_vars; ++j) {
    cpts[j] = &scm.cpts.at(scm.order[j]);
    for (const std::string& p : cpts[j]->parents) {
      parent_positions[j].push_back(
          static_cast<std::size_t>(topo_position(scm.order, p)));
    }
  }

  std::vector<int> state(n_vars, 0);
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rem = idx;
    for (std::size_t j = n_vars; j > 0; --j) {
      state[j - 1] = static_cast<int>(rem % static_cast<std::size_t>(joint.cards[j - 1]));
      rem /= static_cast<std::size_t>(joint.cards[j - 1]);
    }
    double p = 1.0;
    for (std::size_t j = 0; j < n_vars && p > 0.0; ++j) {
      std::size_t row = 0;
      const Cpt& cpt = *cpts[j];
      for (std::size_t pi = 0; pi < parent_positions[j].size(); ++pi) {
        row = row * static_cast<std::size_t>(cpt.parent_cards[pi]) +
              static_cast<std::size_t>(state[parent_positions[j][pi]]);
      }
      p *= cpt.row(row)[state[j]];
    }
    joint.probabilities[idx] = p;
  }
  return joint;
}

data::Dataset sample_dataset(const DiscreteScm& scm, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw InputError("sample_dataset: n must be >= 1");
  scm.validate();

  const std::size_t n_vars = scm.order.size();
  std::vector<const Cpt*> cpts(n_vars);
  std::vector<std::vector<std::size_t>> parent_positions(n_vars);
  for (std::size_t j = 0; j < n_vars; ++j) {
    cpts[j] = &scm.cpts.at(scm.order[j]);
    for (const std::string& p : cpts[j]->parents) {
      parent_positions[j].push_back(static_cast<std::size_t>(topo_position(scm.order, p)));
    }
  }

  std::vector<data::Record> records(n);
  std::vector<int> state(n_vars, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n_vars; ++j) {
      const Cpt& cpt = *cpts[j];
      std::size_t row = 0;
      for (std::size_t pi = 0; pi < parent_positions[j].size(); ++pi) {
        row = row * static_cast<std::size_t>(cpt.parent_cards[pi]) +
              static_cast<std::size_t>(state[parent_positions[j][pi]]);
      }
      const double u = rng::unit_at(seed, j, i);
      const double* probs = cpt.row(row);
      double acc = 0.0;
      int value = cpt.card - 1;
      for (int v = 0; v < cpt.card; ++v) {
        acc += probs[v];
        if (u < acc) {
          value = v;
          break;
        }
      }
      state[j] = value;
    }
    data::Record& r = records[i];
    for (std::size_t j = 0; j < n_vars; ++j) {
      const std::string& id = scm.order[j];
      if (id == "A") r.a = static_cast<std::uint8_t>(state[j]);
      else if (id == "Z") r.z = static_cast<std::uint8_t>(state[j]);
      else if (id == "Y") r.y = static_cast<std::uint8_t>(state[j]);
      else if (id == "X_Z") r.x_z = static_cast<std::uint32_t>(state[j]);
      else if (id == "X_A") r.x_a = static_cast<std::uint32_t>(state[j]);
    }
  }

  data::Manifest manifest;
  manifest.config_hash = scm.config.hash();
  manifest.sample_seed = seed;
  return data::Dataset(scm.config.x_z_channels, scm.config.x_a_channels, std::move(records),
                       std::move(manifest));
}

DiscreteScm unbiased_counterpart(const DiscreteScm& scm) {
  scm.validate();
  const graph::CausalDag stripped = graph::remove_unfair_pathways(scm.dag);

  DiscreteScm out;
  out.dag = stripped;
  out.order = stripped.topological_order();
  out.cardinality = scm.cardinality;
  out.label = ScmLabel::Test;
  out.config = scm.config;

  // Train-time marginals for deleted parents, from the exact joint.
  const JointTable joint = exact_joint(scm);

  for (const std::string& id : out.order) {
    const Cpt& old_cpt = scm.cpts.at(id);
    Cpt cpt;
    cpt.parents = sorted_parents(stripped, out.order, id);
    for (const std::string& p : cpt.parents) cpt.parent_cards.push_back(out.cardinality.at(p));
    cpt.card = old_cpt.card;
    cpt.table.assign(cpt.row_count() * static_cast<std::size_t>(cpt.card), 0.0);

    std::vector<std::string> deleted;
    for (const std::string& p : old_cpt.parents) {
      if (std::find(cpt.parents.begin(), cpt.parents.end(), p) == cpt.parents.end()) {
        deleted.push_back(p);
      }
    }
    if (deleted.empty()) {
      cpt.table = old_cpt.table;
      out.cpts.emplace(id, std::move(cpt));
      continue;
    }

    std::vector<std::vector<double>> marginals;
    for (const std::string& d : deleted) marginals.push_back(joint.marginal(d));

    // New row = average of old rows over the deleted parents' marginals.
    const std::size_t kept_rows = cpt.row_count();
    std::vector<int> kept_values(cpt.parents.size(), 0);
    for (std::size_t r = 0; r < kept_rows; ++r) {
      std::size_t rem = r;
      for (std::size_t i = cpt.parents.size(); i > 0; --i) {
        kept_values[i - 1] = static_cast<int>(rem % static_cast<std::size_t>(cpt.parent_cards[i - 1]));
        rem /= static_cast<std::size_t>(cpt.parent_cards[i - 1]);
      }
      // Enumerate deleted-parent configurations.
      std::vector<int> deleted_values(deleted.size(), 0);
      bool done = false;
      while (!done) {
        double weight = 1.0;
        for (std::size_t di = 0; di < deleted.size(); ++di) {
          weight *= marginals[di][static_cast<std::size_t>(deleted_values[di])];
        }
        std::vector<int> old_values(old_cpt.parents.size(), 0);
        for (std::size_t pi = 0; pi < old_cpt.parents.size(); ++pi) {
          const std::string& p = old_cpt.parents[pi];
          const auto kit = std::find(cpt.parents.begin(), cpt.parents.end(), p);
          if (kit != cpt.parents.end()) {
            old_values[pi] = kept_values[static_cast<std::size_t>(kit - cpt.parents.begin())];
          } else {
            const auto dit = std::find(deleted.begin(), deleted.end(), p);
            old_values[pi] = deleted_values[static_cast<std::size_t>(dit - deleted.begin())];
          }
        }
        const double* old_row = old_cpt.row(old_cpt.row_index(old_values));
        for (int v = 0; v < cpt.card; ++v) cpt.row(r)[v] += weight * old_row[v];

        done = true;
        for (std::size_t di = deleted.size(); di > 0; --di) {
          const int card = scm.cardinality.at(deleted[di - 1]);
          if (++deleted_values[di - 1] < card) {
            done = false;
            break;
          }
          deleted_values[di - 1] = 0;
        }
      }
    }
    out.cpts.emplace(id, std::move(cpt));
  }

  out.validate();
  return out;
}

}  // namespace fairsim::scm
