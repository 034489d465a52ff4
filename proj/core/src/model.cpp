#include "fairsim/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fairsim/rng.hpp"

namespace fairsim::model {

namespace {

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// Numerically stable -[y ln(sigmoid(t)) + (1-y) ln(1 - sigmoid(t))].
double cross_entropy(double t, double y) {
  return std::max(t, 0.0) - t * y + std::log1p(std::exp(-std::abs(t)));
}

struct LayerDims {
  std::vector<int> in;
  std::vector<int> out;
};

LayerDims layer_dims(const ModelSpec& spec, int n_features) {
  LayerDims dims;
  int in = n_features;
  for (int w : spec.hidden_widths) {
    dims.in.push_back(in);
    dims.out.push_back(w);
    in = w;
  }
  dims.in.push_back(in);
  dims.out.push_back(1);  // logit head
  return dims;
}

void check_params_shape(const NetParams& params, const Matrix& features,
                        const std::vector<std::uint8_t>& mask) {
  if (params.weights.empty()) throw InputError("model: empty parameter set");
  if (features.cols != params.weights.front().cols) {
    throw InputError("model: feature width mismatch");
  }
  if (mask.size() != features.cols) throw InputError("model: input mask width mismatch");
}

// Forward pass over a row subset; activations[0] is the masked input.
struct ForwardState {
  std::vector<Matrix> activations;  // per layer input, size L+1
  std::vector<double> logits;       // per row
};

ForwardState forward(const NetParams& params, const std::vector<std::uint8_t>& mask,
                     const Matrix& features, std::span<const std::size_t> rows) {
  const std::size_t batch = rows.size();
  const std::size_t n_layers = params.weights.size();
  ForwardState state;
  state.activations.resize(n_layers);
  state.logits.assign(batch, 0.0);

  state.activations[0] = Matrix(batch, features.cols);
  for (std::size_t i = 0; i < batch; ++i) {
    const double* src = features.row(rows[i]);
    double* dst = state.activations[0].row(i);
    for (std::size_t k = 0; k < features.cols; ++k) dst[k] = mask[k] ? src[k] : 0.0;
  }

  for (std::size_t l = 0; l < n_layers; ++l) {
    const Matrix& w = params.weights[l];
    const std::vector<double>& b = params.biases[l];
    const Matrix& in = state.activations[l];
    const bool last = l + 1 == n_layers;
    Matrix out(batch, w.rows);
    for (std::size_t i = 0; i < batch; ++i) {
      const double* x = in.row(i);
      double* o = out.row(i);
      for (std::size_t r = 0; r < w.rows; ++r) {
        const double* wr = w.row(r);
        double acc = b[r];
        for (std::size_t c = 0; c < w.cols; ++c) acc += wr[c] * x[c];
        o[r] = last ? acc : std::tanh(acc);
      }
    }
    if (last) {
      for (std::size_t i = 0; i < batch; ++i) state.logits[i] = out.at(i, 0);
    } else {
      state.activations[l + 1] = std::move(out);
    }
  }
  return state;
}

// Adds the gradient of penalty_weight * sum_bw mmd^2_bw(R | group) w.r.t. the
// representation rows into rep_grad, and returns the penalty value.
double mmd_penalty(const Matrix& reps, std::span<const std::uint8_t> groups,
                   std::span<const std::size_t> rows, const FrlPenaltySpec& penalty,
                   Matrix& rep_grad) {
  const std::size_t batch = reps.rows;
  const std::size_t dim = reps.cols;
  std::size_t n0 = 0, n1 = 0;
  for (std::size_t i = 0; i < batch; ++i) {
    (groups[rows[i]] == 0 ? n0 : n1) += 1;
  }
  if (n0 == 0 || n1 == 0) {
    throw InputError("frl penalty: a group is absent from a training batch");
  }
  auto pair_weight = [&](std::size_t i, std::size_t j) {
    const bool gi = groups[rows[i]] == 1;
    const bool gj = groups[rows[j]] == 1;
    if (!gi && !gj) return 1.0 / (static_cast<double>(n0) * static_cast<double>(n0));
    if (gi && gj) return 1.0 / (static_cast<double>(n1) * static_cast<double>(n1));
    return -1.0 / (static_cast<double>(n0) * static_cast<double>(n1));
  };

  double value = 0.0;
  for (double bandwidth : penalty.kernel_bandwidths) {
    const double inv_two_sigma2 = 1.0 / (2.0 * bandwidth * bandwidth);
    for (std::size_t i = 0; i < batch; ++i) {
      for (std::size_t j = 0; j < batch; ++j) {
        const double w = pair_weight(i, j);
        double d2 = 0.0;
        for (std::size_t k = 0; k < dim; ++k) {
          const double d = reps.at(i, k) - reps.at(j, k);
          d2 += d * d;
        }
        const double kij = std::exp(-d2 * inv_two_sigma2);
        value += w * kij;
        if (i == j) continue;
        // d k(r_i, r_j) / d r_i = k * (r_j - r_i) / sigma^2, and the symmetric
        // (j, i) term contributes the same amount to r_i's gradient.
        const double factor =
            penalty.penalty_weight * 4.0 * w * kij * inv_two_sigma2;
        for (std::size_t k = 0; k < dim; ++k) {
          rep_grad.at(i, k) += factor * (reps.at(j, k) - reps.at(i, k));
        }
      }
    }
  }
  return penalty.penalty_weight * value;
}

}  // namespace

void ModelSpec::validate() const {
  for (int w : hidden_widths) {
    if (w < 1) throw InputError("model spec: hidden width must be >= 1");
  }
  const int expected_rep = hidden_widths.empty() ? 1 : hidden_widths.back();
  if (representation_dim != expected_rep) {
    throw InputError("model spec: representation_dim must equal the final hidden width "
                     "(or 1 for logistic regression)");
  }
  if (!(learning_rate > 0.0)) throw InputError("model spec: learning_rate must be positive");
  if (epochs < 1) throw InputError("model spec: epochs must be >= 1");
  if (batch_size < 1) throw InputError("model spec: batch_size must be >= 1");
  if (l2 < 0.0) throw InputError("model spec: l2 must be non-negative");
  if (l1 < 0.0) throw InputError("model spec: l1 must be non-negative");
}

void FrlPenaltySpec::validate() const {
  if (penalty_weight < 0.0) throw InputError("frl penalty: weight must be non-negative");
  if (kernel_bandwidths.empty()) throw InputError("frl penalty: need at least one bandwidth");
  for (double b : kernel_bandwidths) {
    if (!(b > 0.0)) throw InputError("frl penalty: bandwidths must be positive");
  }
}

const char* to_string(Mode mode) {
  switch (mode) {
    case Mode::Erm: return "erm";
    case Mode::Frl: return "frl";
    case Mode::OracleFrl: return "oracle_frl";
  }
  throw InputError("unknown Mode");
}

Mode mode_from_string(const std::string& s) {
  if (s == "erm") return Mode::Erm;
  if (s == "frl") return Mode::Frl;
  if (s == "oracle_frl") return Mode::OracleFrl;
  throw InputError("unknown model mode: " + s);
}

void NetParams::scale_add(const NetParams& other, double factor) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    for (std::size_t i = 0; i < weights[l].v.size(); ++i) {
      weights[l].v[i] += factor * other.weights[l].v[i];
    }
    for (std::size_t i = 0; i < biases[l].size(); ++i) {
      biases[l][i] += factor * other.biases[l][i];
    }
  }
}

void NetParams::fill(double value) {
  for (Matrix& w : weights) std::fill(w.v.begin(), w.v.end(), value);
  for (std::vector<double>& b : biases) std::fill(b.begin(), b.end(), value);
}

NetParams initial_params(const ModelSpec& spec, int n_features) {
  spec.validate();
  if (n_features < 1) throw InputError("model: need at least one input feature");
  const LayerDims dims = layer_dims(spec, n_features);
  rng::SplitMix64 gen(rng::derive(spec.seed, 0x696e6974ull));
  NetParams params;
  for (std::size_t l = 0; l < dims.in.size(); ++l) {
    Matrix w(static_cast<std::size_t>(dims.out[l]), static_cast<std::size_t>(dims.in[l]));
    // Small initial weights: directions the loss never pulls on stay near
    // zero, so representations do not carry leftover input components.
    const double scale = 0.3 / std::sqrt(static_cast<double>(dims.in[l]));
    for (double& x : w.v) {
      const double u1 = 1.0 - gen.next_unit();  // (0, 1]
      const double u2 = gen.next_unit();
      x = scale * std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }
    params.weights.push_back(std::move(w));
    params.biases.emplace_back(static_cast<std::size_t>(dims.out[l]), 0.0);
  }
  return params;
}

double objective_and_gradient(const NetParams& params, const std::vector<std::uint8_t>& mask,
                              const Matrix& features, std::span<const std::size_t> rows,
                              std::span<const std::uint8_t> labels,
                              std::span<const std::uint8_t> groups,
                              const FrlPenaltySpec* penalty, double l2, NetParams& grad) {
  check_params_shape(params, features, mask);
  const std::size_t batch = rows.size();
  if (batch == 0) throw InputError("model: empty batch");
  const std::size_t n_layers = params.weights.size();

  if (grad.weights.size() != n_layers) {
    grad = params;
  }
  grad.fill(0.0);

  ForwardState state = forward(params, mask, features, rows);

  double loss = 0.0;
  std::vector<double> dlogit(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    const double y = static_cast<double>(labels[rows[i]]);
    loss += cross_entropy(state.logits[i], y);
    dlogit[i] = (sigmoid(state.logits[i]) - y) / static_cast<double>(batch);
  }
  loss /= static_cast<double>(batch);

  // Representation-level penalty gradient (the logit itself for logistic
  // regression, the last hidden activation otherwise).
  const bool has_hidden = n_layers > 1;
  Matrix rep_grad;
  if (penalty != nullptr && penalty->penalty_weight > 0.0) {
    if (has_hidden) {
      const Matrix& reps = state.activations[n_layers - 1];
      rep_grad = Matrix(batch, reps.cols);
      loss += mmd_penalty(reps, groups, rows, *penalty, rep_grad);
    } else {
      Matrix reps(batch, 1);
      for (std::size_t i = 0; i < batch; ++i) reps.at(i, 0) = state.logits[i];
      rep_grad = Matrix(batch, 1);
      loss += mmd_penalty(reps, groups, rows, *penalty, rep_grad);
      for (std::size_t i = 0; i < batch; ++i) dlogit[i] += rep_grad.at(i, 0);
    }
  }

  // Backward pass.  delta holds dJ/d(activation) for the current layer input.
  Matrix delta;  // batch x dims of activations[l]
  for (std::size_t l = n_layers; l > 0; --l) {
    const std::size_t li = l - 1;
    const Matrix& w = params.weights[li];
    const Matrix& in = state.activations[li];
    Matrix& gw = grad.weights[li];
    std::vector<double>& gb = grad.biases[li];
    const bool last = li + 1 == n_layers;

    // dJ/d(pre-activation) for this layer, per row.
    Matrix dh(batch, w.rows);
    if (last) {
      for (std::size_t i = 0; i < batch; ++i) dh.at(i, 0) = dlogit[i];
    } else {
      const Matrix& act = state.activations[li + 1];
      for (std::size_t i = 0; i < batch; ++i) {
        for (std::size_t r = 0; r < w.rows; ++r) {
          double da = delta.at(i, r);
          if (penalty != nullptr && penalty->penalty_weight > 0.0 && li + 2 == n_layers) {
            da += rep_grad.at(i, r);  // penalty acts on the representation layer
          }
          const double a = act.at(i, r);
          dh.at(i, r) = da * (1.0 - a * a);
        }
      }
    }

    for (std::size_t i = 0; i < batch; ++i) {
      const double* x = in.row(i);
      for (std::size_t r = 0; r < w.rows; ++r) {
        const double d = dh.at(i, r);
        if (d == 0.0) continue;
        double* gwr = gw.row(r);
        for (std::size_t c = 0; c < w.cols; ++c) gwr[c] += d * x[c];
        gb[r] += d;
      }
    }

    if (li > 0) {
      Matrix next_delta(batch, w.cols);
      for (std::size_t i = 0; i < batch; ++i) {
        for (std::size_t c = 0; c < w.cols; ++c) {
          double acc = 0.0;
          for (std::size_t r = 0; r < w.rows; ++r) acc += w.at(r, c) * dh.at(i, r);
          next_delta.at(i, c) = acc;
        }
      }
      delta = std::move(next_delta);
    }
  }

  if (l2 > 0.0) {
    for (std::size_t l = 0; l < n_layers; ++l) {
      for (std::size_t i = 0; i < params.weights[l].v.size(); ++i) {
        const double w = params.weights[l].v[i];
        loss += 0.5 * l2 * w * w;
        grad.weights[l].v[i] += l2 * w;
      }
    }
  }
  return loss;
}

namespace {

TrainedModel train_internal(const data::Dataset& train, const ModelSpec& spec,
                            const FrlPenaltySpec* penalty, Mode mode) {
  spec.validate();
  if (penalty != nullptr) penalty->validate();
  if (train.empty()) throw InputError("train: empty dataset");

  const Matrix features = train.feature_matrix();
  const std::vector<std::uint8_t> labels = train.labels();
  const std::vector<std::uint8_t> groups = train.groups();
  const int n_features = train.feature_count();

  TrainedModel model;
  model.spec = spec;
  model.mode = mode;
  model.input_mask.assign(static_cast<std::size_t>(n_features), 1);
  if (mode == Mode::OracleFrl) {
    // Disease channels only.
    for (int k = train.x_z_width(); k < n_features; ++k) {
      model.input_mask[static_cast<std::size_t>(k)] = 0;
    }
  }
  model.params = initial_params(spec, n_features);

  const bool use_penalty = penalty != nullptr && penalty->penalty_weight > 0.0;
  std::vector<std::size_t> group_index[2];
  for (std::size_t i = 0; i < train.size(); ++i) {
    group_index[groups[i] == 1 ? 1 : 0].push_back(i);
  }

  const std::size_t n = train.size();
  const std::size_t n_batches =
      (n + static_cast<std::size_t>(spec.batch_size) - 1) / static_cast<std::size_t>(spec.batch_size);
  if (use_penalty &&
      (group_index[0].size() < n_batches || group_index[1].size() < n_batches)) {
    throw InputError("train_frl: a group is too small to appear in every batch");
  }

  NetParams grad;
  std::vector<std::size_t> g0 = group_index[0];
  std::vector<std::size_t> g1 = group_index[1];
  std::vector<std::size_t> batch_rows;
  for (int epoch = 0; epoch < spec.epochs; ++epoch) {
    // Group-stratified batches: each group's shuffled indices are dealt
    // round-robin, so batch composition is identical whether or not a
    // penalty is active.
    rng::SplitMix64 shuffle0(rng::derive(spec.seed, 0x10000ull + static_cast<std::uint64_t>(epoch)));
    rng::SplitMix64 shuffle1(rng::derive(spec.seed, 0x20000ull + static_cast<std::uint64_t>(epoch)));
    rng::shuffle(g0, shuffle0);
    rng::shuffle(g1, shuffle1);
    for (std::size_t b = 0; b < n_batches; ++b) {
      batch_rows.clear();
      for (std::size_t i = b; i < g0.size(); i += n_batches) batch_rows.push_back(g0[i]);
      for (std::size_t i = b; i < g1.size(); i += n_batches) batch_rows.push_back(g1[i]);
      const double loss =
          objective_and_gradient(model.params, model.input_mask, features, batch_rows, labels,
                                 groups, use_penalty ? penalty : nullptr, spec.l2, grad);
      if (!std::isfinite(loss)) {
        throw TrainingDivergenceError(epoch, loss, "training diverged: non-finite loss");
      }
      model.params.scale_add(grad, -spec.learning_rate);
      if (spec.l1 > 0.0) {
        const double threshold = spec.learning_rate * spec.l1;
        for (Matrix& w : model.params.weights) {
          for (double& x : w.v) {
            if (x > threshold) x -= threshold;
            else if (x < -threshold) x += threshold;
            else x = 0.0;
          }
        }
      }
    }
  }
  return model;
}

}  // namespace

TrainedModel train_erm(const data::Dataset& train, const ModelSpec& spec) {
  return train_internal(train, spec, nullptr, Mode::Erm);
}

TrainedModel train_frl(const data::Dataset& train, const ModelSpec& spec,
                       const FrlPenaltySpec& penalty) {
  TrainedModel model = train_internal(train, spec, &penalty, Mode::Frl);
  return model;
}

TrainedModel train_oracle_frl(const data::Dataset& train, const ModelSpec& spec) {
  return train_internal(train, spec, nullptr, Mode::OracleFrl);
}

Matrix representations(const TrainedModel& model, const Matrix& features) {
  check_params_shape(model.params, features, model.input_mask);
  std::vector<std::size_t> rows(features.rows);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  ForwardState state = forward(model.params, model.input_mask, features, rows);
  const std::size_t n_layers = model.params.weights.size();
  if (n_layers == 1) {
    Matrix out(features.rows, 1);
    for (std::size_t i = 0; i < features.rows; ++i) out.at(i, 0) = state.logits[i];
    return out;
  }
  return state.activations[n_layers - 1];
}

Matrix representations(const TrainedModel& model, const data::Dataset& data) {
  return representations(model, data.feature_matrix());
}

Predictions predict(const TrainedModel& model, const Matrix& features) {
  check_params_shape(model.params, features, model.input_mask);
  std::vector<std::size_t> rows(features.rows);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  ForwardState state = forward(model.params, model.input_mask, features, rows);
  Predictions out;
  out.scores.resize(features.rows);
  out.labels.resize(features.rows);
  for (std::size_t i = 0; i < features.rows; ++i) {
    out.scores[i] = sigmoid(state.logits[i]);
    out.labels[i] = out.scores[i] > 0.5 ? 1 : 0;
  }
  return out;
}

Predictions predict(const TrainedModel& model, const data::Dataset& data) {
  return predict(model, data.feature_matrix());
}

}  // namespace fairsim::model
