#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fairsim/common.hpp"
#include "fairsim/dataset.hpp"

// Small classifiers trained from scratch with plain mini-batch gradient
// descent: tanh hidden layers, a linear logit head, binary cross-entropy.
// Three training modes share one code path:
//   * ERM        — unconstrained.
//   * FRL        — adds a kernel two-sample discrepancy between the
//                  representation batches of the two groups, pushing the
//                  representation towards marginal independence of A.
//   * OracleFRL  — ERM restricted by input mask to the disease channels;
//                  the graphical ground-truth fair model.
//
// The group attribute never enters the model as an input feature; it reaches
// FRL training only through the penalty and batch stratification.  Training
// is bit-reproducible given (data, spec, seed) on a single platform.

namespace fairsim::model {

struct ModelSpec {
  std::vector<int> hidden_widths;  // empty = logistic regression
  int representation_dim = 1;      // final hidden width, or 1 for logistic regression
  double learning_rate = 0.1;
  int epochs = 20;
  int batch_size = 64;
  double l2 = 0.0;
  // Soft-threshold shrinkage applied to weights after each step.  Drives
  // weights the loss does not pull on to exactly zero, so representations
  // depend only on inputs that carry training signal.
  double l1 = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const ModelSpec&) const = default;
};

struct FrlPenaltySpec {
  std::vector<double> kernel_bandwidths = {0.5, 1.0, 2.0};
  double penalty_weight = 0.0;  // 0 reduces FRL training to ERM exactly

  void validate() const;
  bool operator==(const FrlPenaltySpec&) const = default;
};

enum class Mode { Erm, Frl, OracleFrl };

const char* to_string(Mode mode);
Mode mode_from_string(const std::string& s);

// Layered parameters; weights[l] has shape (out x in).
struct NetParams {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;

  void scale_add(const NetParams& other, double factor);  // this += factor * other
  void fill(double value);
  bool operator==(const NetParams&) const = default;
};

struct TrainedModel {
  ModelSpec spec;
  Mode mode = Mode::Erm;
  std::vector<std::uint8_t> input_mask;  // per feature; 0 = feature zeroed at input
  NetParams params;

  bool operator==(const TrainedModel&) const = default;
};

TrainedModel train_erm(const data::Dataset& train, const ModelSpec& spec);
TrainedModel train_frl(const data::Dataset& train, const ModelSpec& spec,
                       const FrlPenaltySpec& penalty);
TrainedModel train_oracle_frl(const data::Dataset& train, const ModelSpec& spec);

// Final hidden activations per record (the logit for logistic regression).
Matrix representations(const TrainedModel& model, const data::Dataset& data);
Matrix representations(const TrainedModel& model, const Matrix& features);

struct Predictions {
  std::vector<double> scores;        // sigmoid probabilities
  std::vector<std::uint8_t> labels;  // score > 0.5 (ties -> 0)
};

Predictions predict(const TrainedModel& model, const data::Dataset& data);
Predictions predict(const TrainedModel& model, const Matrix& features);

// Full training objective (mean cross-entropy + l2/2 * ||W||^2 + weighted
// kernel discrepancy) with its analytic gradient, over the given rows.
// Exposed so the gradient can be checked against finite differences.
double objective_and_gradient(const NetParams& params, const std::vector<std::uint8_t>& mask,
                              const Matrix& features, std::span<const std::size_t> rows,
                              std::span<const std::uint8_t> labels,
                              std::span<const std::uint8_t> groups,
                              const FrlPenaltySpec* penalty, double l2, NetParams& grad);

// Deterministic initial parameters for the given feature count.
NetParams initial_params(const ModelSpec& spec, int n_features);

}  // namespace fairsim::model
