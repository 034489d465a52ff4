#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fairsim/common.hpp"
#include "fairsim/model.hpp"
#include "fairsim/scm.hpp"

// Orchestration of the four experiment templates over seeded configuration
// grids.  Reports are deterministic functions of the configuration: every
// number in a report traces back to derived seeds recorded next to it, and
// rerunning the same configuration reproduces the report byte for byte.

namespace fairsim::experiments {

enum class Template {
  SeparabilityTable,
  DegradationUnderLabelBias,
  FutilityMatrix,
  SeparabilitySweep,
};

const char* to_string(Template t);
Template template_from_string(const std::string& s);

struct ExperimentConfig {
  Template experiment_template = Template::SeparabilityTable;
  std::vector<scm::ScmConfig> scm_grid;
  model::ModelSpec model_spec;
  model::FrlPenaltySpec frl_penalty;
  int n_train = 20000;
  int n_test = 10000;
  std::vector<std::uint64_t> seeds;
  double alpha = 0.05;
  std::string output_dir;
  // Label-bias injection used by the degradation template.
  double flip_rate = 0.25;
  int target_group = 1;

  void validate() const;
};

struct ExperimentReport {
  std::string json_text;

  // Writes report.json under dir.
  void save(const std::string& dir) const;
};

// Subgroup-classifier AUC per grid cell (a sweep over separability), seeds
// aggregated to mean and standard deviation, cells presented in ascending
// mean order.
ExperimentReport run_separability_table(const ExperimentConfig& config);

// Clean-versus-biased training comparison: labels of target-group positives
// are flipped at flip_rate in the training data only, models are evaluated on
// clean test data, and per-group degradation is tested with one-sided
// Mann-Whitney U under a Holm-Bonferroni correction across all cells and
// groups.
ExperimentReport run_degradation(const ExperimentConfig& config);

// 2x2 train/test grid (biased SCM vs its unbiased counterpart) per biased
// mechanism: trains ERM, FRL and oracle-FRL models and collects
// effectiveness/harmlessness verdicts for every quadrant.
ExperimentReport run_futility_matrix(const ExperimentConfig& config);

// Accuracy gap between FRL and ERM on the unbiased counterpart test set,
// swept over separability strengths and aggregated across mechanisms, with a
// Kendall tau test for a monotonic association against measured separability.
ExperimentReport run_separability_sweep(const ExperimentConfig& config);

ExperimentReport run_experiment(const ExperimentConfig& config);

// Configuration file round-trip (strict keys).
ExperimentConfig experiment_config_from_json_text(const std::string& text);
std::string experiment_config_to_json_text(const ExperimentConfig& config);
ExperimentConfig load_experiment_config(const std::string& path);

// Preset configurations used by the acceptance suite and shipped under
// configs/.  The worked-example presets cover one clinically inspired bias
// mechanism each.
ExperimentConfig default_separability_table_config();
ExperimentConfig default_degradation_config();
ExperimentConfig default_futility_config();
ExperimentConfig default_sweep_config();

}  // namespace fairsim::experiments
