#include "fairsim/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <set>

#include "fairsim/dataset.hpp"
#include "fairsim/io.hpp"
#include "fairsim/metrics.hpp"
#include "fairsim/rng.hpp"
#include "fairsim/stats.hpp"
#include "io_json.hpp"

namespace fairsim::experiments {

using io::ordered_json;

namespace {

// Purpose tags for per-cell, per-seed derived seeds.  Recorded here so a
// report can be audited back to every dataset and model it used.
enum SeedTag : std::uint64_t {
  kTrainData = 1,
  kTestData = 2,
  kInjection = 3,
  kModel = 4,
  kSubgroupModel = 7,
  kCounterpartTrain = 11,
  kCounterpartTest = 12,
  kVerdictBase = 0x80,
};

std::uint64_t cell_base_seed(const scm::ScmConfig& cell, std::uint64_t experiment_seed) {
  return rng::derive(cell.seed, experiment_seed);
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

ordered_json test_result_to_json(const stats::TestResult& r, stats::Alternative alternative) {
  ordered_json doc;
  doc["statistic"] = r.statistic;
  doc["p_value"] = r.p_value;
  doc["method"] = stats::to_string(r.method);
  doc["alternative"] = stats::to_string(alternative);
  doc["n"] = r.n;
  return doc;
}

ordered_json mi_to_json(const metrics::MiEstimate& e) {
  ordered_json doc;
  doc["value_nats"] = e.value;
  doc["method"] = e.method == metrics::MiMethod::Exact ? "exact" : "plug_in";
  doc["details"] = e.details;
  return doc;
}

ordered_json verdict_to_json(const metrics::FairnessVerdict& v) {
  ordered_json doc;
  doc["effective"] = v.effective;
  doc["harmless"] = v.harmless;
  doc["i_a_r_erm"] = mi_to_json(v.i_a_r_erm);
  doc["i_a_r_frl"] = mi_to_json(v.i_a_r_frl);
  doc["i_y_r_frl"] = mi_to_json(v.i_y_r_frl);
  doc["i_y_x"] = mi_to_json(v.i_y_x);
  doc["epsilon_erm"] = v.epsilon_erm;
  doc["epsilon_frl"] = v.epsilon_frl;
  doc["delta"] = v.delta;
  return doc;
}

ordered_json config_to_json(const ExperimentConfig& config) {
  ordered_json doc;
  doc["template"] = to_string(config.experiment_template);
  doc["scm_grid"] = ordered_json::array();
  for (const scm::ScmConfig& cell : config.scm_grid) {
    doc["scm_grid"].push_back(io::scm_config_to_json(cell));
  }
  doc["model_spec"] = io::model_spec_to_json(config.model_spec);
  doc["frl_penalty"] = io::frl_penalty_to_json(config.frl_penalty);
  doc["n_train"] = config.n_train;
  doc["n_test"] = config.n_test;
  doc["seeds"] = config.seeds;
  doc["alpha"] = config.alpha;
  doc["output_dir"] = config.output_dir;
  doc["flip_rate"] = config.flip_rate;
  doc["target_group"] = config.target_group;
  return doc;
}

ordered_json report_envelope(const char* kind, const ExperimentConfig& config) {
  ordered_json doc;
  doc["report"] = kind;
  doc["fairsim_version"] = kVersion;
  const ordered_json config_json = config_to_json(config);
  doc["config_hash"] = io::hex64(io::fnv1a64(config_json.dump()));
  doc["config"] = config_json;
  return doc;
}

ExperimentReport finish(ordered_json doc) {
  ExperimentReport report;
  report.json_text = doc.dump(2) + "\n";
  return report;
}

model::ModelSpec seeded_spec(const model::ModelSpec& base, std::uint64_t seed) {
  model::ModelSpec spec = base;
  spec.seed = seed;
  return spec;
}

}  // namespace

const char* to_string(Template t) {
  switch (t) {
    case Template::SeparabilityTable: return "separability_table";
    case Template::DegradationUnderLabelBias: return "degradation_under_label_bias";
    case Template::FutilityMatrix: return "futility_matrix";
    case Template::SeparabilitySweep: return "separability_sweep";
  }
  throw InputError("unknown Template");
}

Template template_from_string(const std::string& s) {
  if (s == "separability_table") return Template::SeparabilityTable;
  if (s == "degradation_under_label_bias") return Template::DegradationUnderLabelBias;
  if (s == "futility_matrix") return Template::FutilityMatrix;
  if (s == "separability_sweep") return Template::SeparabilitySweep;
  throw InputError("unknown experiment template: " + s);
}

void ExperimentConfig::validate() const {
  if (scm_grid.empty()) throw InputError("experiment config: scm_grid must be non-empty");
  for (const scm::ScmConfig& cell : scm_grid) cell.validate();
  model_spec.validate();
  frl_penalty.validate();
  if (n_train < 100 || n_test < 100) {
    throw InputError("experiment config: n_train and n_test must be >= 100");
  }
  if (seeds.empty()) throw InputError("experiment config: seeds must be non-empty");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw InputError("experiment config: seeds must be distinct");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("experiment config: alpha must be in (0,1)");
  if (!(flip_rate >= 0.0 && flip_rate <= 1.0)) {
    throw InputError("experiment config: flip_rate must be in [0,1]");
  }
  if (target_group != 0 && target_group != 1) {
    throw InputError("experiment config: target_group must be 0 or 1");
  }
}

void ExperimentReport::save(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  io::write_text_file((std::filesystem::path(dir) / "report.json").string(), json_text);
}

ExperimentReport run_separability_table(const ExperimentConfig& config) {
  config.validate();
  if (config.experiment_template != Template::SeparabilityTable) {
    throw InputError("run_separability_table: config template mismatch");
  }

  struct CellSummary {
    ordered_json json;
    double mean;
  };
  std::vector<CellSummary> cells;
  for (const scm::ScmConfig& cell_config : config.scm_grid) {
    const scm::DiscreteScm scm = scm::build_scm(cell_config);
    std::vector<double> aucs;
    ordered_json per_seed = ordered_json::array();
    for (std::uint64_t seed : config.seeds) {
      const std::uint64_t base = cell_base_seed(cell_config, seed);
      const data::Dataset train =
          scm::sample_dataset(scm, static_cast<std::size_t>(config.n_train),
                              rng::derive(base, kTrainData));
      const data::Dataset test =
          scm::sample_dataset(scm, static_cast<std::size_t>(config.n_test),
                              rng::derive(base, kTestData));
      const metrics::AucResult auc = metrics::measure_separability(
          train, test, seeded_spec(config.model_spec, rng::derive(base, kSubgroupModel)));
      aucs.push_back(auc.auc);
      per_seed.push_back({{"seed", seed}, {"auc", auc.auc}});
    }
    ordered_json cell;
    cell["scm"] = io::scm_config_to_json(cell_config);
    cell["separability_strength"] = cell_config.separability_strength;
    cell["auc_mean"] = mean_of(aucs);
    cell["auc_sd"] = sd_of(aucs);
    cell["per_seed"] = std::move(per_seed);
    cells.push_back({std::move(cell), mean_of(aucs)});
  }
  std::stable_sort(cells.begin(), cells.end(),
                   [](const CellSummary& a, const CellSummary& b) { return a.mean < b.mean; });

  ordered_json doc = report_envelope("separability_table", config);
  doc["cells"] = ordered_json::array();
  for (CellSummary& c : cells) doc["cells"].push_back(std::move(c.json));
  return finish(std::move(doc));
}

ExperimentReport run_degradation(const ExperimentConfig& config) {
  config.validate();
  if (config.experiment_template != Template::DegradationUnderLabelBias) {
    throw InputError("run_degradation: config template mismatch");
  }

  struct GroupResults {
    std::vector<double> clean_acc, biased_acc, degradation;
  };
  struct CellResults {
    ordered_json per_seed = ordered_json::array();
    GroupResults groups[2];
    std::vector<double> separability;
  };
  std::vector<CellResults> cells(config.scm_grid.size());

  for (std::size_t ci = 0; ci < config.scm_grid.size(); ++ci) {
    const scm::ScmConfig& cell_config = config.scm_grid[ci];
    const scm::DiscreteScm scm = scm::build_scm(cell_config);
    for (std::uint64_t seed : config.seeds) {
      const std::uint64_t base = cell_base_seed(cell_config, seed);
      const data::Dataset train = scm::sample_dataset(
          scm, static_cast<std::size_t>(config.n_train), rng::derive(base, kTrainData));
      const data::Dataset test = scm::sample_dataset(
          scm, static_cast<std::size_t>(config.n_test), rng::derive(base, kTestData));
      const data::Dataset biased_train = inject_label_bias(
          train, config.target_group, config.flip_rate, rng::derive(base, kInjection));

      // Same model seed for the clean/biased pair: identical initialisation
      // and batch composition, so the comparison is paired.
      const model::ModelSpec spec = seeded_spec(config.model_spec, rng::derive(base, kModel));
      const model::TrainedModel clean_model = model::train_erm(train, spec);
      const model::TrainedModel biased_model = model::train_erm(biased_train, spec);
      const metrics::GroupAccuracy acc_clean = metrics::group_accuracy(clean_model, test);
      const metrics::GroupAccuracy acc_biased = metrics::group_accuracy(biased_model, test);
      const metrics::AucResult sep = metrics::measure_separability(
          train, test, seeded_spec(config.model_spec, rng::derive(base, kSubgroupModel)));

      const double acc_c[2] = {acc_clean.group0.value_or(0.0), acc_clean.group1.value_or(0.0)};
      const double acc_b[2] = {acc_biased.group0.value_or(0.0), acc_biased.group1.value_or(0.0)};
      ordered_json row;
      row["seed"] = seed;
      for (int g = 0; g < 2; ++g) {
        cells[ci].groups[g].clean_acc.push_back(acc_c[g]);
        cells[ci].groups[g].biased_acc.push_back(acc_b[g]);
        cells[ci].groups[g].degradation.push_back(100.0 * (acc_c[g] - acc_b[g]));
      }
      cells[ci].separability.push_back(sep.auc);
      row["acc_clean_g0"] = acc_c[0];
      row["acc_clean_g1"] = acc_c[1];
      row["acc_biased_g0"] = acc_b[0];
      row["acc_biased_g1"] = acc_b[1];
      row["degradation_pp_g0"] = 100.0 * (acc_c[0] - acc_b[0]);
      row["degradation_pp_g1"] = 100.0 * (acc_c[1] - acc_b[1]);
      row["separability_auc"] = sep.auc;
      cells[ci].per_seed.push_back(std::move(row));
    }
  }

  // One hypothesis per cell and group: biased-model accuracies stochastically
  // lower than clean-model accuracies.
  std::vector<stats::TestResult> tests;
  std::vector<double> p_values;
  for (const CellResults& cell : cells) {
    for (int g = 0; g < 2; ++g) {
      const stats::TestResult r = stats::mann_whitney_u(
          cell.groups[g].biased_acc, cell.groups[g].clean_acc, stats::Alternative::Less);
      tests.push_back(r);
      p_values.push_back(r.p_value);
    }
  }
  const std::vector<bool> rejected = stats::holm_bonferroni(p_values, config.alpha);

  ordered_json doc = report_envelope("degradation_under_label_bias", config);
  doc["alpha"] = config.alpha;
  doc["correction"] = "holm_bonferroni";
  doc["n_hypotheses"] = p_values.size();
  doc["cells"] = ordered_json::array();
  for (std::size_t ci = 0; ci < cells.size(); ++ci) {
    ordered_json cell;
    cell["scm"] = io::scm_config_to_json(config.scm_grid[ci]);
    cell["separability_strength"] = config.scm_grid[ci].separability_strength;
    cell["separability_auc_mean"] = mean_of(cells[ci].separability);
    cell["separability_auc_sd"] = sd_of(cells[ci].separability);
    for (int g = 0; g < 2; ++g) {
      const std::size_t hi = ci * 2 + static_cast<std::size_t>(g);
      ordered_json group;
      group["degradation_pp_mean"] = mean_of(cells[ci].groups[g].degradation);
      group["degradation_pp_sd"] = sd_of(cells[ci].groups[g].degradation);
      group["test"] = test_result_to_json(tests[hi], stats::Alternative::Less);
      group["rejected"] = static_cast<bool>(rejected[hi]);
      cell[g == 0 ? "group0" : "group1"] = std::move(group);
    }
    cell["per_seed"] = std::move(cells[ci].per_seed);
    doc["cells"].push_back(std::move(cell));
  }
  return finish(std::move(doc));
}

ExperimentReport run_futility_matrix(const ExperimentConfig& config) {
  config.validate();
  if (config.experiment_template != Template::FutilityMatrix) {
    throw InputError("run_futility_matrix: config template mismatch");
  }
  for (const scm::ScmConfig& cell : config.scm_grid) {
    if (cell.mechanism == graph::BiasMechanism::Unbiased) {
      throw InputError("run_futility_matrix: grid cells must use a biased mechanism");
    }
  }

  bool unbiased_train_never_effective = true;
  bool iid_biased_never_harmless = true;
  ordered_json mechanisms = ordered_json::array();
  ordered_json shift_oracle_counts = ordered_json::array();

  for (const scm::ScmConfig& cell_config : config.scm_grid) {
    const scm::DiscreteScm scm_biased = scm::build_scm(cell_config);
    const scm::DiscreteScm scm_unbiased = scm::unbiased_counterpart(scm_biased);
    const scm::JointTable joint_biased = scm::exact_joint(scm_biased);
    const scm::JointTable joint_unbiased = scm::exact_joint(scm_unbiased);

    struct QuadrantAcc {
      ordered_json per_seed = ordered_json::array();
      int frl_effective = 0, frl_harmless = 0, frl_both = 0;
      int oracle_effective = 0, oracle_harmless = 0, oracle_both = 0;
    };
    QuadrantAcc quadrants[2][2];  // [train biased?][test biased?]

    for (std::uint64_t seed : config.seeds) {
      const std::uint64_t base = cell_base_seed(cell_config, seed);
      const data::Dataset train_sets[2] = {
          scm::sample_dataset(scm_unbiased, static_cast<std::size_t>(config.n_train),
                              rng::derive(base, kCounterpartTrain)),
          scm::sample_dataset(scm_biased, static_cast<std::size_t>(config.n_train),
                              rng::derive(base, kTrainData)),
      };
      const data::Dataset test_sets[2] = {
          scm::sample_dataset(scm_unbiased, static_cast<std::size_t>(config.n_test),
                              rng::derive(base, kCounterpartTest)),
          scm::sample_dataset(scm_biased, static_cast<std::size_t>(config.n_test),
                              rng::derive(base, kTestData)),
      };
      const scm::JointTable* joints[2] = {&joint_unbiased, &joint_biased};

      for (int tb = 0; tb < 2; ++tb) {
        const model::ModelSpec spec =
            seeded_spec(config.model_spec, rng::derive(base, kModel + static_cast<std::uint64_t>(tb)));
        const model::TrainedModel erm = model::train_erm(train_sets[tb], spec);
        const model::TrainedModel frl = model::train_frl(train_sets[tb], spec, config.frl_penalty);
        const model::TrainedModel oracle = model::train_oracle_frl(train_sets[tb], spec);
        for (int vb = 0; vb < 2; ++vb) {
          metrics::VerdictOptions options;
          options.seed = rng::derive(base, kVerdictBase + static_cast<std::uint64_t>(tb * 2 + vb));
          const metrics::FairnessVerdict v_frl = metrics::fairness_verdict(
              erm, frl, train_sets[tb], test_sets[vb], joints[vb], options);
          metrics::VerdictOptions oracle_options = options;
          oracle_options.seed = rng::derive(options.seed, 0xacce55);
          const metrics::FairnessVerdict v_oracle = metrics::fairness_verdict(
              erm, oracle, train_sets[tb], test_sets[vb], joints[vb], oracle_options);

          QuadrantAcc& q = quadrants[tb][vb];
          ordered_json row;
          row["seed"] = seed;
          row["frl"] = verdict_to_json(v_frl);
          row["oracle"] = verdict_to_json(v_oracle);
          q.per_seed.push_back(std::move(row));
          q.frl_effective += v_frl.effective ? 1 : 0;
          q.frl_harmless += v_frl.harmless ? 1 : 0;
          q.frl_both += (v_frl.effective && v_frl.harmless) ? 1 : 0;
          q.oracle_effective += v_oracle.effective ? 1 : 0;
          q.oracle_harmless += v_oracle.harmless ? 1 : 0;
          q.oracle_both += (v_oracle.effective && v_oracle.harmless) ? 1 : 0;

          if (tb == 0 && (v_frl.effective || v_oracle.effective)) {
            unbiased_train_never_effective = false;
          }
          if (tb == 1 && vb == 1 && (v_frl.harmless || v_oracle.harmless)) {
            iid_biased_never_harmless = false;
          }
        }
      }
    }

    ordered_json cell;
    cell["scm"] = io::scm_config_to_json(cell_config);
    cell["mechanism"] = graph::to_string(cell_config.mechanism);
    cell["quadrants"] = ordered_json::array();
    const char* side_name[2] = {"unbiased", "biased"};
    for (int tb = 0; tb < 2; ++tb) {
      for (int vb = 0; vb < 2; ++vb) {
        QuadrantAcc& q = quadrants[tb][vb];
        ordered_json quadrant;
        quadrant["train"] = side_name[tb];
        quadrant["test"] = side_name[vb];
        quadrant["frl_effective"] = q.frl_effective;
        quadrant["frl_harmless"] = q.frl_harmless;
        quadrant["frl_both"] = q.frl_both;
        quadrant["oracle_effective"] = q.oracle_effective;
        quadrant["oracle_harmless"] = q.oracle_harmless;
        quadrant["oracle_both"] = q.oracle_both;
        quadrant["per_seed"] = std::move(q.per_seed);
        cell["quadrants"].push_back(std::move(quadrant));
      }
    }
    cell["shift_oracle_both_count"] = quadrants[1][0].oracle_both;
    shift_oracle_counts.push_back({{"mechanism", graph::to_string(cell_config.mechanism)},
                                   {"count", quadrants[1][0].oracle_both},
                                   {"n_seeds", config.seeds.size()}});
    mechanisms.push_back(std::move(cell));
  }

  ordered_json doc = report_envelope("futility_matrix", config);
  doc["mechanisms"] = std::move(mechanisms);
  doc["pattern"] = {{"unbiased_train_never_effective", unbiased_train_never_effective},
                    {"iid_biased_never_harmless", iid_biased_never_harmless},
                    {"shift_oracle_both_counts", std::move(shift_oracle_counts)}};
  return finish(std::move(doc));
}

ExperimentReport run_separability_sweep(const ExperimentConfig& config) {
  config.validate();
  if (config.experiment_template != Template::SeparabilitySweep) {
    throw InputError("run_separability_sweep: config template mismatch");
  }
  // The grid must span at least five separability strengths, each covered by
  // all three biased mechanisms.
  std::map<double, std::set<graph::BiasMechanism>> strengths;
  for (const scm::ScmConfig& cell : config.scm_grid) {
    if (cell.mechanism == graph::BiasMechanism::Unbiased) {
      throw InputError("run_separability_sweep: grid cells must use a biased mechanism");
    }
    strengths[cell.separability_strength].insert(cell.mechanism);
  }
  if (strengths.size() < 5) {
    throw InputError("run_separability_sweep: need at least 5 separability strengths");
  }
  for (const auto& [strength, mechanisms] : strengths) {
    if (mechanisms.size() != 3) {
      throw InputError("run_separability_sweep: every strength needs all 3 biased mechanisms");
    }
  }

  struct StrengthAgg {
    std::vector<double> dacc_overall, dacc_g0, dacc_g1, separability;
  };
  std::map<double, StrengthAgg> by_strength;
  std::map<graph::BiasMechanism, std::vector<double>> by_mechanism;
  ordered_json cells = ordered_json::array();

  for (const scm::ScmConfig& cell_config : config.scm_grid) {
    const scm::DiscreteScm scm_biased = scm::build_scm(cell_config);
    const scm::DiscreteScm scm_unbiased = scm::unbiased_counterpart(scm_biased);
    ordered_json per_seed = ordered_json::array();
    for (std::uint64_t seed : config.seeds) {
      const std::uint64_t base = cell_base_seed(cell_config, seed);
      const data::Dataset train = scm::sample_dataset(
          scm_biased, static_cast<std::size_t>(config.n_train), rng::derive(base, kTrainData));
      const data::Dataset test_biased = scm::sample_dataset(
          scm_biased, static_cast<std::size_t>(config.n_test), rng::derive(base, kTestData));
      const data::Dataset test_unbiased =
          scm::sample_dataset(scm_unbiased, static_cast<std::size_t>(config.n_test),
                              rng::derive(base, kCounterpartTest));

      const model::ModelSpec spec = seeded_spec(config.model_spec, rng::derive(base, kModel));
      const model::TrainedModel erm = model::train_erm(train, spec);
      const model::TrainedModel frl = model::train_frl(train, spec, config.frl_penalty);
      const metrics::GroupAccuracy acc_erm = metrics::group_accuracy(erm, test_unbiased);
      const metrics::GroupAccuracy acc_frl = metrics::group_accuracy(frl, test_unbiased);
      const metrics::AucResult sep = metrics::measure_separability(
          train, test_biased, seeded_spec(config.model_spec, rng::derive(base, kSubgroupModel)));

      const double dacc_overall = 100.0 * (acc_frl.overall - acc_erm.overall);
      const double dacc_g0 = 100.0 * (acc_frl.group0.value_or(0.0) - acc_erm.group0.value_or(0.0));
      const double dacc_g1 = 100.0 * (acc_frl.group1.value_or(0.0) - acc_erm.group1.value_or(0.0));

      StrengthAgg& agg = by_strength[cell_config.separability_strength];
      agg.dacc_overall.push_back(dacc_overall);
      agg.dacc_g0.push_back(dacc_g0);
      agg.dacc_g1.push_back(dacc_g1);
      agg.separability.push_back(sep.auc);
      by_mechanism[cell_config.mechanism].push_back(dacc_overall);

      ordered_json row;
      row["seed"] = seed;
      row["acc_erm_overall"] = acc_erm.overall;
      row["acc_frl_overall"] = acc_frl.overall;
      row["dacc_pp_overall"] = dacc_overall;
      row["dacc_pp_g0"] = dacc_g0;
      row["dacc_pp_g1"] = dacc_g1;
      row["separability_auc"] = sep.auc;
      per_seed.push_back(std::move(row));
    }
    ordered_json cell;
    cell["scm"] = io::scm_config_to_json(cell_config);
    cell["mechanism"] = graph::to_string(cell_config.mechanism);
    cell["separability_strength"] = cell_config.separability_strength;
    cell["per_seed"] = std::move(per_seed);
    cells.push_back(std::move(cell));
  }

  // Aggregate per strength (over mechanisms and seeds), then test for a
  // monotone association between the accuracy gap and measured separability.
  ordered_json strength_rows = ordered_json::array();
  std::vector<double> sep_means, dacc_means;
  std::vector<double> dacc_g0_means, dacc_g1_means;
  for (const auto& [strength, agg] : by_strength) {
    ordered_json row;
    row["separability_strength"] = strength;
    row["separability_auc_mean"] = mean_of(agg.separability);
    row["separability_auc_sd"] = sd_of(agg.separability);
    row["dacc_pp_overall_mean"] = mean_of(agg.dacc_overall);
    row["dacc_pp_overall_sd"] = sd_of(agg.dacc_overall);
    row["dacc_pp_g0_mean"] = mean_of(agg.dacc_g0);
    row["dacc_pp_g0_sd"] = sd_of(agg.dacc_g0);
    row["dacc_pp_g1_mean"] = mean_of(agg.dacc_g1);
    row["dacc_pp_g1_sd"] = sd_of(agg.dacc_g1);
    strength_rows.push_back(std::move(row));
    sep_means.push_back(mean_of(agg.separability));
    dacc_means.push_back(mean_of(agg.dacc_overall));
    dacc_g0_means.push_back(mean_of(agg.dacc_g0));
    dacc_g1_means.push_back(mean_of(agg.dacc_g1));
  }
  const stats::TestResult kendall =
      stats::kendall_tau(sep_means, dacc_means, stats::Alternative::Greater);

  // Mechanism contrast: pairwise Mann-Whitney over pooled accuracy gaps.
  ordered_json mechanism_rows = ordered_json::array();
  std::vector<graph::BiasMechanism> mechs;
  for (const auto& [mech, values] : by_mechanism) {
    mechs.push_back(mech);
    mechanism_rows.push_back({{"mechanism", graph::to_string(mech)},
                              {"dacc_pp_overall_mean", mean_of(values)},
                              {"dacc_pp_overall_sd", sd_of(values)},
                              {"n", values.size()}});
  }
  ordered_json contrast_pairs = ordered_json::array();
  std::vector<double> contrast_p;
  for (std::size_t i = 0; i < mechs.size(); ++i) {
    for (std::size_t j = i + 1; j < mechs.size(); ++j) {
      const stats::TestResult r = stats::mann_whitney_u(
          by_mechanism[mechs[i]], by_mechanism[mechs[j]], stats::Alternative::TwoSided);
      contrast_pairs.push_back({{"a", graph::to_string(mechs[i])},
                                {"b", graph::to_string(mechs[j])},
                                {"test", test_result_to_json(r, stats::Alternative::TwoSided)}});
      contrast_p.push_back(r.p_value);
    }
  }
  const std::vector<bool> contrast_rejected = stats::holm_bonferroni(contrast_p, config.alpha);
  for (std::size_t i = 0; i < contrast_pairs.size(); ++i) {
    contrast_pairs[i]["rejected"] = static_cast<bool>(contrast_rejected[i]);
  }

  ordered_json doc = report_envelope("separability_sweep", config);
  doc["cells"] = std::move(cells);
  doc["by_strength"] = std::move(strength_rows);
  doc["kendall"] = test_result_to_json(kendall, stats::Alternative::Greater);
  doc["by_mechanism"] = std::move(mechanism_rows);
  doc["mechanism_contrast"] = {{"pairs", std::move(contrast_pairs)}, {"alpha", config.alpha}};
  doc["directional"] = {
      {"lowest_strength_dacc_pp_g0_mean", dacc_g0_means.front()},
      {"lowest_strength_dacc_pp_g1_mean", dacc_g1_means.front()},
      {"highest_strength_dacc_pp_g1_mean", dacc_g1_means.back()},
  };
  return finish(std::move(doc));
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
  switch (config.experiment_template) {
    case Template::SeparabilityTable: return run_separability_table(config);
    case Template::DegradationUnderLabelBias: return run_degradation(config);
    case Template::FutilityMatrix: return run_futility_matrix(config);
    case Template::SeparabilitySweep: return run_separability_sweep(config);
  }
  throw InputError("unknown experiment template");
}

ExperimentConfig experiment_config_from_json_text(const std::string& text) {
  const ordered_json doc = io::parse_json(text, "experiment config");
  io::require_keys(doc,
                   {"template", "scm_grid", "model_spec", "frl_penalty", "n_train", "n_test",
                    "seeds", "alpha", "output_dir", "flip_rate", "target_group"},
                   "experiment config");
  ExperimentConfig config;
  config.experiment_template =
      template_from_string(io::get_field<std::string>(doc, "template", "experiment config"));
  for (const ordered_json& cell : io::get_field<ordered_json>(doc, "scm_grid", "experiment config")) {
    config.scm_grid.push_back(io::scm_config_from_json(cell));
  }
  config.model_spec = io::model_spec_from_json(doc.at("model_spec"));
  config.frl_penalty = io::frl_penalty_from_json(doc.at("frl_penalty"));
  config.n_train = io::get_field<int>(doc, "n_train", "experiment config");
  config.n_test = io::get_field<int>(doc, "n_test", "experiment config");
  config.seeds = io::get_field<std::vector<std::uint64_t>>(doc, "seeds", "experiment config");
  config.alpha = io::get_field<double>(doc, "alpha", "experiment config");
  config.output_dir = io::get_field_or<std::string>(doc, "output_dir", "experiment config", "");
  config.flip_rate = io::get_field_or<double>(doc, "flip_rate", "experiment config", 0.25);
  config.target_group = io::get_field_or<int>(doc, "target_group", "experiment config", 1);
  config.validate();
  return config;
}

std::string experiment_config_to_json_text(const ExperimentConfig& config) {
  return config_to_json(config).dump(2) + "\n";
}

ExperimentConfig load_experiment_config(const std::string& path) {
  return experiment_config_from_json_text(io::read_text_file(path));
}

namespace {

model::ModelSpec default_model_spec() {
  model::ModelSpec spec;
  spec.hidden_widths = {8, 2};
  spec.representation_dim = 2;
  spec.learning_rate = 0.15;
  spec.epochs = 24;
  spec.batch_size = 64;
  spec.l2 = 1e-4;
  spec.seed = 0;
  return spec;
}

model::FrlPenaltySpec default_frl_penalty() {
  model::FrlPenaltySpec penalty;
  penalty.kernel_bandwidths = {0.5, 1.0, 2.0};
  penalty.penalty_weight = 8.0;
  return penalty;
}

std::vector<std::uint64_t> default_seeds() { return {1, 2, 3, 4, 5, 6, 7, 8, 9, 10}; }

}  // namespace

ExperimentConfig default_separability_table_config() {
  ExperimentConfig config;
  config.experiment_template = Template::SeparabilityTable;
  for (double strength : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    scm::ScmConfig cell;
    cell.mechanism = graph::BiasMechanism::Unbiased;
    cell.separability_strength = strength;
    cell.mechanism_strength = 0.0;
    config.scm_grid.push_back(cell);
  }
  config.model_spec = default_model_spec();
  config.frl_penalty = default_frl_penalty();
  config.n_train = 4000;
  config.n_test = 10000;
  config.seeds = default_seeds();
  config.alpha = 0.05;
  return config;
}

ExperimentConfig default_degradation_config() {
  ExperimentConfig config;
  config.experiment_template = Template::DegradationUnderLabelBias;
  for (double strength : {0.0, 0.1, 0.2, 0.5, 0.9, 1.0}) {
    scm::ScmConfig cell;
    cell.mechanism = graph::BiasMechanism::Unbiased;
    cell.separability_strength = strength;
    cell.mechanism_strength = 0.0;
    config.scm_grid.push_back(cell);
  }
  config.model_spec = default_model_spec();
  config.frl_penalty = default_frl_penalty();
  config.n_train = 20000;
  config.n_test = 10000;
  config.seeds = default_seeds();
  config.alpha = 0.05;
  config.flip_rate = 0.25;
  config.target_group = 1;
  return config;
}

ExperimentConfig default_futility_config() {
  ExperimentConfig config;
  config.experiment_template = Template::FutilityMatrix;
  {
    scm::ScmConfig cell;
    cell.mechanism = graph::BiasMechanism::FeatureEntanglement;
    cell.separability_strength = 0.9;
    cell.mechanism_strength = 0.5;
    // Sensitive-feature entanglement only, so the disease channels stay clean
    // of group information and the oracle model can be effective.
    cell.entangle_a_to_xz = false;
    config.scm_grid.push_back(cell);
  }
  {
    scm::ScmConfig cell;
    cell.mechanism = graph::BiasMechanism::PrevalenceDisparity;
    cell.separability_strength = 0.9;
    cell.mechanism_strength = 0.35;
    config.scm_grid.push_back(cell);
  }
  {
    scm::ScmConfig cell;
    cell.mechanism = graph::BiasMechanism::AnnotationDisparity;
    cell.separability_strength = 0.9;
    cell.mechanism_strength = 0.5;
    config.scm_grid.push_back(cell);
  }
  config.model_spec = default_model_spec();
  config.frl_penalty = default_frl_penalty();
  config.n_train = 8000;
  config.n_test = 8000;
  config.seeds = default_seeds();
  config.alpha = 0.05;
  return config;
}

ExperimentConfig default_sweep_config() {
  ExperimentConfig config;
  config.experiment_template = Template::SeparabilitySweep;
  for (double strength : {0.1, 0.25, 0.4, 0.55, 0.7, 0.85, 0.97}) {
    for (graph::BiasMechanism mechanism :
         {graph::BiasMechanism::FeatureEntanglement, graph::BiasMechanism::PrevalenceDisparity,
          graph::BiasMechanism::AnnotationDisparity}) {
      scm::ScmConfig cell;
      cell.mechanism = mechanism;
      cell.separability_strength = strength;
      cell.mechanism_strength = 0.5;
      if (mechanism == graph::BiasMechanism::FeatureEntanglement) {
        cell.entangle_a_to_xz = false;
      }
      config.scm_grid.push_back(cell);
    }
  }
  config.model_spec = default_model_spec();
  config.frl_penalty = default_frl_penalty();
  config.n_train = 6000;
  config.n_test = 6000;
  config.seeds = default_seeds();
  config.alpha = 0.05;
  return config;
}

}  // namespace fairsim::experiments
