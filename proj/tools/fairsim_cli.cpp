// Command-line front end: graph queries, dataset simulation, label-bias
// injection, model training/evaluation, experiment templates and report
// extraction.  Exit codes: 0 success, 2 input error, 3 capacity error,
// 4 training divergence.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fairsim/experiments.hpp"
#include "fairsim/io.hpp"
#include "fairsim/metrics.hpp"
#include "fairsim/rng.hpp"

namespace {

using fairsim::CapacityError;
using fairsim::InputError;
using fairsim::TrainingDivergenceError;
using ordered_json = nlohmann::ordered_json;

std::set<fairsim::graph::NodeId> parse_id_list(const std::string& csv) {
  std::set<fairsim::graph::NodeId> out;
  std::istringstream stream(csv);
  std::string id;
  while (std::getline(stream, id, ',')) {
    if (!id.empty()) out.insert(id);
  }
  return out;
}

int cmd_dsep(const std::string& graph_path, const std::string& x, const std::string& y,
             const std::string& given) {
  const fairsim::graph::CausalDag dag = fairsim::io::load_graph(graph_path);
  const bool separated =
      fairsim::graph::d_separated(dag, parse_id_list(x), parse_id_list(y), parse_id_list(given));
  std::cout << (separated ? "separated" : "connected") << "\n";
  return 0;
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir) {
  const fairsim::experiments::ExperimentConfig config =
      fairsim::experiments::load_experiment_config(config_path);
  for (std::size_t ci = 0; ci < config.scm_grid.size(); ++ci) {
    const fairsim::scm::ScmConfig& cell = config.scm_grid[ci];
    const fairsim::scm::DiscreteScm scm = fairsim::scm::build_scm(cell);
    for (std::size_t si = 0; si < config.seeds.size(); ++si) {
      const std::uint64_t base = fairsim::rng::derive(cell.seed, config.seeds[si]);
      char cell_name[64];
      std::snprintf(cell_name, sizeof(cell_name), "cell_%03zu/seed_%03zu", ci, si);
      const std::filesystem::path dir = std::filesystem::path(out_dir) / cell_name;
      fairsim::io::save_dataset(
          fairsim::scm::sample_dataset(scm, static_cast<std::size_t>(config.n_train),
                                       fairsim::rng::derive(base, 1)),
          (dir / "train").string());
      fairsim::io::save_dataset(
          fairsim::scm::sample_dataset(scm, static_cast<std::size_t>(config.n_test),
                                       fairsim::rng::derive(base, 2)),
          (dir / "test").string());
    }
  }
  std::cout << "wrote datasets for " << config.scm_grid.size() << " cells x "
            << config.seeds.size() << " seeds under " << out_dir << "\n";
  return 0;
}

int cmd_inject(const std::string& data_dir, int group, double rate, std::uint64_t seed,
               const std::string& out_dir) {
  const fairsim::data::Dataset dataset = fairsim::io::load_dataset(data_dir);
  const fairsim::data::Dataset biased = fairsim::data::inject_label_bias(dataset, group, rate, seed);
  fairsim::io::save_dataset(biased, out_dir);
  std::cout << "flipped " << biased.manifest().bias_injection->count_flipped << " labels; wrote "
            << out_dir << "\n";
  return 0;
}

int cmd_train(const std::string& data_dir, const std::string& mode, const std::string& spec_path,
              const std::string& out_path) {
  const fairsim::data::Dataset train = fairsim::io::load_dataset(data_dir);
  const fairsim::io::ModelSpecFile spec_file = fairsim::io::load_model_spec_file(spec_path);
  fairsim::model::TrainedModel model;
  if (mode == "erm") {
    model = fairsim::model::train_erm(train, spec_file.spec);
  } else if (mode == "frl") {
    model = fairsim::model::train_frl(train, spec_file.spec, spec_file.penalty);
  } else if (mode == "oracle") {
    model = fairsim::model::train_oracle_frl(train, spec_file.spec);
  } else {
    throw InputError("train: mode must be erm, frl or oracle");
  }
  fairsim::io::save_model(model, out_path);
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

int cmd_evaluate(const std::string& model_path, const std::string& data_dir,
                 const std::string& out_path) {
  const fairsim::model::TrainedModel model = fairsim::io::load_model(model_path);
  const fairsim::data::Dataset dataset = fairsim::io::load_dataset(data_dir);
  const fairsim::metrics::GroupAccuracy acc = fairsim::metrics::group_accuracy(model, dataset);
  const fairsim::model::Predictions preds = fairsim::model::predict(model, dataset);

  ordered_json doc;
  doc["model_mode"] = fairsim::model::to_string(model.mode);
  doc["n"] = dataset.size();
  doc["accuracy_overall"] = acc.overall;
  doc["accuracy_g0"] = acc.group0.has_value() ? ordered_json(*acc.group0) : ordered_json(nullptr);
  doc["accuracy_g1"] = acc.group1.has_value() ? ordered_json(*acc.group1) : ordered_json(nullptr);
  bool both_classes = false;
  {
    bool c0 = false, c1 = false;
    for (std::uint8_t y : dataset.labels()) (y ? c1 : c0) = true;
    both_classes = c0 && c1;
  }
  if (both_classes) {
    const fairsim::metrics::AucResult auc = fairsim::metrics::auc(preds.scores, dataset.labels());
    doc["auc"] = auc.auc;
    doc["n_pos"] = auc.n_pos;
    doc["n_neg"] = auc.n_neg;
  } else {
    doc["auc"] = nullptr;
  }
  const std::string text = doc.dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << text;
  } else {
    fairsim::io::write_text_file(out_path, text);
    std::cout << "wrote " << out_path << "\n";
  }
  return 0;
}

int cmd_experiment(const std::string& template_name, const std::string& config_path,
                   const std::string& out_dir) {
  fairsim::experiments::ExperimentConfig config =
      fairsim::experiments::load_experiment_config(config_path);
  const fairsim::experiments::Template requested =
      fairsim::experiments::template_from_string(template_name);
  if (requested != config.experiment_template) {
    throw InputError("experiment: template argument does not match config file");
  }
  if (!out_dir.empty()) config.output_dir = out_dir;
  if (config.output_dir.empty()) throw InputError("experiment: no output directory given");
  const fairsim::experiments::ExperimentReport report = fairsim::experiments::run_experiment(config);
  report.save(config.output_dir);
  std::cout << "wrote " << (std::filesystem::path(config.output_dir) / "report.json").string()
            << "\n";
  return 0;
}

// Plot-ready series per report type: x = separability, y = effect, sd columns.
struct SeriesTable {
  std::vector<std::string> columns;
  std::vector<std::vector<ordered_json>> rows;
};

SeriesTable series_from_report(const ordered_json& report) {
  SeriesTable table;
  const std::string kind = report.at("report").get<std::string>();
  if (kind == "separability_table") {
    table.columns = {"separability_strength", "auc_mean", "auc_sd"};
    for (const ordered_json& cell : report.at("cells")) {
      table.rows.push_back(
          {cell.at("separability_strength"), cell.at("auc_mean"), cell.at("auc_sd")});
    }
  } else if (kind == "degradation_under_label_bias") {
    table.columns = {"separability_strength", "separability_auc_mean", "group",
                     "degradation_pp_mean", "degradation_pp_sd", "p_value", "rejected"};
    for (const ordered_json& cell : report.at("cells")) {
      for (const char* g : {"group0", "group1"}) {
        const ordered_json& group = cell.at(g);
        table.rows.push_back({cell.at("separability_strength"),
                              cell.at("separability_auc_mean"), std::string(g),
                              group.at("degradation_pp_mean"), group.at("degradation_pp_sd"),
                              group.at("test").at("p_value"), group.at("rejected")});
      }
    }
  } else if (kind == "separability_sweep") {
    table.columns = {"separability_strength", "separability_auc_mean", "separability_auc_sd",
                     "dacc_pp_overall_mean", "dacc_pp_overall_sd", "dacc_pp_g0_mean",
                     "dacc_pp_g0_sd", "dacc_pp_g1_mean", "dacc_pp_g1_sd"};
    for (const ordered_json& row : report.at("by_strength")) {
      table.rows.push_back({row.at("separability_strength"), row.at("separability_auc_mean"),
                            row.at("separability_auc_sd"), row.at("dacc_pp_overall_mean"),
                            row.at("dacc_pp_overall_sd"), row.at("dacc_pp_g0_mean"),
                            row.at("dacc_pp_g0_sd"), row.at("dacc_pp_g1_mean"),
                            row.at("dacc_pp_g1_sd")});
    }
  } else if (kind == "futility_matrix") {
    table.columns = {"mechanism", "train", "test", "frl_effective", "frl_harmless",
                     "frl_both", "oracle_effective", "oracle_harmless", "oracle_both"};
    for (const ordered_json& cell : report.at("mechanisms")) {
      for (const ordered_json& quadrant : cell.at("quadrants")) {
        table.rows.push_back({cell.at("mechanism"), quadrant.at("train"), quadrant.at("test"),
                              quadrant.at("frl_effective"), quadrant.at("frl_harmless"),
                              quadrant.at("frl_both"), quadrant.at("oracle_effective"),
                              quadrant.at("oracle_harmless"), quadrant.at("oracle_both")});
      }
    }
  } else {
    throw InputError("report: unknown report kind: " + kind);
  }
  return table;
}

int cmd_report(const std::string& in_dir, const std::string& format) {
  const std::string text =
      fairsim::io::read_text_file((std::filesystem::path(in_dir) / "report.json").string());
  ordered_json report;
  try {
    report = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("report: ") + e.what());
  }
  const SeriesTable table = series_from_report(report);
  if (format == "csv") {
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      std::cout << table.columns[c] << (c + 1 < table.columns.size() ? "," : "\n");
    }
    for (const auto& row : table.rows) {
      for (std::size_t c = 0; c < row.size(); ++c) {
        if (row[c].is_string()) {
          std::cout << row[c].get<std::string>();
        } else {
          std::cout << row[c].dump();
        }
        std::cout << (c + 1 < row.size() ? "," : "\n");
      }
    }
  } else if (format == "json") {
    ordered_json doc;
    doc["report"] = report.at("report");
    doc["columns"] = table.columns;
    doc["rows"] = ordered_json::array();
    for (const auto& row : table.rows) {
      ordered_json r = ordered_json::array();
      for (const ordered_json& cell : row) r.push_back(cell);
      doc["rows"].push_back(std::move(r));
    }
    if (report.contains("kendall")) doc["kendall"] = report.at("kendall");
    if (report.contains("pattern")) doc["pattern"] = report.at("pattern");
    std::cout << doc.dump(2) << "\n";
  } else {
    throw InputError("report: format must be csv or json");
  }
  return 0;
}

int cmd_presets(const std::string& out_dir) {
  using fairsim::experiments::experiment_config_to_json_text;
  namespace ex = fairsim::experiments;
  const std::filesystem::path dir(out_dir);
  fairsim::io::write_text_file((dir / "separability_table.json").string(),
                               experiment_config_to_json_text(ex::default_separability_table_config()));
  fairsim::io::write_text_file((dir / "degradation.json").string(),
                               experiment_config_to_json_text(ex::default_degradation_config()));
  fairsim::io::write_text_file((dir / "futility_matrix.json").string(),
                               experiment_config_to_json_text(ex::default_futility_config()));
  fairsim::io::write_text_file((dir / "separability_sweep.json").string(),
                               experiment_config_to_json_text(ex::default_sweep_config()));
  std::cout << "wrote preset configs under " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fairsim: causal dataset-bias simulation and fairness evaluation"};
  app.require_subcommand(1);

  std::string graph_path, x_ids, y_ids, given_ids;
  CLI::App* dsep = app.add_subcommand("dsep", "decide d-separation in a causal graph");
  dsep->add_option("--graph", graph_path, "graph JSON file")->required();
  dsep->add_option("--x", x_ids, "comma-separated node ids")->required();
  dsep->add_option("--y", y_ids, "comma-separated node ids")->required();
  dsep->add_option("--given", given_ids, "comma-separated conditioning ids");

  std::string sim_config, sim_out;
  CLI::App* simulate = app.add_subcommand("simulate", "sample datasets for a config grid");
  simulate->add_option("--config", sim_config, "experiment config JSON")->required();
  simulate->add_option("--out", sim_out, "output directory")->required();

  std::string inj_data, inj_out;
  int inj_group = 1;
  double inj_rate = 0.25;
  std::uint64_t inj_seed = 0;
  CLI::App* inject = app.add_subcommand("inject", "inject underdiagnosis label bias");
  inject->add_option("--data", inj_data, "dataset directory")->required();
  inject->add_option("--group", inj_group, "target group (0 or 1)");
  inject->add_option("--rate", inj_rate, "fraction of positives to flip");
  inject->add_option("--seed", inj_seed, "selection seed");
  inject->add_option("--out", inj_out, "output dataset directory")->required();

  std::string train_data, train_mode, train_spec, train_out;
  CLI::App* train = app.add_subcommand("train", "train a classifier");
  train->add_option("--data", train_data, "dataset directory")->required();
  train->add_option("--mode", train_mode, "erm|frl|oracle")->required();
  train->add_option("--spec", train_spec, "model spec JSON")->required();
  train->add_option("--out", train_out, "model output file")->required();

  std::string eval_model, eval_data, eval_out;
  CLI::App* evaluate = app.add_subcommand("evaluate", "evaluate a model on a dataset");
  evaluate->add_option("--model", eval_model, "model file")->required();
  evaluate->add_option("--data", eval_data, "dataset directory")->required();
  evaluate->add_option("--out", eval_out, "metric output file (stdout when omitted)");

  std::string exp_template, exp_config, exp_out;
  CLI::App* experiment = app.add_subcommand("experiment", "run an experiment template");
  experiment->add_option("template", exp_template,
                         "separability_table|degradation_under_label_bias|futility_matrix|"
                         "separability_sweep")
      ->required();
  experiment->add_option("--config", exp_config, "experiment config JSON")->required();
  experiment->add_option("--out", exp_out, "report output directory");

  std::string rep_in, rep_format = "csv";
  CLI::App* report = app.add_subcommand("report", "extract plot-ready series from a report");
  report->add_option("--in", rep_in, "report directory")->required();
  report->add_option("--format", rep_format, "csv|json");

  std::string presets_out;
  CLI::App* presets = app.add_subcommand("presets", "write the shipped preset configs");
  presets->add_option("--out", presets_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (dsep->parsed()) return cmd_dsep(graph_path, x_ids, y_ids, given_ids);
    if (simulate->parsed()) return cmd_simulate(sim_config, sim_out);
    if (inject->parsed()) return cmd_inject(inj_data, inj_group, inj_rate, inj_seed, inj_out);
    if (train->parsed()) return cmd_train(train_data, train_mode, train_spec, train_out);
    if (evaluate->parsed()) return cmd_evaluate(eval_model, eval_data, eval_out);
    if (experiment->parsed()) return cmd_experiment(exp_template, exp_config, exp_out);
    if (report->parsed()) return cmd_report(rep_in, rep_format);
    if (presets->parsed()) return cmd_presets(presets_out);
  } catch (const TrainingDivergenceError& e) {
    std::cerr << "error: " << e.what() << " (epoch " << e.epoch << ", loss " << e.loss << ")\n";
    return 4;
  } catch (const CapacityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
