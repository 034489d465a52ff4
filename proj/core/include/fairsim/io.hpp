#pragma once

#include <string>

#include "fairsim/causal_graph.hpp"
#include "fairsim/dataset.hpp"
#include "fairsim/model.hpp"
#include "fairsim/scm.hpp"

// File formats.  Structured documents are JSON with a fixed key order;
// unknown keys are input errors so config typos cannot pass silently.
// Datasets are a columnar text file (data.csv) plus a manifest sidecar
// (manifest.json) in one directory.

namespace fairsim::io {

// --- generic helpers ---
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t value);

// --- causal graphs ---
// Document shape: {"nodes": [{"id", "role"}], "edges": [{"from", "to", "fairness"}]}
graph::CausalDag load_graph(const std::string& path);
void save_graph(const graph::CausalDag& dag, const std::string& path);
graph::CausalDag graph_from_json_text(const std::string& text);
std::string graph_to_json_text(const graph::CausalDag& dag);

// --- scm configs ---
scm::ScmConfig scm_config_from_json_text(const std::string& text);
std::string scm_config_to_json_text(const scm::ScmConfig& config);

// --- datasets ---
void save_dataset(const data::Dataset& dataset, const std::string& dir);
data::Dataset load_dataset(const std::string& dir);

// --- models ---
void save_model(const model::TrainedModel& model, const std::string& path);
model::TrainedModel load_model(const std::string& path);

// --- model spec files (spec + optional frl penalty) ---
struct ModelSpecFile {
  model::ModelSpec spec;
  model::FrlPenaltySpec penalty;
};
ModelSpecFile model_spec_file_from_json_text(const std::string& text);
std::string model_spec_file_to_json_text(const ModelSpecFile& file);
ModelSpecFile load_model_spec_file(const std::string& path);

}  // namespace fairsim::io
