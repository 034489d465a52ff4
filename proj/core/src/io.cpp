#include "fairsim/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "io_json.hpp"

namespace fairsim::io {

void require_keys(const ordered_json& object, const std::vector<std::string>& allowed,
                  const std::string& where) {
  if (!object.is_object()) throw InputError(where + ": expected an object");
  for (const auto& [key, value] : object.items()) {
    bool ok = false;
    for (const std::string& k : allowed) {
      if (k == key) {
        ok = true;
        break;
      }
    }
    if (!ok) throw InputError(where + ": unknown key '" + key + "'");
  }
}

ordered_json parse_json(const std::string& text, const std::string& where) {
  try {
    return ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(where + ": " + e.what());
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open file: " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write file: " + path);
  out << content;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return std::string(buf);
}

std::string graph_to_json_text(const graph::CausalDag& dag) {
  ordered_json doc;
  doc["nodes"] = ordered_json::array();
  for (const auto& [id, role] : dag.nodes()) {
    doc["nodes"].push_back({{"id", id}, {"role", graph::to_string(role)}});
  }
  doc["edges"] = ordered_json::array();
  for (const graph::Edge& e : dag.edges()) {
    doc["edges"].push_back(
        {{"from", e.from}, {"to", e.to}, {"fairness", graph::to_string(e.fairness)}});
  }
  return doc.dump(2) + "\n";
}

graph::CausalDag graph_from_json_text(const std::string& text) {
  const ordered_json doc = parse_json(text, "graph");
  require_keys(doc, {"nodes", "edges"}, "graph");
  std::vector<std::pair<graph::NodeId, graph::NodeRole>> nodes;
  for (const ordered_json& node : get_field<ordered_json>(doc, "nodes", "graph")) {
    require_keys(node, {"id", "role"}, "graph node");
    nodes.emplace_back(
        get_field<std::string>(node, "id", "graph node"),
        graph::node_role_from_string(get_field<std::string>(node, "role", "graph node")));
  }
  std::vector<graph::Edge> edges;
  for (const ordered_json& edge : get_field<ordered_json>(doc, "edges", "graph")) {
    require_keys(edge, {"from", "to", "fairness"}, "graph edge");
    graph::Edge e;
    e.from = get_field<std::string>(edge, "from", "graph edge");
    e.to = get_field<std::string>(edge, "to", "graph edge");
    e.fairness = graph::edge_fairness_from_string(
        get_field_or<std::string>(edge, "fairness", "graph edge", "unspecified"));
    edges.push_back(std::move(e));
  }
  return graph::CausalDag(std::move(nodes), std::move(edges));
}

graph::CausalDag load_graph(const std::string& path) {
  return graph_from_json_text(read_text_file(path));
}

void save_graph(const graph::CausalDag& dag, const std::string& path) {
  write_text_file(path, graph_to_json_text(dag));
}

ordered_json scm_config_to_json(const scm::ScmConfig& config) {
  ordered_json doc;
  doc["mechanism"] = graph::to_string(config.mechanism);
  doc["separability_strength"] = config.separability_strength;
  doc["mechanism_strength"] = config.mechanism_strength;
  doc["x_z_channels"] = config.x_z_channels;
  doc["x_a_channels"] = config.x_a_channels;
  doc["base_prevalence"] = config.base_prevalence;
  doc["group_balance"] = config.group_balance;
  doc["seed"] = config.seed;
  doc["entangle_a_to_xz"] = config.entangle_a_to_xz;
  doc["entangle_z_to_xa"] = config.entangle_z_to_xa;
  return doc;
}

scm::ScmConfig scm_config_from_json(const ordered_json& doc) {
  require_keys(doc,
               {"mechanism", "separability_strength", "mechanism_strength", "x_z_channels",
                "x_a_channels", "base_prevalence", "group_balance", "seed", "entangle_a_to_xz",
                "entangle_z_to_xa"},
               "scm config");
  scm::ScmConfig config;
  config.mechanism =
      graph::bias_mechanism_from_string(get_field<std::string>(doc, "mechanism", "scm config"));
  config.separability_strength = get_field<double>(doc, "separability_strength", "scm config");
  config.mechanism_strength = get_field<double>(doc, "mechanism_strength", "scm config");
  config.x_z_channels = get_field_or<int>(doc, "x_z_channels", "scm config", 4);
  config.x_a_channels = get_field_or<int>(doc, "x_a_channels", "scm config", 4);
  config.base_prevalence = get_field_or<double>(doc, "base_prevalence", "scm config", 0.5);
  config.group_balance = get_field_or<double>(doc, "group_balance", "scm config", 0.5);
  config.seed = get_field_or<std::uint64_t>(doc, "seed", "scm config", 0);
  config.entangle_a_to_xz = get_field_or<bool>(doc, "entangle_a_to_xz", "scm config", true);
  config.entangle_z_to_xa = get_field_or<bool>(doc, "entangle_z_to_xa", "scm config", true);
  config.validate();
  return config;
}

std::string scm_config_to_json_text(const scm::ScmConfig& config) {
  return scm_config_to_json(config).dump(2) + "\n";
}

scm::ScmConfig scm_config_from_json_text(const std::string& text) {
  return scm_config_from_json(parse_json(text, "scm config"));
}

void save_dataset(const data::Dataset& dataset, const std::string& dir) {
  std::filesystem::create_directories(dir);

  std::ostringstream csv;
  for (int b = 0; b < dataset.x_z_width(); ++b) csv << "xz" << b << ",";
  for (int b = 0; b < dataset.x_a_width(); ++b) csv << "xa" << b << ",";
  csv << "a,y,z\n";
  for (const data::Record& r : dataset.records()) {
    for (int b = 0; b < dataset.x_z_width(); ++b) csv << ((r.x_z >> b) & 1u) << ",";
    for (int b = 0; b < dataset.x_a_width(); ++b) csv << ((r.x_a >> b) & 1u) << ",";
    csv << static_cast<int>(r.a) << "," << static_cast<int>(r.y) << ","
        << static_cast<int>(r.z) << "\n";
  }
  write_text_file((std::filesystem::path(dir) / "data.csv").string(), csv.str());

  const data::Manifest& m = dataset.manifest();
  ordered_json doc;
  doc["format_version"] = 1;
  doc["x_z_channels"] = dataset.x_z_width();
  doc["x_a_channels"] = dataset.x_a_width();
  doc["n"] = dataset.size();
  doc["config_hash"] = m.config_hash;
  doc["sample_seed"] = m.sample_seed;
  if (m.bias_injection.has_value()) {
    doc["bias_injection"] = {{"target_group", m.bias_injection->target_group},
                             {"flip_rate", m.bias_injection->flip_rate},
                             {"seed", m.bias_injection->seed},
                             {"count_flipped", m.bias_injection->count_flipped}};
  } else {
    doc["bias_injection"] = nullptr;
  }
  if (m.split.has_value()) {
    doc["split"] = {{"train_fraction", m.split->train_fraction},
                    {"seed", m.split->seed},
                    {"side", m.split->side}};
  } else {
    doc["split"] = nullptr;
  }
  write_text_file((std::filesystem::path(dir) / "manifest.json").string(), doc.dump(2) + "\n");
}

data::Dataset load_dataset(const std::string& dir) {
  const std::string manifest_text =
      read_text_file((std::filesystem::path(dir) / "manifest.json").string());
  const ordered_json doc = parse_json(manifest_text, "dataset manifest");
  require_keys(doc,
               {"format_version", "x_z_channels", "x_a_channels", "n", "config_hash",
                "sample_seed", "bias_injection", "split"},
               "dataset manifest");
  if (get_field<int>(doc, "format_version", "dataset manifest") != 1) {
    throw InputError("dataset manifest: unsupported format_version");
  }
  const int xz_width = get_field<int>(doc, "x_z_channels", "dataset manifest");
  const int xa_width = get_field<int>(doc, "x_a_channels", "dataset manifest");
  const std::size_t n = get_field<std::size_t>(doc, "n", "dataset manifest");

  data::Manifest manifest;
  manifest.config_hash = get_field<std::string>(doc, "config_hash", "dataset manifest");
  manifest.sample_seed = get_field<std::uint64_t>(doc, "sample_seed", "dataset manifest");
  if (!doc.at("bias_injection").is_null()) {
    const ordered_json& b = doc.at("bias_injection");
    require_keys(b, {"target_group", "flip_rate", "seed", "count_flipped"}, "bias_injection");
    data::BiasInjection injection;
    injection.target_group = get_field<int>(b, "target_group", "bias_injection");
    injection.flip_rate = get_field<double>(b, "flip_rate", "bias_injection");
    injection.seed = get_field<std::uint64_t>(b, "seed", "bias_injection");
    injection.count_flipped = get_field<std::size_t>(b, "count_flipped", "bias_injection");
    manifest.bias_injection = injection;
  }
  if (!doc.at("split").is_null()) {
    const ordered_json& s = doc.at("split");
    require_keys(s, {"train_fraction", "seed", "side"}, "split");
    data::SplitInfo split;
    split.train_fraction = get_field<double>(s, "train_fraction", "split");
    split.seed = get_field<std::uint64_t>(s, "seed", "split");
    split.side = get_field<std::string>(s, "side", "split");
    manifest.split = split;
  }

  const std::string csv = read_text_file((std::filesystem::path(dir) / "data.csv").string());
  std::istringstream lines(csv);
  std::string line;
  if (!std::getline(lines, line)) throw InputError("dataset: empty data.csv");
  const std::size_t expected_cols = static_cast<std::size_t>(xz_width + xa_width) + 3;
  std::vector<data::Record> records;
  records.reserve(n);
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    std::istringstream cells(line);
    std::string cell;
    std::vector<int> values;
    while (std::getline(cells, cell, ',')) values.push_back(std::stoi(cell));
    if (values.size() != expected_cols) throw InputError("dataset: bad column count in data.csv");
    data::Record r;
    for (int b = 0; b < xz_width; ++b) {
      if (values[static_cast<std::size_t>(b)]) r.x_z |= (1u << b);
    }
    for (int b = 0; b < xa_width; ++b) {
      if (values[static_cast<std::size_t>(xz_width + b)]) r.x_a |= (1u << b);
    }
    r.a = static_cast<std::uint8_t>(values[expected_cols - 3]);
    r.y = static_cast<std::uint8_t>(values[expected_cols - 2]);
    r.z = static_cast<std::uint8_t>(values[expected_cols - 1]);
    records.push_back(r);
  }
  if (records.size() != n) throw InputError("dataset: record count does not match manifest");
  return data::Dataset(xz_width, xa_width, std::move(records), std::move(manifest));
}

ordered_json model_spec_to_json(const model::ModelSpec& spec) {
  ordered_json doc;
  doc["hidden_widths"] = spec.hidden_widths;
  doc["representation_dim"] = spec.representation_dim;
  doc["learning_rate"] = spec.learning_rate;
  doc["epochs"] = spec.epochs;
  doc["batch_size"] = spec.batch_size;
  doc["l2"] = spec.l2;
  doc["l1"] = spec.l1;
  doc["seed"] = spec.seed;
  return doc;
}

model::ModelSpec model_spec_from_json(const ordered_json& doc) {
  require_keys(doc,
               {"hidden_widths", "representation_dim", "learning_rate", "epochs", "batch_size",
                "l2", "l1", "seed"},
               "model spec");
  model::ModelSpec spec;
  spec.hidden_widths = get_field<std::vector<int>>(doc, "hidden_widths", "model spec");
  spec.representation_dim = get_field<int>(doc, "representation_dim", "model spec");
  spec.learning_rate = get_field<double>(doc, "learning_rate", "model spec");
  spec.epochs = get_field<int>(doc, "epochs", "model spec");
  spec.batch_size = get_field<int>(doc, "batch_size", "model spec");
  spec.l2 = get_field_or<double>(doc, "l2", "model spec", 0.0);
  spec.l1 = get_field_or<double>(doc, "l1", "model spec", 0.0);
  spec.seed = get_field_or<std::uint64_t>(doc, "seed", "model spec", 0);
  spec.validate();
  return spec;
}

ordered_json frl_penalty_to_json(const model::FrlPenaltySpec& penalty) {
  ordered_json doc;
  doc["kernel_bandwidths"] = penalty.kernel_bandwidths;
  doc["penalty_weight"] = penalty.penalty_weight;
  return doc;
}

model::FrlPenaltySpec frl_penalty_from_json(const ordered_json& doc) {
  require_keys(doc, {"kernel_bandwidths", "penalty_weight"}, "frl penalty");
  model::FrlPenaltySpec penalty;
  penalty.kernel_bandwidths =
      get_field<std::vector<double>>(doc, "kernel_bandwidths", "frl penalty");
  penalty.penalty_weight = get_field<double>(doc, "penalty_weight", "frl penalty");
  penalty.validate();
  return penalty;
}

void save_model(const model::TrainedModel& model, const std::string& path) {
  ordered_json doc;
  doc["format_version"] = 1;
  doc["mode"] = model::to_string(model.mode);
  doc["spec"] = model_spec_to_json(model.spec);
  doc["input_mask"] = model.input_mask;
  doc["layers"] = ordered_json::array();
  for (std::size_t l = 0; l < model.params.weights.size(); ++l) {
    const Matrix& w = model.params.weights[l];
    ordered_json layer;
    layer["rows"] = w.rows;
    layer["cols"] = w.cols;
    layer["weights"] = w.v;
    layer["bias"] = model.params.biases[l];
    doc["layers"].push_back(std::move(layer));
  }
  write_text_file(path, doc.dump(2) + "\n");
}

model::TrainedModel load_model(const std::string& path) {
  const ordered_json doc = parse_json(read_text_file(path), "model file");
  require_keys(doc, {"format_version", "mode", "spec", "input_mask", "layers"}, "model file");
  if (get_field<int>(doc, "format_version", "model file") != 1) {
    throw InputError("model file: unsupported format_version");
  }
  model::TrainedModel out;
  out.mode = model::mode_from_string(get_field<std::string>(doc, "mode", "model file"));
  out.spec = model_spec_from_json(doc.at("spec"));
  out.input_mask = get_field<std::vector<std::uint8_t>>(doc, "input_mask", "model file");
  for (const ordered_json& layer : doc.at("layers")) {
    require_keys(layer, {"rows", "cols", "weights", "bias"}, "model layer");
    Matrix w(get_field<std::size_t>(layer, "rows", "model layer"),
             get_field<std::size_t>(layer, "cols", "model layer"));
    const std::vector<double> values =
        get_field<std::vector<double>>(layer, "weights", "model layer");
    if (values.size() != w.v.size()) throw InputError("model layer: weight count mismatch");
    w.v = values;
    out.params.weights.push_back(std::move(w));
    out.params.biases.push_back(get_field<std::vector<double>>(layer, "bias", "model layer"));
  }
  if (out.params.weights.empty()) throw InputError("model file: no layers");
  return out;
}

ModelSpecFile model_spec_file_from_json_text(const std::string& text) {
  const ordered_json doc = parse_json(text, "model spec file");
  require_keys(doc, {"model_spec", "frl_penalty"}, "model spec file");
  ModelSpecFile out;
  out.spec = model_spec_from_json(doc.at("model_spec"));
  if (doc.contains("frl_penalty")) {
    out.penalty = frl_penalty_from_json(doc.at("frl_penalty"));
  }
  return out;
}

std::string model_spec_file_to_json_text(const ModelSpecFile& file) {
  ordered_json doc;
  doc["model_spec"] = model_spec_to_json(file.spec);
  doc["frl_penalty"] = frl_penalty_to_json(file.penalty);
  return doc.dump(2) + "\n";
}

ModelSpecFile load_model_spec_file(const std::string& path) {
  return model_spec_file_from_json_text(read_text_file(path));
}

}  // namespace fairsim::io
