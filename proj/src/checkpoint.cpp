#include "slimkit/checkpoint.hpp"

#include <fstream>

#include "slimkit/errors.hpp"

namespace slimkit {

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
  return {{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
  Matrix m;
  m.rows = j.at("rows").get<std::size_t>();
  m.cols = j.at("cols").get<std::size_t>();
  m.data = j.at("data").get<std::vector<double>>();
  if (m.data.size() != m.rows * m.cols) {
    throw ConfigError("checkpoint: matrix data length differs from rows*cols");
  }
  return m;
}

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::kReLU:
      return "relu";
    case Activation::kIdentity:
      return "identity";
    case Activation::kSoftmaxOutput:
      return "softmax_output";
  }
  return "relu";
}

Activation activation_from_name(const std::string& name) {
  if (name == "relu") return Activation::kReLU;
  if (name == "identity") return Activation::kIdentity;
  if (name == "softmax_output") return Activation::kSoftmaxOutput;
  throw ConfigError("checkpoint: unknown activation '" + name + "'");
}

}  // namespace

nlohmann::json model_to_json(const Model& model) {
  nlohmann::json layers = nlohmann::json::array();
  for (const DenseLayer& l : model.layers) {
    nlohmann::json jl = {{"weights", matrix_to_json(l.weights)},
                         {"bias", l.bias},
                         {"mask", matrix_to_json(l.mask)},
                         {"activation", activation_name(l.activation)},
                         {"base_frozen", l.base_frozen}};
    if (l.quant_bits) jl["quant_bits"] = *l.quant_bits;
    if (l.quant_simulated) jl["quant_simulated"] = true;
    if (l.shared_clusters) jl["shared_clusters"] = *l.shared_clusters;
    if (l.lowrank) {
      jl["lowrank"] = {{"u", matrix_to_json(l.lowrank->u)},
                       {"v", matrix_to_json(l.lowrank->v)}};
    }
    if (l.adapter) {
      jl["adapter"] = {{"a", matrix_to_json(l.adapter->a)},
                       {"b", matrix_to_json(l.adapter->b)}};
    }
    layers.push_back(std::move(jl));
  }
  return {{"format_version", kCheckpointVersion},
          {"input_dim", model.input_dim},
          {"output_dim", model.output_dim},
          {"layers", std::move(layers)}};
}

Model model_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("format_version")) {
    throw ConfigError("checkpoint: missing format_version");
  }
  if (j["format_version"].get<int>() != kCheckpointVersion) {
    throw ConfigError("checkpoint: unsupported format version");
  }
  Model m;
  m.input_dim = j.at("input_dim").get<std::size_t>();
  m.output_dim = j.at("output_dim").get<std::size_t>();
  for (const nlohmann::json& jl : j.at("layers")) {
    DenseLayer l;
    l.weights = matrix_from_json(jl.at("weights"));
    l.bias = jl.at("bias").get<std::vector<double>>();
    l.mask = matrix_from_json(jl.at("mask"));
    l.activation = activation_from_name(jl.at("activation").get<std::string>());
    l.base_frozen = jl.value("base_frozen", false);
    if (jl.contains("quant_bits")) l.quant_bits = jl["quant_bits"].get<int>();
    l.quant_simulated = jl.value("quant_simulated", false);
    if (jl.contains("shared_clusters")) {
      l.shared_clusters = jl["shared_clusters"].get<std::size_t>();
    }
    if (jl.contains("lowrank")) {
      l.lowrank = LowRankFactors{matrix_from_json(jl["lowrank"].at("u")),
                                 matrix_from_json(jl["lowrank"].at("v"))};
    }
    if (jl.contains("adapter")) {
      l.adapter = AdapterPair{matrix_from_json(jl["adapter"].at("a")),
                              matrix_from_json(jl["adapter"].at("b"))};
    }
    m.layers.push_back(std::move(l));
  }
  m.validate();
  return m;
}

void save_model(const Model& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open checkpoint for writing: " + path);
  out << model_to_json(model).dump(2) << "\n";
}

Model load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open checkpoint: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("checkpoint parse error: " + std::string(e.what()));
  }
  return model_from_json(j);
}

}  // namespace slimkit
