#include "pci/model_config.hpp"

namespace pci {

RnnType parse_rnn_type(const std::string& text) {
  if (text == "lstm") return RnnType::lstm;
  if (text == "gru") return RnnType::gru;
  if (text == "bdlstm") return RnnType::bdlstm;
  if (text == "bdgru") return RnnType::bdgru;
  throw Error("unknown rnn type '" + text + "' (expected lstm, gru, bdlstm, bdgru)");
}

const char* to_string(RnnType type) {
  switch (type) {
    case RnnType::lstm: return "lstm";
    case RnnType::gru: return "gru";
    case RnnType::bdlstm: return "bdlstm";
    case RnnType::bdgru: return "bdgru";
  }
  return "?";
}

CellKind cell_kind(RnnType type) {
  return type == RnnType::lstm || type == RnnType::bdlstm ? CellKind::lstm : CellKind::gru;
}

bool is_bidirectional(RnnType type) { return type == RnnType::bdlstm || type == RnnType::bdgru; }

void ModelConfig::validate() const {
  if (hidden_dim < 1) throw Error("hidden dimension must be at least 1");
  if (num_layers != 1) throw Error("only single-layer recurrent modules are supported");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error("dropout must lie in [0, 1)");
  if (feature_dim < 1) throw Error("feature dimension must be at least 1");
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"rnn_type", to_string(c.rnn_type)},
          {"hidden_dim", c.hidden_dim},
          {"num_layers", c.num_layers},
          {"dropout", c.dropout},
          {"feature_dim", c.feature_dim},
          {"vars", c.vars.to_string()},
          {"horizon_mode", c.horizon_mode == HorizonMode::multi ? "multi" : "single"}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.rnn_type = parse_rnn_type(j.at("rnn_type").get<std::string>());
    c.hidden_dim = j.at("hidden_dim").get<int>();
    c.num_layers = j.at("num_layers").get<int>();
    c.dropout = j.at("dropout").get<double>();
    c.feature_dim = j.at("feature_dim").get<int>();
    c.vars = VariableSet::parse(j.at("vars").get<std::string>());
    const auto mode = j.at("horizon_mode").get<std::string>();
    if (mode != "single" && mode != "multi") throw Error("unknown horizon mode '" + mode + "'");
    c.horizon_mode = mode == "multi" ? HorizonMode::multi : HorizonMode::single;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed model config: ") + e.what());
  }
  c.validate();
  return c;
}

ParamLayout::ParamLayout(const ModelConfig& config) {
  config.validate();
  const Index h = config.hidden_dim;
  const Index gates = gate_count(cell_kind(config.rnn_type)) * h;
  const char* prefixes[] = {"fwd", "bwd"};
  for (int d = 0; d < config.directions(); ++d) {
    const std::string p = prefixes[d];
    add(p + ".W", gates, config.input_dim());
    add(p + ".U", gates, h);
    add(p + ".b", gates, 1);
  }
  add("head.W", config.output_dim(), config.readout_dim());
  add("head.b", config.output_dim(), 1);
  for (Categorical var : kCategoricals) {
    if (config.vars.enabled(var)) {
      add(std::string("embed.") + name(var), cardinality(var), embed_dim(cardinality(var)));
    }
  }
}

void ParamLayout::add(std::string name, Index rows, Index cols) {
  blocks_.push_back({std::move(name), total_, rows, cols});
  total_ += rows * cols;
}

const ParamBlock& ParamLayout::block(std::string_view name) const {
  for (const auto& b : blocks_) {
    if (b.name == name) return b;
  }
  throw Error("model has no parameter block '" + std::string(name) + "'");
}

bool ParamLayout::has(std::string_view name) const {
  for (const auto& b : blocks_) {
    if (b.name == name) return true;
  }
  return false;
}

std::string ParamLayout::describe(Index flat_index) const {
  for (const auto& b : blocks_) {
    if (flat_index >= b.offset && flat_index < b.offset + b.size()) {
      const Index local = flat_index - b.offset;
      return b.name + "[" + std::to_string(local % b.rows) + "," + std::to_string(local / b.rows) + "]";
    }
  }
  return "<out of range>";
}

}  // namespace pci
