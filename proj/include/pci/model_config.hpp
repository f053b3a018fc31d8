#ifndef PCI_MODEL_CONFIG_HPP
#define PCI_MODEL_CONFIG_HPP

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "pci/data_model.hpp"
#include "pci/features.hpp"
#include "pci/rnn.hpp"

namespace pci {

enum class RnnType { lstm, gru, bdlstm, bdgru };

RnnType parse_rnn_type(const std::string& text);
const char* to_string(RnnType type);
CellKind cell_kind(RnnType type);
bool is_bidirectional(RnnType type);

struct ModelConfig {
  RnnType rnn_type = RnnType::lstm;
  int hidden_dim = 4;
  int num_layers = 1;
  double dropout = 0.5;
  int feature_dim = 512;  // width of the image-feature block
  VariableSet vars;
  HorizonMode horizon_mode = HorizonMode::single;

  int input_dim() const { return feature_dim + vars.extra_width(); }
  int directions() const { return is_bidirectional(rnn_type) ? 2 : 1; }
  int readout_dim() const { return directions() * hidden_dim; }
  int output_dim() const { return horizon_mode == HorizonMode::multi ? kMultiHorizonSteps : 1; }

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

struct ParamBlock {
  std::string name;
  Index offset = 0;
  Index rows = 0;
  Index cols = 0;

  Index size() const { return rows * cols; }
};

// Fixed order of every parameter tensor inside the flat parameter vector.
// Each block is stored column-major:
//   fwd.W, fwd.U, fwd.b, [bwd.W, bwd.U, bwd.b], head.W, head.b,
//   [embed.looking], [embed.orientation], [embed.movement]
class ParamLayout {
 public:
  explicit ParamLayout(const ModelConfig& config);

  const std::vector<ParamBlock>& blocks() const { return blocks_; }
  const ParamBlock& block(std::string_view name) const;
  bool has(std::string_view name) const;
  Index total_size() const { return total_; }
  // "head.W[0,3]" style description of a flat parameter index.
  std::string describe(Index flat_index) const;

 private:
  void add(std::string name, Index rows, Index cols);

  std::vector<ParamBlock> blocks_;
  Index total_ = 0;
};

}  // namespace pci

#endif  // PCI_MODEL_CONFIG_HPP
