#ifndef PCI_FEATURES_HPP
#define PCI_FEATURES_HPP

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pci/data_model.hpp"
#include "pci/feature_store.hpp"
#include "pci/types.hpp"

namespace pci {

// min(floor(N_c / 2) + 1, 50)
int embed_dim(int cardinality);

enum class Categorical { looking = 0, orientation = 1, movement = 2 };
inline constexpr std::array<Categorical, 3> kCategoricals = {Categorical::looking, Categorical::orientation,
                                                             Categorical::movement};
int cardinality(Categorical var);
const char* name(Categorical var);

// Which additional variables are concatenated to the image features.
struct VariableSet {
  bool looking = false;
  bool orientation = false;
  bool movement = false;
  bool center = false;

  static VariableSet all() { return {true, true, true, true}; }
  static VariableSet none() { return {}; }
  // "all", "none", or a comma list of looking,orientation,movement,center.
  static VariableSet parse(const std::string& text);
  std::string to_string() const;

  bool enabled(Categorical var) const;
  // Number of values appended after the image block.
  int extra_width() const;
  bool operator==(const VariableSet&) const = default;
};

struct CategoricalCodes {
  std::optional<int> looking;
  std::optional<int> orientation;
  std::optional<int> movement;

  std::optional<int> get(Categorical var) const;
};

struct FrameInput {
  Eigen::VectorXf image;
  CategoricalCodes codes;
  std::optional<Eigen::Vector2f> center;
};

// Model-ready window: one FrameInput per time step plus the target labels.
struct SequenceInput {
  std::vector<FrameInput> frames;
  Eigen::VectorXf labels;
  SampleSource source;
};

// Row `code` of an N_c x dim embedding table.
template <typename Table>
auto embed(const Eigen::MatrixBase<Table>& table, int code) {
  if (code < 0 || code >= table.rows()) {
    throw Error("embedding code " + std::to_string(code) + " outside [0, " + std::to_string(table.rows()) + ")");
  }
  return table.row(code).transpose();
}

// [image | looking | orientation | movement | center], skipping disabled
// variables. `table_for(Categorical)` returns the embedding table for a variable.
template <typename Scalar, typename TableLookup>
VectorX<Scalar> assemble_input(const Eigen::Ref<const VectorX<Scalar>>& image, const CategoricalCodes& codes,
                               const std::optional<Eigen::Vector2f>& center, const VariableSet& vars,
                               TableLookup&& table_for) {
  VectorX<Scalar> x(image.size() + vars.extra_width());
  Index offset = 0;
  x.head(image.size()) = image;
  offset += image.size();
  for (Categorical var : kCategoricals) {
    if (!vars.enabled(var)) continue;
    auto code = codes.get(var);
    if (!code) throw Error(std::string("enabled variable '") + name(var) + "' missing from input");
    const auto& table = table_for(var);
    x.segment(offset, table.cols()) = embed(table, *code);
    offset += table.cols();
  }
  if (vars.center) {
    if (!center) throw Error("enabled variable 'center' missing from input");
    x.segment(offset, 2) = center->template cast<Scalar>();
    offset += 2;
  }
  return x;
}

// Largest image-feature entry over every frame of every sequence.
float batch_max(std::span<const SequenceInput> batch);
// Divide every image-feature entry by `divisor`; categorical and center parts untouched.
void scale_images(std::span<SequenceInput> batch, float divisor);
// Divide image features by the batch-global maximum; an all-zero batch is returned unchanged.
std::vector<SequenceInput> rescale_batch(std::vector<SequenceInput> batch);

FrameInput frame_input(const FrameRecord& frame, const Eigen::VectorXf& image);

// Keys referenced by the samples that the store cannot resolve.
std::vector<FeatureKey> missing_features(std::span<const Sample> samples, const FeatureStore& store);

SequenceInput build_sequence(const Sample& sample, const FeatureStore& store);
std::vector<SequenceInput> build_sequences(std::span<const Sample> samples, const FeatureStore& store);

}  // namespace pci

#endif  // PCI_FEATURES_HPP
