#include "pci/features.hpp"

#include <algorithm>
#include <sstream>

namespace pci {

int embed_dim(int cardinality) {
  if (cardinality < 2) throw Error("embedding cardinality must be at least 2, got " + std::to_string(cardinality));
  return std::min(cardinality / 2 + 1, 50);
}

int cardinality(Categorical var) {
  switch (var) {
    case Categorical::looking: return 2;
    case Categorical::orientation: return 4;
    case Categorical::movement: return 2;
  }
  return 0;
}

const char* name(Categorical var) {
  switch (var) {
    case Categorical::looking: return "looking";
    case Categorical::orientation: return "orientation";
    case Categorical::movement: return "movement";
  }
  return "?";
}

VariableSet VariableSet::parse(const std::string& text) {
  if (text == "all") return all();
  if (text == "none" || text.empty()) return none();
  VariableSet vars;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "looking") vars.looking = true;
    else if (item == "orientation") vars.orientation = true;
    else if (item == "movement") vars.movement = true;
    else if (item == "center") vars.center = true;
    else throw Error("unknown variable '" + item + "' (expected looking, orientation, movement, center)");
  }
  return vars;
}

std::string VariableSet::to_string() const {
  std::string out;
  auto append = [&out](bool on, const char* n) {
    if (!on) return;
    if (!out.empty()) out += ',';
    out += n;
  };
  append(looking, "looking");
  append(orientation, "orientation");
  append(movement, "movement");
  append(center, "center");
  return out.empty() ? "none" : out;
}

bool VariableSet::enabled(Categorical var) const {
  switch (var) {
    case Categorical::looking: return looking;
    case Categorical::orientation: return orientation;
    case Categorical::movement: return movement;
  }
  return false;
}

int VariableSet::extra_width() const {
  int width = center ? 2 : 0;
  for (Categorical var : kCategoricals) {
    if (enabled(var)) width += embed_dim(cardinality(var));
  }
  return width;
}

std::optional<int> CategoricalCodes::get(Categorical var) const {
  switch (var) {
    case Categorical::looking: return looking;
    case Categorical::orientation: return orientation;
    case Categorical::movement: return movement;
  }
  return std::nullopt;
}

float batch_max(std::span<const SequenceInput> batch) {
  float best = 0.0f;
  for (const auto& seq : batch) {
    for (const auto& frame : seq.frames) {
      if (frame.image.size() > 0) best = std::max(best, frame.image.maxCoeff());
    }
  }
  return best;
}

void scale_images(std::span<SequenceInput> batch, float divisor) {
  if (!(divisor > 0.0f)) return;
  for (auto& seq : batch) {
    for (auto& frame : seq.frames) frame.image /= divisor;
  }
}

std::vector<SequenceInput> rescale_batch(std::vector<SequenceInput> batch) {
  scale_images(batch, batch_max(batch));
  return batch;
}

FrameInput frame_input(const FrameRecord& frame, const Eigen::VectorXf& image) {
  FrameInput input;
  input.image = image;
  input.codes.looking = frame.looking;
  input.codes.orientation = static_cast<int>(frame.orientation);
  input.codes.movement = static_cast<int>(frame.movement);
  const auto c = normalize_center(frame.bbox, frame.image_size);
  input.center = Eigen::Vector2f(static_cast<float>(c[0]), static_cast<float>(c[1]));
  return input;
}

namespace {
FeatureKey key_of(const Sample& sample, const FrameRecord& frame) {
  return {sample.source.video_id, sample.source.pedestrian_id, frame.frame_index};
}
}  // namespace

std::vector<FeatureKey> missing_features(std::span<const Sample> samples, const FeatureStore& store) {
  std::vector<FeatureKey> missing;
  for (const auto& sample : samples) {
    for (const auto& frame : sample.frames) {
      auto key = key_of(sample, frame);
      if (!store.contains(key)) missing.push_back(std::move(key));
    }
  }
  std::sort(missing.begin(), missing.end());
  missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
  return missing;
}

SequenceInput build_sequence(const Sample& sample, const FeatureStore& store) {
  SequenceInput seq;
  seq.source = sample.source;
  seq.frames.reserve(sample.frames.size());
  for (const auto& frame : sample.frames) seq.frames.push_back(frame_input(frame, store.feature(key_of(sample, frame))));
  seq.labels.resize(static_cast<Index>(sample.labels.size()));
  for (std::size_t i = 0; i < sample.labels.size(); ++i) seq.labels[static_cast<Index>(i)] = static_cast<float>(sample.labels[i]);
  return seq;
}

std::vector<SequenceInput> build_sequences(std::span<const Sample> samples, const FeatureStore& store) {
  std::vector<SequenceInput> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(build_sequence(s, store));
  return out;
}

}  // namespace pci
