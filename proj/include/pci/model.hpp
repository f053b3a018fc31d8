#ifndef PCI_MODEL_HPP
#define PCI_MODEL_HPP

#include <array>
#include <cmath>
#include <random>
#include <span>
#include <string_view>

#include "pci/features.hpp"
#include "pci/loss.hpp"
#include "pci/model_config.hpp"
#include "pci/rnn.hpp"

namespace pci {

template <typename Scalar>
Eigen::Map<MatrixX<Scalar>> block_map(VectorX<Scalar>& flat, const ParamBlock& b) {
  return {flat.data() + b.offset, b.rows, b.cols};
}

template <typename Scalar>
Eigen::Map<const MatrixX<Scalar>> block_map(const VectorX<Scalar>& flat, const ParamBlock& b) {
  return {flat.data() + b.offset, b.rows, b.cols};
}

// Recurrent classifier with every learned tensor packed in one flat vector
// (see ParamLayout for the order). Zero-initialized on construction.
template <typename Scalar>
class Model {
 public:
  explicit Model(ModelConfig config)
      : config_(std::move(config)), layout_(config_), params_(VectorX<Scalar>::Zero(layout_.total_size())) {}

  const ModelConfig& config() const { return config_; }
  const ParamLayout& layout() const { return layout_; }
  VectorX<Scalar>& parameters() { return params_; }
  const VectorX<Scalar>& parameters() const { return params_; }

  Eigen::Map<MatrixX<Scalar>> block(std::string_view name) { return block_map(params_, layout_.block(name)); }
  Eigen::Map<const MatrixX<Scalar>> block(std::string_view name) const {
    return block_map(params_, layout_.block(name));
  }

  CellRef<Scalar> cell(int direction) const {
    const char* p = direction == 0 ? "fwd" : "bwd";
    const auto& b = layout_.block(std::string(p) + ".b");
    return {block(std::string(p) + ".W"), block(std::string(p) + ".U"),
            Eigen::Map<const VectorX<Scalar>>(params_.data() + b.offset, b.rows)};
  }

  Eigen::Map<const MatrixX<Scalar>> head_weights() const { return block("head.W"); }
  Eigen::Map<const VectorX<Scalar>> head_bias() const {
    const auto& b = layout_.block("head.b");
    return {params_.data() + b.offset, b.rows};
  }
  Eigen::Map<const MatrixX<Scalar>> embedding(Categorical var) const {
    return block(std::string("embed.") + name(var));
  }

  template <typename Other>
  Model<Other> cast() const {
    Model<Other> out(config_);
    out.parameters() = params_.template cast<Other>();
    return out;
  }

 private:
  ModelConfig config_;
  ParamLayout layout_;
  VectorX<Scalar> params_;
};

// Recurrent and head tensors ~ U(-1/sqrt(H), 1/sqrt(H)); embeddings ~ U(-0.05, 0.05).
template <typename Scalar, typename Rng>
void initialize(Model<Scalar>& model, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(model.config().hidden_dim));
  for (const auto& b : model.layout().blocks()) {
    const double limit = b.name.starts_with("embed.") ? 0.05 : bound;
    std::uniform_real_distribution<double> dist(-limit, limit);
    auto values = block_map(model.parameters(), b);
    for (Index i = 0; i < values.size(); ++i) values.data()[i] = static_cast<Scalar>(dist(rng));
  }
}

// D x T matrix of assembled per-frame inputs.
template <typename Scalar>
MatrixX<Scalar> build_inputs(const SequenceInput& seq, const Model<Scalar>& model) {
  const auto& config = model.config();
  if (seq.frames.empty()) throw Error("empty input sequence");
  MatrixX<Scalar> inputs(config.input_dim(), static_cast<Index>(seq.frames.size()));
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    const auto& frame = seq.frames[t];
    if (frame.image.size() != config.feature_dim) {
      throw Error("image features have " + std::to_string(frame.image.size()) + " values, model expects " +
                  std::to_string(config.feature_dim));
    }
    const VectorX<Scalar> image = frame.image.template cast<Scalar>();
    inputs.col(static_cast<Index>(t)) = assemble_input<Scalar>(
        image, frame.codes, frame.center, config.vars, [&model](Categorical var) { return model.embedding(var); });
  }
  return inputs;
}

// Many-to-one readout: final hidden state, or [forward final | backward final]
// for bidirectional models (the backward pass reads the reversed sequence).
template <typename Scalar>
VectorX<Scalar> rnn_forward(const ConstMatrixRef<Scalar>& inputs, const Model<Scalar>& model) {
  const auto& config = model.config();
  const Index h = config.hidden_dim;
  VectorX<Scalar> readout(config.readout_dim());
  for (int d = 0; d < config.directions(); ++d) {
    readout.segment(d * h, h) = run_direction(cell_kind(config.rnn_type), model.cell(d), inputs, d == 1).final_hidden();
  }
  return readout;
}

// Inverted dropout mask: each coordinate kept with probability 1-p and scaled by 1/(1-p).
template <typename Scalar, typename Rng>
VectorX<Scalar> dropout_mask(Index size, double p, Rng& rng) {
  VectorX<Scalar> mask(size);
  std::bernoulli_distribution keep(1.0 - p);
  const Scalar scale = Scalar(1.0 / (1.0 - p));
  for (Index i = 0; i < size; ++i) mask[i] = keep(rng) ? scale : Scalar(0);
  return mask;
}

// sigmoid(W (readout * mask) + b). An empty mask means eval mode.
template <typename Scalar>
VectorX<Scalar> head_forward(const ConstVectorRef<Scalar>& readout, const Model<Scalar>& model,
                             const VectorX<Scalar>& mask = {}) {
  if (readout.size() != model.config().readout_dim()) throw Error("readout width does not match head");
  VectorX<Scalar> logits;
  if (mask.size() == 0) {
    logits = model.head_weights() * readout + model.head_bias();
  } else {
    logits = model.head_weights() * readout.cwiseProduct(mask) + model.head_bias();
  }
  return sigmoid(logits.array()).matrix();
}

enum class Mode { train, eval };

template <typename Scalar, typename Rng>
VectorX<Scalar> model_forward(const SequenceInput& seq, const Model<Scalar>& model, Mode mode, Rng& rng) {
  const VectorX<Scalar> readout = rnn_forward<Scalar>(build_inputs(seq, model), model);
  if (mode == Mode::eval) return head_forward<Scalar>(readout, model);
  return head_forward<Scalar>(readout, model, dropout_mask<Scalar>(readout.size(), model.config().dropout, rng));
}

template <typename Scalar>
VectorX<Scalar> model_forward(const SequenceInput& seq, const Model<Scalar>& model) {
  const VectorX<Scalar> readout = rnn_forward<Scalar>(build_inputs(seq, model), model);
  return head_forward<Scalar>(readout, model);
}

template <typename Scalar>
struct LossGrad {
  Scalar loss = 0;
  VectorX<Scalar> grad;
};

// Mean BCE over horizons of one sample.
template <typename Scalar>
Scalar sample_loss(const VectorX<Scalar>& probs, const Eigen::VectorXf& labels, Scalar pos_weight = Scalar(1)) {
  if (probs.size() != labels.size()) throw Error("label count does not match model output");
  Scalar total = 0;
  for (Index k = 0; k < probs.size(); ++k) total += bce_loss<Scalar>(probs[k], Scalar(labels[k]), pos_weight);
  return total / Scalar(probs.size());
}

// Mean loss over the batch and its gradient w.r.t. every parameter (BPTT).
// `masks` holds one dropout mask per sample, or is empty for eval mode.
template <typename Scalar>
LossGrad<Scalar> loss_and_gradient(const Model<Scalar>& model, std::span<const SequenceInput> batch,
                                   std::span<const VectorX<Scalar>> masks = {}, Scalar pos_weight = Scalar(1)) {
  if (batch.empty()) throw Error("empty batch");
  if (!masks.empty() && masks.size() != batch.size()) throw Error("one dropout mask per sample required");
  const auto& config = model.config();
  const auto& layout = model.layout();
  const CellKind kind = cell_kind(config.rnn_type);
  const Index h = config.hidden_dim;

  LossGrad<Scalar> result;
  result.grad = VectorX<Scalar>::Zero(layout.total_size());
  auto d_head_w = block_map(result.grad, layout.block("head.W"));
  auto d_head_b = block_map(result.grad, layout.block("head.b"));

  for (std::size_t n = 0; n < batch.size(); ++n) {
    const SequenceInput& seq = batch[n];
    const MatrixX<Scalar> inputs = build_inputs(seq, model);

    std::array<DirectionTrace<Scalar>, 2> traces;
    VectorX<Scalar> readout(config.readout_dim());
    for (int d = 0; d < config.directions(); ++d) {
      traces[d] = run_direction(kind, model.cell(d), inputs, d == 1);
      readout.segment(d * h, h) = traces[d].final_hidden();
    }
    const VectorX<Scalar> dropped = masks.empty() ? readout : readout.cwiseProduct(masks[n]);
    const VectorX<Scalar> probs =
        sigmoid((model.head_weights() * dropped + model.head_bias()).array()).matrix();
    result.loss += sample_loss(probs, seq.labels, pos_weight);

    const Index outputs = probs.size();
    VectorX<Scalar> d_logits(outputs);
    for (Index k = 0; k < outputs; ++k) {
      d_logits[k] = bce_logit_gradient<Scalar>(probs[k], Scalar(seq.labels[k]), pos_weight) / Scalar(outputs);
    }
    d_head_w.noalias() += d_logits * dropped.transpose();
    d_head_b += d_logits;
    VectorX<Scalar> d_readout = model.head_weights().transpose() * d_logits;
    if (!masks.empty()) d_readout = d_readout.cwiseProduct(masks[n]);

    MatrixX<Scalar> d_inputs = MatrixX<Scalar>::Zero(inputs.rows(), inputs.cols());
    for (int d = 0; d < config.directions(); ++d) {
      const std::string p = d == 0 ? "fwd" : "bwd";
      const auto& bias_block = layout.block(p + ".b");
      CellGrad<Scalar> cell_grad{block_map(result.grad, layout.block(p + ".W")),
                                 block_map(result.grad, layout.block(p + ".U")),
                                 Eigen::Map<VectorX<Scalar>>(result.grad.data() + bias_block.offset, bias_block.rows)};
      backprop_direction<Scalar>(kind, model.cell(d), inputs, d == 1, traces[d], d_readout.segment(d * h, h),
                                 cell_grad, d_inputs);
    }

    Index offset = config.feature_dim;
    for (Categorical var : kCategoricals) {
      if (!config.vars.enabled(var)) continue;
      auto d_table = block_map(result.grad, layout.block(std::string("embed.") + name(var)));
      const Index width = d_table.cols();
      for (std::size_t t = 0; t < seq.frames.size(); ++t) {
        const int code = *seq.frames[t].codes.get(var);
        d_table.row(code) += d_inputs.col(static_cast<Index>(t)).segment(offset, width).transpose();
      }
      offset += width;
    }
  }

  const Scalar count = Scalar(batch.size());
  result.loss /= count;
  result.grad /= count;
  if (!result.grad.allFinite()) {
    for (Index i = 0; i < result.grad.size(); ++i) {
      if (!std::isfinite(result.grad[i])) throw Error("non-finite gradient at " + layout.describe(i));
    }
  }
  return result;
}

// Mean eval-mode loss of a batch, no gradient.
template <typename Scalar>
Scalar batch_loss(const Model<Scalar>& model, std::span<const SequenceInput> batch,
                  std::span<const VectorX<Scalar>> masks = {}, Scalar pos_weight = Scalar(1)) {
  if (batch.empty()) throw Error("empty batch");
  Scalar total = 0;
  for (std::size_t n = 0; n < batch.size(); ++n) {
    const VectorX<Scalar> readout = rnn_forward<Scalar>(build_inputs(batch[n], model), model);
    const VectorX<Scalar> probs =
        masks.empty() ? head_forward<Scalar>(readout, model) : head_forward<Scalar>(readout, model, masks[n]);
    total += sample_loss(probs, batch[n].labels, pos_weight);
  }
  return total / Scalar(batch.size());
}

}  // namespace pci

#endif  // PCI_MODEL_HPP
