#ifndef PCI_OPTIM_HPP
#define PCI_OPTIM_HPP

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pci/model.hpp"

namespace pci {

// Bias-corrected Adam.
template <typename Scalar>
class Adam {
 public:
  struct Options {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  Adam(Index size, Options options) : options_(options), m_(VectorX<Scalar>::Zero(size)), v_(VectorX<Scalar>::Zero(size)) {}
  explicit Adam(Index size) : Adam(size, Options{}) {}

  void step(Eigen::Ref<VectorX<Scalar>> params, const Eigen::Ref<const VectorX<Scalar>>& grad) {
    if (params.size() != m_.size() || grad.size() != m_.size()) throw Error("Adam state size mismatch");
    ++steps_;
    const Scalar b1 = Scalar(options_.beta1);
    const Scalar b2 = Scalar(options_.beta2);
    m_ = b1 * m_ + (Scalar(1) - b1) * grad;
    v_ = b2 * v_ + (Scalar(1) - b2) * grad.cwiseAbs2();
    const Scalar m_correction = Scalar(1) - Scalar(std::pow(options_.beta1, steps_));
    const Scalar v_correction = Scalar(1) - Scalar(std::pow(options_.beta2, steps_));
    params.array() -= Scalar(options_.lr) * (m_.array() / m_correction) /
                      ((v_.array() / v_correction).sqrt() + Scalar(options_.eps));
  }

  std::int64_t steps() const { return steps_; }
  const VectorX<Scalar>& first_moment() const { return m_; }
  const VectorX<Scalar>& second_moment() const { return v_; }
  const Options& options() const { return options_; }

 private:
  Options options_;
  VectorX<Scalar> m_;
  VectorX<Scalar> v_;
  std::int64_t steps_ = 0;
};

// Rescales the gradient in place when its L2 norm exceeds max_norm.
template <typename Scalar>
void clip_gradient_norm(VectorX<Scalar>& grad, double max_norm) {
  const Scalar norm = grad.norm();
  if (norm > Scalar(max_norm)) grad *= Scalar(max_norm) / norm;
}

// Stop after `patience` consecutive epochs without a strictly lower validation loss.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience);

  // Records the loss of `epoch` (1-based); returns true when training should stop.
  bool update(int epoch, double val_loss);
  bool improved() const { return improved_; }
  int best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }

 private:
  int patience_;
  int stale_ = 0;
  int best_epoch_ = 0;
  double best_loss_ = std::numeric_limits<double>::infinity();
  bool improved_ = false;
};

// Independent generator streams derived from one seed.
struct RngStreams {
  std::mt19937_64 init;
  std::mt19937_64 shuffle;
  std::mt19937_64 dropout;

  static RngStreams from_seed(std::uint64_t seed);
};

enum class RescaleMode { none, batch, global };

RescaleMode parse_rescale_mode(const std::string& text);
const char* to_string(RescaleMode mode);

struct TrainConfig {
  ModelConfig model;
  int batch_size = 64;
  double lr = 1e-4;
  int patience = 5;
  int max_epochs = 100;
  RescaleMode rescale = RescaleMode::none;
  std::optional<double> clip_norm;  // off by default; 5.0 when enabled from the CLI
  double pos_weight = 1.0;
  std::uint64_t seed = 0;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
};

enum class StopReason { patience, max_epochs, diverged };
const char* to_string(StopReason reason);

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();
  StopReason stop_reason = StopReason::max_epochs;
};

struct TrainResult {
  Model<float> model;
  TrainHistory history;
  float global_scale = 0.0f;  // training-set max, used with RescaleMode::global
};

// Applies the configured rescaling to a copy of `batch`.
std::vector<SequenceInput> prepare_batch(std::span<const SequenceInput> batch, RescaleMode mode, float global_scale);

// Mean eval-mode loss, batched in dataset order so per-batch rescaling is deterministic.
double dataset_loss(const Model<float>& model, std::span<const SequenceInput> data, int batch_size, RescaleMode mode,
                    float global_scale, double pos_weight = 1.0);

using EpochCallback = std::function<void(const EpochRecord&)>;

// Mini-batch Adam with per-epoch seeded shuffling and early stopping; returns
// the parameters of the best validation epoch.
TrainResult train(std::span<const SequenceInput> train_set, std::span<const SequenceInput> val_set,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

struct GradCheckReport {
  double max_relative_error = 0;
  std::string worst_parameter;
  Index worst_index = -1;
};

// Central differences against a supplied analytic gradient.
// relative error = |analytic - numeric| / max(|numeric|, 1e-6)
GradCheckReport compare_gradients(const Model<double>& model, std::span<const SequenceInput> batch,
                                  std::span<const VectorX<double>> masks, const VectorX<double>& analytic,
                                  double eps = 1e-5);

GradCheckReport grad_check(const Model<double>& model, std::span<const SequenceInput> batch,
                           std::span<const VectorX<double>> masks = {}, double eps = 1e-5);

}  // namespace pci

#endif  // PCI_OPTIM_HPP
