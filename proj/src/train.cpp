#include <algorithm>
#include <cmath>
#include <numeric>

#include "pci/optim.hpp"

namespace pci {

EarlyStopping::EarlyStopping(int patience) : patience_(patience) {
  if (patience < 1) throw Error("patience must be at least 1");
}

bool EarlyStopping::update(int epoch, double val_loss) {
  improved_ = val_loss < best_loss_;
  if (improved_) {
    best_loss_ = val_loss;
    best_epoch_ = epoch;
    stale_ = 0;
  } else {
    ++stale_;
  }
  return stale_ >= patience_;
}

RngStreams RngStreams::from_seed(std::uint64_t seed) {
  auto stream = [seed](std::uint32_t id) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), id};
    return std::mt19937_64(seq);
  };
  return {stream(1), stream(2), stream(3)};
}

RescaleMode parse_rescale_mode(const std::string& text) {
  if (text == "none") return RescaleMode::none;
  if (text == "batch") return RescaleMode::batch;
  if (text == "global") return RescaleMode::global;
  throw Error("unknown rescale mode '" + text + "'");
}

const char* to_string(RescaleMode mode) {
  switch (mode) {
    case RescaleMode::none: return "none";
    case RescaleMode::batch: return "batch";
    case RescaleMode::global: return "global";
  }
  return "?";
}

const char* to_string(StopReason reason) {
  switch (reason) {
    case StopReason::patience: return "patience";
    case StopReason::max_epochs: return "max_epochs";
    case StopReason::diverged: return "diverged";
  }
  return "?";
}

std::vector<SequenceInput> prepare_batch(std::span<const SequenceInput> batch, RescaleMode mode, float global_scale) {
  std::vector<SequenceInput> out(batch.begin(), batch.end());
  switch (mode) {
    case RescaleMode::none: break;
    case RescaleMode::batch: out = rescale_batch(std::move(out)); break;
    case RescaleMode::global: scale_images(out, global_scale); break;
  }
  return out;
}

double dataset_loss(const Model<float>& model, std::span<const SequenceInput> data, int batch_size, RescaleMode mode,
                    float global_scale, double pos_weight) {
  if (data.empty()) throw Error("empty dataset");
  double total = 0;
  for (std::size_t start = 0; start < data.size(); start += static_cast<std::size_t>(batch_size)) {
    const auto count = std::min<std::size_t>(static_cast<std::size_t>(batch_size), data.size() - start);
    const auto batch = prepare_batch(data.subspan(start, count), mode, global_scale);
    total += static_cast<double>(batch_loss<float>(model, batch, {}, static_cast<float>(pos_weight))) *
             static_cast<double>(count);
  }
  return total / static_cast<double>(data.size());
}

TrainResult train(std::span<const SequenceInput> train_set, std::span<const SequenceInput> val_set,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  if (train_set.empty() || val_set.empty()) throw Error("training and validation sets must be non-empty");
  if (config.batch_size < 1) throw Error("batch size must be at least 1");
  if (config.max_epochs < 1) throw Error("max_epochs must be at least 1");

  auto rng = RngStreams::from_seed(config.seed);
  TrainResult result{Model<float>(config.model), {}, 0.0f};
  initialize(result.model, rng.init);
  if (config.rescale == RescaleMode::global) result.global_scale = batch_max(train_set);

  Model<float>& model = result.model;
  VectorX<float> best_params = model.parameters();
  Adam<float> adam(model.parameters().size(), {.lr = config.lr});
  EarlyStopping stopper(config.patience);
  TrainHistory& history = result.history;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  const auto pos_weight = static_cast<float>(config.pos_weight);
  const auto batch_size = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.shuffle);
    double epoch_loss = 0;
    bool diverged = false;
    for (std::size_t start = 0; start < order.size() && !diverged; start += batch_size) {
      const auto count = std::min(batch_size, order.size() - start);
      std::vector<SequenceInput> picked;
      picked.reserve(count);
      for (std::size_t i = 0; i < count; ++i) picked.push_back(train_set[order[start + i]]);
      const auto batch = prepare_batch(picked, config.rescale, result.global_scale);

      std::vector<VectorX<float>> masks;
      masks.reserve(count);
      for (std::size_t i = 0; i < count; ++i) {
        masks.push_back(dropout_mask<float>(config.model.readout_dim(), config.model.dropout, rng.dropout));
      }
      LossGrad<float> lg;
      try {
        lg = loss_and_gradient<float>(model, batch, masks, pos_weight);
      } catch (const Error&) {
        diverged = true;
        break;
      }
      if (!std::isfinite(lg.loss)) {
        diverged = true;
        break;
      }
      if (config.clip_norm) clip_gradient_norm(lg.grad, *config.clip_norm);
      adam.step(model.parameters(), lg.grad);
      epoch_loss += static_cast<double>(lg.loss) * static_cast<double>(count);
    }

    const double val_loss =
        diverged ? std::numeric_limits<double>::quiet_NaN()
                 : dataset_loss(model, val_set, config.batch_size, config.rescale, result.global_scale,
                                config.pos_weight);
    EpochRecord record{epoch, epoch_loss / static_cast<double>(train_set.size()), val_loss};
    if (diverged || !std::isfinite(record.train_loss) || !std::isfinite(val_loss)) {
      history.epochs.push_back(record);
      if (on_epoch) on_epoch(record);
      history.stop_reason = StopReason::diverged;
      break;
    }
    history.epochs.push_back(record);
    if (on_epoch) on_epoch(record);

    const bool stop = stopper.update(epoch, val_loss);
    if (stopper.improved()) best_params = model.parameters();
    if (stop) {
      history.stop_reason = StopReason::patience;
      break;
    }
  }

  history.best_epoch = stopper.best_epoch();
  history.best_val_loss = stopper.best_loss();
  model.parameters() = best_params;
  return result;
}

GradCheckReport compare_gradients(const Model<double>& model, std::span<const SequenceInput> batch,
                                  std::span<const VectorX<double>> masks, const VectorX<double>& analytic,
                                  double eps) {
  if (analytic.size() != model.parameters().size()) throw Error("gradient size mismatch");
  Model<double> probe = model;
  GradCheckReport report;
  for (Index i = 0; i < probe.parameters().size(); ++i) {
    const double saved = probe.parameters()[i];
    probe.parameters()[i] = saved + eps;
    const double up = batch_loss<double>(probe, batch, masks);
    probe.parameters()[i] = saved - eps;
    const double down = batch_loss<double>(probe, batch, masks);
    probe.parameters()[i] = saved;

    const double numeric = (up - down) / (2 * eps);
    const double rel = std::abs(analytic[i] - numeric) / std::max(std::abs(numeric), 1e-6);
    if (rel > report.max_relative_error || report.worst_index < 0) {
      report.max_relative_error = rel;
      report.worst_index = i;
    }
  }
  if (report.worst_index >= 0) report.worst_parameter = model.layout().describe(report.worst_index);
  return report;
}

GradCheckReport grad_check(const Model<double>& model, std::span<const SequenceInput> batch,
                           std::span<const VectorX<double>> masks, double eps) {
  const auto lg = loss_and_gradient<double>(model, batch, masks);
  return compare_gradients(model, batch, masks, lg.grad, eps);
}

}  // namespace pci
