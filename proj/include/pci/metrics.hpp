#ifndef PCI_METRICS_HPP
#define PCI_METRICS_HPP

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pci/model.hpp"
#include "pci/optim.hpp"

namespace pci {

// All values are percentages in [0, 100].
struct Metrics {
  double accuracy = 0;
  double precision = 0;
  double recall = 0;
  double ap = 0;
  double threshold = 0.5;
};

struct ConfusionMetrics {
  double accuracy = 0;
  double precision = 0;
  double recall = 0;
};

// Predicts positive when prob >= threshold. Precision with no predicted
// positives and recall with no actual positives are reported as 0.
ConfusionMetrics confusion_at_threshold(std::span<const double> probs, std::span<const int> labels,
                                        double threshold = 0.5);

// AP = sum_n (R_n - R_{n-1}) P_n, sweeping the distinct scores in decreasing
// order as thresholds, R_0 = 0. Throws when there is no positive label.
double average_precision(std::span<const double> probs, std::span<const int> labels);

struct EvalOptions {
  int batch_size = 64;
  RescaleMode rescale = RescaleMode::none;
  float global_scale = 0.0f;
  double threshold = 0.5;
};

struct Predictions {
  std::vector<VectorX<double>> probs;  // one vector per sample (1 or 8 horizons)
};

// Eval-mode probabilities for every sample, batched in order for rescaling.
Predictions predict_all(const Model<float>& model, std::span<const SequenceInput> data, const EvalOptions& options);

// Metrics on the last model output (the t+M target in either horizon mode).
Metrics evaluate(const Model<float>& model, std::span<const SequenceInput> data, const EvalOptions& options);

nlohmann::json to_json(const Metrics& metrics);
// Aligned table in the column order Acc. P R AP.
std::string format_table(const Metrics& metrics);

}  // namespace pci

#endif  // PCI_METRICS_HPP
