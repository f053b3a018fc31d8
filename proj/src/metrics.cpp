#include "pci/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

namespace pci {

namespace {
void check_lengths(std::span<const double> probs, std::span<const int> labels) {
  if (probs.size() != labels.size()) throw Error("probabilities and labels differ in length");
  if (probs.empty()) throw Error("metrics need at least one sample");
}
}  // namespace

ConfusionMetrics confusion_at_threshold(std::span<const double> probs, std::span<const int> labels,
                                        double threshold) {
  check_lengths(probs, labels);
  long tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const bool predicted = probs[i] >= threshold;
    const bool actual = labels[i] != 0;
    if (predicted && actual) ++tp;
    else if (predicted) ++fp;
    else if (actual) ++fn;
    else ++tn;
  }
  ConfusionMetrics m;
  m.accuracy = 100.0 * static_cast<double>(tp + tn) / static_cast<double>(probs.size());
  m.precision = tp + fp > 0 ? 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = tp + fn > 0 ? 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  return m;
}

double average_precision(std::span<const double> probs, std::span<const int> labels) {
  check_lengths(probs, labels);
  const auto positives = std::count_if(labels.begin(), labels.end(), [](int y) { return y != 0; });
  if (positives == 0) throw Error("average precision is undefined without positive labels");

  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });

  double ap = 0;
  double prev_recall = 0;
  long tp = 0, predicted = 0;
  for (std::size_t i = 0; i < order.size();) {
    // Every sample sharing this score enters at the same threshold.
    const double score = probs[order[i]];
    for (; i < order.size() && probs[order[i]] == score; ++i) {
      ++predicted;
      if (labels[order[i]] != 0) ++tp;
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(positives);
    const double precision = static_cast<double>(tp) / static_cast<double>(predicted);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return 100.0 * ap;
}

Predictions predict_all(const Model<float>& model, std::span<const SequenceInput> data, const EvalOptions& options) {
  if (options.batch_size < 1) throw Error("batch size must be at least 1");
  Predictions out;
  out.probs.reserve(data.size());
  const auto step = static_cast<std::size_t>(options.batch_size);
  for (std::size_t start = 0; start < data.size(); start += step) {
    const auto count = std::min(step, data.size() - start);
    for (const auto& seq : prepare_batch(data.subspan(start, count), options.rescale, options.global_scale)) {
      out.probs.push_back(model_forward<float>(seq, model).cast<double>());
    }
  }
  return out;
}

Metrics evaluate(const Model<float>& model, std::span<const SequenceInput> data, const EvalOptions& options) {
  if (data.empty()) throw Error("cannot evaluate an empty dataset");
  const auto predictions = predict_all(model, data, options);
  std::vector<double> probs;
  std::vector<int> labels;
  probs.reserve(data.size());
  labels.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& p = predictions.probs[i];
    probs.push_back(p[p.size() - 1]);
    labels.push_back(data[i].labels[data[i].labels.size() - 1] > 0.5f ? 1 : 0);
  }
  const auto confusion = confusion_at_threshold(probs, labels, options.threshold);
  Metrics m;
  m.accuracy = confusion.accuracy;
  m.precision = confusion.precision;
  m.recall = confusion.recall;
  m.ap = average_precision(probs, labels);
  m.threshold = options.threshold;
  return m;
}

nlohmann::json to_json(const Metrics& m) {
  return {{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall}, {"ap", m.ap},
          {"threshold", m.threshold}};
}

std::string format_table(const Metrics& m) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%7s %7s %7s %7s\n%7.2f %7.2f %7.2f %7.2f\n", "Acc.", "P", "R", "AP", m.accuracy,
                m.precision, m.recall, m.ap);
  return buf;
}

}  // namespace pci
