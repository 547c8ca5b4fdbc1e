#include "braingraph/experiments/metrics.hpp"

#include <cmath>
#include <string>

#include "braingraph/errors.hpp"

namespace braingraph {

Metrics compute_metrics(const Confusion& c) {
  if (c.tp + c.fn == 0) throw MetricError("no positive samples in the evaluated set");
  if (c.tn + c.fp == 0) throw MetricError("no negative samples in the evaluated set");
  Metrics m;
  m.sensitivity = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  m.specificity = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
  m.balanced_accuracy = (m.sensitivity + m.specificity) / 2.0;
  return m;
}

Confusion confusion(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size()) throw DimensionError("truth and prediction counts differ");
  Confusion c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if ((truth[i] != 0 && truth[i] != 1) || (predicted[i] != 0 && predicted[i] != 1)) {
      throw MetricError("labels must be 0 or 1, got " + std::to_string(truth[i]) + "/" + std::to_string(predicted[i]));
    }
    if (truth[i] == 1) {
      (predicted[i] == 1 ? c.tp : c.fn)++;
    } else {
      (predicted[i] == 1 ? c.fp : c.tn)++;
    }
  }
  return c;
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd r;
  if (values.empty()) return r;
  for (double v : values) r.mean += v;
  r.mean /= static_cast<double>(values.size());
  if (values.size() < 2) return r;
  double ss = 0.0;
  for (double v : values) ss += (v - r.mean) * (v - r.mean);
  r.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  return r;
}

}  // namespace braingraph
