#pragma once

#include <span>
#include <vector>

namespace braingraph {

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  bool operator==(const Confusion&) const = default;
};

struct Metrics {
  double balanced_accuracy = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
};

// Throws MetricError when either class is absent.
Metrics compute_metrics(const Confusion& c);

Confusion confusion(std::span<const int> truth, std::span<const int> predicted);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample (n - 1); 0 for fewer than two values
};

MeanStd mean_std(std::span<const double> values);

}  // namespace braingraph
