#include "braingraph/experiments/studies.hpp"

#include <cmath>
#include <cstdio>

#include "braingraph/datasets/csv.hpp"
#include "braingraph/errors.hpp"
#include "braingraph/experiments/parallel.hpp"

namespace braingraph {

namespace {

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::vector<ScalingPoint> scaling_study(const std::vector<RunConfig>& configs, GraphCache& cache,
                                        const ScalingOptions& options) {
  if (configs.empty()) throw ConfigurationError("scaling study needs at least one family");
  for (const auto& c : configs) c.validate();
  const std::vector<int> labels = cache.labels();
  const Subsample split = subsample_train(labels, options.sizes, options.test_size, options.seed);
  const Rng root(options.seed);

  const std::size_t n_sizes = options.sizes.size();
  std::vector<ScalingPoint> points(configs.size() * n_sizes);
  parallel_for(options.jobs, points.size(), [&](std::size_t k) {
    const RunConfig& config = configs[k / n_sizes];
    const std::size_t s = k % n_sizes;
    ScalingPoint& p = points[k];
    p.family = config.model.family;
    p.train_size = options.sizes[s];
    p.seed = options.seed;
    p.train = split.train[s];
    p.test = split.test;
    p.test_hash = index_hash(split.test);
    p.train_hash = index_hash(p.train);
    try {
      const auto graphs = cache.graphs(config);
      auto [fit, val] = stratified_holdout(labels, p.train, options.validation_fraction,
                                           root.stream("inner", p.train_size).key());
      const TrainedModel model = train_model(config, *graphs, fit, val, root.stream("train", p.train_size).key());
      p.counts = evaluate(model, *graphs, split.test);
      p.metrics = compute_metrics(p.counts);
    } catch (const TrainingError& e) {
      p.error = e.what();
    }
  });
  return points;
}

std::vector<SweepCell> threshold_sweep(const RunConfig& base, GraphCache& cache, const SweepOptions& options) {
  if (options.keep_fractions.empty()) throw ConfigurationError("sweep needs at least one keep fraction");
  if (options.arms.empty()) throw ConfigurationError("sweep needs at least one diffusion arm");
  std::vector<SweepCell> cells;
  for (const auto& [name, diffusion] : options.arms) {
    for (double keep : options.keep_fractions) {
      RunConfig config = base;
      config.graph.keep_fraction = keep;
      config.graph.diffusion = diffusion;
      CvOptions cv = options.cv;
      cv.experiment = "sweep";
      SweepCell cell;
      cell.keep_fraction = keep;
      cell.arm = name;
      cell.report = cross_validate(config, cache, cv);
      cell.summary = cell.report.summary();
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

void write_scaling_table(const std::filesystem::path& path, const std::vector<ScalingPoint>& points) {
  csv::Table t;
  t.header = {"family", "seed", "train_size", "tp", "fp", "tn", "fn", "bal_acc", "sens", "spec", "test_hash", "train_hash",
              "status"};
  for (const auto& p : points) {
    std::vector<std::string> row = {to_string(p.family), std::to_string(p.seed), std::to_string(p.train_size)};
    if (p.aborted()) {
      row.insert(row.end(), 7, "");
    } else {
      for (std::size_t v : {p.counts.tp, p.counts.fp, p.counts.tn, p.counts.fn}) row.push_back(std::to_string(v));
      for (double v : {p.metrics.balanced_accuracy, p.metrics.sensitivity, p.metrics.specificity}) {
        row.push_back(csv::format_double(v));
      }
    }
    row.push_back(hex(p.test_hash));
    row.push_back(hex(p.train_hash));
    row.push_back(p.aborted() ? "aborted" : "ok");
    t.rows.push_back(std::move(row));
  }
  csv::write_table(path, t);
}

void write_sweep_table(const std::filesystem::path& path, const std::vector<SweepCell>& cells) {
  csv::Table t;
  t.header = {"arm", "keep_fraction", "removed_fraction", "mean_bal_acc", "std_bal_acc", "completed_folds",
              "aborted_folds"};
  for (const auto& c : cells) {
    t.rows.push_back({c.arm, csv::format_double(c.keep_fraction),
                      csv::format_double(std::round((1.0 - c.keep_fraction) * 1e12) / 1e12),
                      csv::format_double(c.summary.balanced_accuracy.mean),
                      csv::format_double(c.summary.balanced_accuracy.std), std::to_string(c.summary.completed),
                      std::to_string(c.summary.aborted)});
  }
  csv::write_table(path, t);
}

}  // namespace braingraph
