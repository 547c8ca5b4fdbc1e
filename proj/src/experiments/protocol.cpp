#include "braingraph/experiments/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "braingraph/errors.hpp"
#include "braingraph/experiments/parallel.hpp"

namespace braingraph {

namespace {

IndexList map_indices(const IndexList& local, const IndexList& pool) {
  IndexList out;
  out.reserve(local.size());
  for (std::size_t i : local) out.push_back(pool[i]);
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t count_overlap(const std::set<std::size_t>& test, const IndexList& other) {
  std::size_t n = 0;
  for (std::size_t i : other) n += test.contains(i);
  return n;
}

}  // namespace

std::uint64_t index_hash(const IndexList& indices) {
  IndexList sorted = indices;
  std::sort(sorted.begin(), sorted.end());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i : sorted) {
    h ^= Rng::mix(static_cast<std::uint64_t>(i) + 1);
    h *= 0x100000001b3ULL;
  }
  return h;
}

SearchResult grid_search(const RunConfig& base, const HyperGrid& grid, GraphCache& cache, const IndexList& train,
                         const IndexList& validation, std::uint64_t seed, std::size_t jobs) {
  const std::size_t n = grid.size();
  if (n == 0) throw SearchError("empty hyperparameter grid");
  SearchResult result;
  result.train = train;
  result.validation = validation;
  result.points.resize(n);
  parallel_for(jobs, n, [&](std::size_t i) {
    GridPoint& p = result.points[i];
    p.index = i;
    p.assignment = grid.point(i);
    try {
      const RunConfig config = with_assignment(base, p.assignment);
      const auto graphs = cache.graphs(config);
      const TrainedModel model = train_model(config, *graphs, train, validation, seed);
      p.val_loss = best_validation_loss(model);
      p.best_epoch = model.best_epoch;
    } catch (const TrainingError& e) {
      p.val_loss = std::numeric_limits<double>::quiet_NaN();
      p.error = e.what();
    }
  });
  bool found = false;
  for (std::size_t i = 0; i < n; ++i) {
    const GridPoint& p = result.points[i];
    if (p.aborted()) continue;
    if (!found || p.val_loss < result.points[result.best].val_loss) {
      result.best = i;
      found = true;
    }
  }
  if (!found) throw SearchError("every grid point aborted; first error: " + result.points[0].error);
  result.config = with_assignment(base, result.points[result.best].assignment);
  return result;
}

Aggregate ExperimentReport::summary() const {
  Aggregate a;
  std::vector<double> bal, sens, spec;
  for (const auto& f : folds) {
    if (f.aborted()) {
      ++a.aborted;
      continue;
    }
    ++a.completed;
    bal.push_back(f.metrics.balanced_accuracy);
    sens.push_back(f.metrics.sensitivity);
    spec.push_back(f.metrics.specificity);
  }
  a.balanced_accuracy = mean_std(bal);
  a.sensitivity = mean_std(sens);
  a.specificity = mean_std(spec);
  return a;
}

ExperimentReport cross_validate(const RunConfig& config, GraphCache& cache, const CvOptions& options) {
  config.validate();
  const std::vector<int> all_labels = cache.labels();
  const std::set<std::size_t> excluded(options.exclude.begin(), options.exclude.end());
  IndexList pool;
  std::vector<int> pool_labels;
  for (std::size_t i = 0; i < all_labels.size(); ++i) {
    if (excluded.contains(i)) continue;
    pool.push_back(i);
    pool_labels.push_back(all_labels[i]);
  }
  const SplitPlan plan = stratified_kfold(pool_labels, options.folds, options.seed, options.validation_fraction);

  ExperimentReport report;
  report.experiment = options.experiment;
  report.family = config.model.family;
  report.seed = options.seed;
  report.dataset_hash = cache.dataset().content_hash();
  report.config = format_assignment(config.to_map());
  report.folds.resize(options.folds);

  const auto graphs = cache.graphs(config);
  const Rng root(options.seed);
  parallel_for(options.jobs, options.folds, [&](std::size_t f) {
    FoldResult& r = report.folds[f];
    r.fold = f;
    r.chosen_hparams = report.config;
    r.train = map_indices(plan.folds[f].train, pool);
    r.validation = map_indices(plan.folds[f].validation, pool);
    r.test = map_indices(plan.folds[f].test, pool);
    try {
      const TrainedModel model = train_model(config, *graphs, r.train, r.validation, root.stream("fold", f).key());
      r.best_epoch = model.best_epoch;
      r.counts = evaluate(model, *graphs, r.test);
      r.metrics = compute_metrics(r.counts);
    } catch (const TrainingError& e) {
      r.error = e.what();
    }
  });
  return report;
}

ProtocolResult run_protocol(const RunConfig& base, const HyperGrid& grid, GraphCache& cache,
                            const ProtocolOptions& options) {
  const std::vector<int> labels = cache.labels();
  IndexList all(labels.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const Rng root(options.cv.seed);

  ProtocolResult result;
  auto [rest, selection] = stratified_holdout(labels, all, options.selection_fraction, root.stream("selection").key());
  result.selection = selection;
  auto [search_train, search_val] =
      stratified_holdout(labels, selection, options.cv.validation_fraction, root.stream("search").key());
  result.search = grid_search(base, grid, cache, search_train, search_val, root.stream("search").key(),
                              options.cv.jobs);

  CvOptions cv = options.cv;
  if (!options.reuse_selection_in_cv) cv.exclude.insert(cv.exclude.end(), selection.begin(), selection.end());
  result.report = cross_validate(result.search.config, cache, cv);
  const std::string chosen = format_assignment(result.search.points[result.search.best].assignment);
  for (auto& f : result.report.folds) f.chosen_hparams = chosen;
  return result;
}

ProtocolAudit audit_protocol(const ProtocolResult& result) {
  ProtocolAudit audit;
  std::set<std::size_t> all_tests;
  for (const auto& fold : result.report.folds) {
    const std::set<std::size_t> test(fold.test.begin(), fold.test.end());
    if (test.size() != fold.test.size()) audit.findings.push_back("fold " + std::to_string(fold.fold) + " repeats a test subject");
    const std::pair<const char*, const IndexList*> sets[] = {{"fold train", &fold.train},
                                                             {"fold validation", &fold.validation},
                                                             {"search train", &result.search.train},
                                                             {"search validation", &result.search.validation}};
    for (const auto& [name, indices] : sets) {
      ++audit.sets_checked;
      const std::size_t n = count_overlap(test, *indices);
      if (n) {
        audit.overlaps += n;
        audit.findings.push_back("fold " + std::to_string(fold.fold) + ": " + std::to_string(n) +
                                 " test subjects in " + name);
      }
    }
    for (std::size_t i : fold.test) {
      if (!all_tests.insert(i).second) {
        audit.findings.push_back("subject " + std::to_string(i) + " is tested in more than one fold");
      }
    }
  }
  return audit;
}

}  // namespace braingraph
