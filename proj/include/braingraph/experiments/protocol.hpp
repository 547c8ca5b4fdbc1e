#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "braingraph/experiments/training.hpp"

namespace braingraph {

struct GridPoint {
  std::size_t index = 0;
  std::map<std::string, std::string> assignment;
  double val_loss = 0.0;  // NaN when the run aborted
  std::size_t best_epoch = 0;
  std::string error;

  bool aborted() const { return !error.empty(); }
};

struct SearchResult {
  std::vector<GridPoint> points;
  std::size_t best = 0;
  RunConfig config;  // base with the best assignment applied
  IndexList train, validation;
};

// Trains every grid point with the same seed and keeps the lowest validation loss; ties go to
// the earlier point. Aborted runs rank last; if all abort, throws SearchError.
SearchResult grid_search(const RunConfig& base, const HyperGrid& grid, GraphCache& cache, const IndexList& train,
                         const IndexList& validation, std::uint64_t seed, std::size_t jobs = 1);

struct FoldResult {
  std::size_t fold = 0;
  Confusion counts;
  Metrics metrics;
  std::string chosen_hparams;
  std::size_t best_epoch = 0;
  std::string error;  // non-empty when training aborted
  IndexList train, validation, test;

  bool aborted() const { return !error.empty(); }
};

struct Aggregate {
  MeanStd balanced_accuracy, sensitivity, specificity;
  std::size_t completed = 0;
  std::size_t aborted = 0;
};

struct ExperimentReport {
  std::string experiment;
  Family family = Family::gcn;
  std::uint64_t seed = 0;
  std::uint64_t dataset_hash = 0;
  std::string config;  // format_assignment of the run config
  std::vector<FoldResult> folds;

  // Mean and sample std over completed folds.
  Aggregate summary() const;
};

struct CvOptions {
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  double validation_fraction = kValidationFraction;
  std::size_t jobs = 1;
  IndexList exclude;  // subjects kept out of every fold
  std::string experiment = "cv";
};

// Outer stratified k-fold; per fold an inner stratified split for early stopping, then the
// best checkpoint is scored on the untouched test fold.
ExperimentReport cross_validate(const RunConfig& config, GraphCache& cache, const CvOptions& options);

struct ProtocolOptions {
  double selection_fraction = kValidationFraction;  // stratified slice reserved for grid search
  bool reuse_selection_in_cv = false;
  CvOptions cv;
};

struct ProtocolResult {
  IndexList selection;
  SearchResult search;
  ExperimentReport report;
};

// Grid search once on a reserved selection slice, then cross-validation of the chosen
// configuration on the remaining subjects.
ProtocolResult run_protocol(const RunConfig& base, const HyperGrid& grid, GraphCache& cache,
                            const ProtocolOptions& options);

struct ProtocolAudit {
  std::size_t sets_checked = 0;
  std::size_t overlaps = 0;  // test subjects found in a train/validation set
  std::vector<std::string> findings;

  bool clean() const { return overlaps == 0 && findings.empty(); }
};

// Exact set check that no outer test subject reached any training or validation set.
ProtocolAudit audit_protocol(const ProtocolResult& result);

// Order-independent digest of an index set.
std::uint64_t index_hash(const IndexList& indices);

}  // namespace braingraph
