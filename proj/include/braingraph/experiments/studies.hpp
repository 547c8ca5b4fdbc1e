#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "braingraph/experiments/protocol.hpp"

namespace braingraph {

struct ScalingOptions {
  std::vector<std::size_t> sizes = {100, 200, 400, 800, 1600};
  std::size_t test_size = 200;
  std::uint64_t seed = 0;
  double validation_fraction = kValidationFraction;
  std::size_t jobs = 1;
};

struct ScalingPoint {
  Family family = Family::gcn;
  std::size_t train_size = 0;
  std::uint64_t seed = 0;
  Confusion counts;
  Metrics metrics;
  std::string error;
  std::uint64_t test_hash = 0;
  std::uint64_t train_hash = 0;
  IndexList train, test;

  bool aborted() const { return !error.empty(); }
};

// One fixed test set; each size trains on a nested stratified subset (85/15 inner split) and
// is scored on that test set. Points are ordered by config, then size.
std::vector<ScalingPoint> scaling_study(const std::vector<RunConfig>& configs, GraphCache& cache,
                                        const ScalingOptions& options);

struct SweepOptions {
  std::vector<double> keep_fractions;
  std::vector<std::pair<std::string, DiffusionConfig>> arms = {{"none", {}},
                                                               {"heat", DiffusionConfig::heat_kernel(1.0, 2)}};
  CvOptions cv;
};

struct SweepCell {
  double keep_fraction = 0.0;
  std::string arm;
  ExperimentReport report;
  Aggregate summary;
};

// Cross-validation at every keep fraction for every diffusion arm, all else held fixed.
// Cells are ordered by arm, then fraction.
std::vector<SweepCell> threshold_sweep(const RunConfig& base, GraphCache& cache, const SweepOptions& options);

// family,seed,train_size,tp,fp,tn,fn,bal_acc,sens,spec,test_hash,train_hash,status
void write_scaling_table(const std::filesystem::path& path, const std::vector<ScalingPoint>& points);
// arm,keep_fraction,removed_fraction,mean_bal_acc,std_bal_acc,completed_folds,aborted_folds
void write_sweep_table(const std::filesystem::path& path, const std::vector<SweepCell>& cells);

}  // namespace braingraph
