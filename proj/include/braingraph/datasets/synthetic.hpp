#pragma once

#include <array>
#include <cstdint>
#include <filesystem>

#include "braingraph/datasets/dataset.hpp"

namespace braingraph {

struct SyntheticConfig {
  std::size_t num_subjects = 400;
  std::size_t num_rois = 50;
  std::size_t num_timepoints = 200;
  double effect = 0.5;
  double noise_std = 1.0;
  double density = 0.2;
  std::uint64_t seed = 0;

  double planted_fraction = 0.1;  // share of node pairs carrying the class-1 coupling
  double planted_scale = 1.0;     // Δ_ij ~ normal(0, planted_scale / sqrt(N))
  double spectral_radius = 0.9;
  std::size_t burn_in = 100;

  void validate() const;
};

struct SyntheticData {
  TimeSeriesDataset dataset;
  // Effective VAR coupling per class, already rescaled to the target spectral radius.
  std::array<Tensor, 2> coupling;
  Tensor base;     // A0 before rescaling
  Tensor planted;  // Δ before scaling by effect
};

SyntheticData generate_synthetic(const SyntheticConfig& config);

// Largest |eigenvalue| of a symmetric matrix.
double spectral_radius(const Tensor& symmetric);

// Off-diagonal pairs (i < j) where Δ is nonzero.
std::vector<std::pair<std::size_t, std::size_t>> planted_pairs(const SyntheticData& data);

// Manifest, subject CSVs, groundtruth_adjacency_class{0,1}.csv and meta.csv.
std::filesystem::path write_synthetic(const SyntheticData& data, const SyntheticConfig& config,
                                      const std::filesystem::path& dir);

}  // namespace braingraph
