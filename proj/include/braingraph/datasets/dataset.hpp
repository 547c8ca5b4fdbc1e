#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "braingraph/numerics/tensor.hpp"

namespace braingraph {

struct Subject {
  std::string id;
  int label = 0;
  std::string site;
  Tensor timecourses;  // [T timepoints, N rois]

  std::size_t num_timepoints() const { return timecourses.dim(0); }
  std::size_t num_rois() const { return timecourses.dim(1); }
};

struct DatasetMetadata {
  std::string source;
  std::optional<std::uint64_t> generation_seed;
};

struct TimeSeriesDataset {
  std::vector<Subject> subjects;
  std::size_t num_rois = 0;
  DatasetMetadata metadata;

  std::size_t size() const { return subjects.size(); }
  std::vector<int> labels() const;

  // Throws SchemaError / DataError / ConfigurationError when an invariant fails.
  void validate() const;

  // FNV-style digest of ids, labels and every timecourse value.
  std::uint64_t content_hash() const;
};

// Per-column standardization over time (population std). Constant columns become all zeros.
void zscore_columns(Tensor& timecourses);

// Reads `subject_id,label,site,path` rows; paths are relative to the manifest's directory.
TimeSeriesDataset load_dataset(const std::filesystem::path& manifest);

// Writes the manifest plus one headerless CSV per subject (`<id>.csv`) under `dir`.
std::filesystem::path write_dataset(const TimeSeriesDataset& dataset, const std::filesystem::path& dir);

}  // namespace braingraph
