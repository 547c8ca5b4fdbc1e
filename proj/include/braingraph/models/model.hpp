#pragma once

#include <filesystem>

#include "braingraph/models/networks.hpp"
#include "braingraph/models/spec.hpp"
#include "braingraph/models/svm.hpp"

namespace braingraph {

// Inference for any trained family. Read-only; safe to call concurrently.
Prediction predict(const TrainedModel& model, const BrainGraph& graph);

// Checkpoint directory: spec.csv, history.csv and one param_<name>.csv per tensor.
void save_checkpoint(const TrainedModel& model, const std::filesystem::path& dir);
TrainedModel load_checkpoint(const std::filesystem::path& dir);

void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);

}  // namespace braingraph
