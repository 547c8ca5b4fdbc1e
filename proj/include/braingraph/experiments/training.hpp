#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>

#include "braingraph/datasets/dataset.hpp"
#include "braingraph/datasets/split.hpp"
#include "braingraph/experiments/config.hpp"
#include "braingraph/experiments/metrics.hpp"
#include "braingraph/models/model.hpp"

namespace braingraph {

using GraphSet = std::vector<BrainGraph>;

// Graph of subject `index` under `config`. Replaceable, e.g. to supply a known adjacency.
using GraphBuilder = std::function<BrainGraph(const Subject& subject, std::size_t index, const RunConfig& config)>;

// The representation the configured family consumes.
BrainGraph default_graph(const Subject& subject, std::size_t index, const RunConfig& config);

// Builds each distinct graph representation once and shares it between runs. Thread-safe.
class GraphCache {
 public:
  explicit GraphCache(const TimeSeriesDataset& dataset, GraphBuilder builder = default_graph);

  std::shared_ptr<const GraphSet> graphs(const RunConfig& config);
  const TimeSeriesDataset& dataset() const { return dataset_; }
  std::vector<int> labels() const { return dataset_.labels(); }

 private:
  const TimeSeriesDataset& dataset_;
  GraphBuilder builder_;
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<const GraphSet>> cache_;
};

// Key of the inputs a configuration sees; configs with equal keys share graphs.
std::string graph_key(const RunConfig& config);

// Mini-batch Adam on binary cross-entropy with early stopping on `validation`; the returned
// model holds the parameters of the lowest validation loss. svm_rbf is fit by SMO and scored
// with the mean hinge loss. Throws TrainingError on a non-finite loss.
TrainedModel train_model(const RunConfig& config, const GraphSet& graphs, const IndexList& train,
                         const IndexList& validation, std::uint64_t seed);

// Validation loss of the checkpoint the model carries.
double best_validation_loss(const TrainedModel& model);

// Mean BCE (neural) or hinge (svm) over `indices`.
double mean_loss(const TrainedModel& model, const GraphSet& graphs, const IndexList& indices);

Confusion evaluate(const TrainedModel& model, const GraphSet& graphs, const IndexList& indices);

}  // namespace braingraph
