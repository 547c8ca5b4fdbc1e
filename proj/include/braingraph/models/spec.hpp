#pragma once

#include <map>
#include <string>
#include <vector>

#include "braingraph/graph_construction/graph.hpp"
#include "braingraph/numerics/autodiff.hpp"

namespace braingraph {

enum class Family { gcn, gat, gin, stgcn, astgcn, mlp, cnn1d, svm_rbf };
enum class Readout { mean, mean_cat_max, sum };
enum class RowNormalizer { softmax, sparsemax };

std::string to_string(Family f);
std::string to_string(Readout r);
std::string to_string(RowNormalizer r);
Family parse_family(const std::string& name);
Readout parse_readout(const std::string& name);
RowNormalizer parse_row_normalizer(const std::string& name);

const std::vector<Family>& all_families();
bool is_graph_family(Family f);  // gcn, gat, gin, stgcn, astgcn
bool is_neural(Family f);        // everything but svm_rbf

// Graph representation a family consumes.
GraphKind input_kind(Family f);

struct ModelSpec {
  Family family = Family::gcn;
  std::size_t num_layers = 2;  // graph layers; blocks for stgcn/astgcn; hidden layers for mlp
  std::size_t hidden_dim = 16;
  Readout readout = Readout::mean;
  std::size_t heads = 2;
  std::size_t embedding_dim = 8;
  RowNormalizer row_normalizer = RowNormalizer::softmax;
  std::size_t kernel_size = 3;
  std::size_t cnn_stride = 2;
  double dropout = 0.0;
  double svm_c = 1.0;
  double svm_gamma = 0.0;  // 0 selects 1 / feature_count

  void validate() const;
  std::map<std::string, std::string> to_map() const;
  static ModelSpec from_map(const std::map<std::string, std::string>& values);
  std::string describe() const;
};

// Dimensions of the inputs a model is built for.
struct InputShape {
  std::size_t num_nodes = 0;
  std::size_t feature_dim = 0;  // F for static graphs, T for dynamic inputs

  bool operator==(const InputShape&) const = default;
};

struct Prediction {
  double logit = 0.0;
  double probability = 0.5;
  int label = 0;

  static Prediction from_logit(double logit);
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainedModel {
  ModelSpec spec;
  InputShape input;
  ParameterSet parameters;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
};

}  // namespace braingraph
