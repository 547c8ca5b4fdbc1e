#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "braingraph/datasets/dataset.hpp"
#include "braingraph/numerics/random.hpp"
#include "braingraph/numerics/tensor.hpp"

namespace braingraph {

struct Adjacency {
  Tensor values;  // N x N, non-negative
  bool normalized = false;

  std::size_t size() const { return values.dim(0); }
};

enum class GraphKind { static_fc, dynamic, dynamic_adaptive };

struct BrainGraph {
  std::optional<Adjacency> adjacency;  // absent for dynamic_adaptive
  Tensor node_features;                // static: N x N FC rows, dynamic: N x T
  int label = 0;
  GraphKind kind = GraphKind::static_fc;

  std::size_t num_nodes() const { return node_features.dim(0); }
};

enum class DiffusionScheme { none, heat, ppr };
enum class Transition { sym, rw };
enum class EdgeRanking { signed_value, magnitude };

struct DiffusionConfig {
  DiffusionScheme scheme = DiffusionScheme::none;
  double t = 1.0;      // heat
  double alpha = 0.15; // ppr
  Transition transition = Transition::sym;
  std::size_t order = 2;  // K, terms k = 0..K
  std::optional<double> post_sparsify_keep;

  static DiffusionConfig heat_kernel(double t = 1.0, std::size_t order = 2) {
    DiffusionConfig c;
    c.scheme = DiffusionScheme::heat;
    c.t = t;
    c.order = order;
    return c;
  }
  static DiffusionConfig pagerank(double alpha, std::size_t order = 2) {
    DiffusionConfig c;
    c.scheme = DiffusionScheme::ppr;
    c.alpha = alpha;
    c.order = order;
    return c;
  }

  void validate() const;
  std::string describe() const;
};

DiffusionScheme parse_diffusion_scheme(const std::string& name);
Transition parse_transition(const std::string& name);

// Pearson correlation between the columns of a T x N matrix.
Tensor pearson_fc(const Tensor& timecourses);

// Keeps the top ceil(keep_fraction * N(N-1)/2) off-diagonal pairs; negatives clamped to zero.
Adjacency proportional_threshold(const Tensor& fc, double keep_fraction,
                                 EdgeRanking ranking = EdgeRanking::signed_value);

// D^-1/2 (A + I) D^-1/2
Adjacency normalize_adjacency(const Adjacency& raw);

Adjacency gdc_transform(const Adjacency& raw, const DiffusionConfig& config);

// Diffusion coefficients theta_0..theta_K for the configured scheme.
std::vector<double> diffusion_coefficients(const DiffusionConfig& config);

struct GraphOptions {
  double keep_fraction = 0.2;
  DiffusionConfig diffusion;
  EdgeRanking ranking = EdgeRanking::signed_value;
};

// FC rows with a zeroed diagonal.
Tensor fc_node_features(const Tensor& fc);

BrainGraph build_static_graph(const Subject& subject, const GraphOptions& options);
// Static graph over a caller-supplied raw adjacency instead of the thresholded FC.
BrainGraph build_static_graph(const Subject& subject, const Adjacency& raw, const DiffusionConfig& diffusion);
BrainGraph build_dynamic_graph(const Subject& subject, const GraphOptions& options, bool adaptive);

// Binary mask of the nonzero off-diagonal entries.
Adjacency support_adjacency(const Tensor& weights);

// Degree-preserving randomization of a binary symmetric graph by double edge swaps.
Adjacency degree_matched_rewire(const Adjacency& binary, Rng& rng, std::size_t swaps_per_edge = 10);

// Number of nonzero off-diagonal pairs (i < j).
std::size_t edge_count(const Adjacency& adjacency);

// graph_<id>.csv (adjacency) and features_<id>.csv.
void dump_graph(const BrainGraph& graph, const std::string& subject_id, const std::filesystem::path& dir);

}  // namespace braingraph
