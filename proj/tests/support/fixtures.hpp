#pragma once

// Small random graphs and model configurations shared by the unit and acceptance suites.

#include <numeric>
#include <vector>

#include "braingraph/graph_construction/graph.hpp"
#include "braingraph/models/networks.hpp"
#include "braingraph/models/spec.hpp"
#include "braingraph/numerics/random.hpp"

namespace braingraph::testing {

inline Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng, double sd = 1.0) {
  Tensor t({r, c}, 0.0);
  for (auto& v : t.values()) v = rng.normal(0.0, sd);
  return t;
}

inline Adjacency random_raw_adjacency(std::size_t n, Rng& rng, double density = 0.5) {
  Adjacency a{Tensor({n, n}, 0.0), false};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.uniform() < density) a.values(i, j) = a.values(j, i) = rng.uniform(0.1, 1.0);
  return a;
}

// Static graph with FC-like features and a diffused or normalized adjacency.
inline BrainGraph random_static_graph(std::size_t n, Rng& rng, const DiffusionConfig& diffusion = {}) {
  BrainGraph g;
  g.kind = GraphKind::static_fc;
  g.adjacency = gdc_transform(random_raw_adjacency(n, rng), diffusion);
  g.node_features = random_matrix(n, n, rng, 0.5);
  for (std::size_t i = 0; i < n; ++i) g.node_features(i, i) = 0.0;
  g.label = static_cast<int>(rng.below(2));
  return g;
}

inline BrainGraph random_dynamic_graph(std::size_t n, std::size_t t, Rng& rng, bool adaptive) {
  BrainGraph g;
  g.kind = adaptive ? GraphKind::dynamic_adaptive : GraphKind::dynamic;
  if (!adaptive) g.adjacency = normalize_adjacency(random_raw_adjacency(n, rng));
  g.node_features = random_matrix(n, t, rng);
  g.label = static_cast<int>(rng.below(2));
  return g;
}

inline BrainGraph random_graph_for(Family f, std::size_t n, std::size_t t, Rng& rng) {
  switch (input_kind(f)) {
    case GraphKind::static_fc: return random_static_graph(n, rng);
    case GraphKind::dynamic: return random_dynamic_graph(n, t, rng, false);
    case GraphKind::dynamic_adaptive: return random_dynamic_graph(n, t, rng, true);
  }
  return {};
}

inline std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  rng.shuffle(p);
  return p;
}

// Row i of the result is row perm[i] of the input.
inline Tensor permute_rows(const Tensor& t, const std::vector<std::size_t>& perm) {
  Tensor out = t;
  const std::size_t width = t.size() / t.dim(0);
  for (std::size_t i = 0; i < perm.size(); ++i)
    for (std::size_t k = 0; k < width; ++k) out[i * width + k] = t[perm[i] * width + k];
  return out;
}

// (P A P^T, P X): node i of the result is node perm[i] of the input.
inline BrainGraph permute_graph(const BrainGraph& g, const std::vector<std::size_t>& perm) {
  BrainGraph out = g;
  out.node_features = permute_rows(g.node_features, perm);
  if (g.adjacency) {
    const std::size_t n = perm.size();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) out.adjacency->values(i, j) = g.adjacency->values(perm[i], perm[j]);
  }
  return out;
}

// The adaptive model's node embedding is indexed by node, so it moves with the nodes.
inline ParameterSet permute_node_parameters(const ParameterSet& params, const std::vector<std::size_t>& perm) {
  ParameterSet out;
  for (const auto& p : params) out.add(p.name, p.name == "adaptive.E" ? permute_rows(p.value, perm) : p.value);
  return out;
}

// Compact configuration of every neural family, sized for finite-difference checks.
inline ModelSpec small_spec(Family f, Readout readout = Readout::mean) {
  ModelSpec s;
  s.family = f;
  s.hidden_dim = 4;
  s.readout = readout;
  s.heads = 2;
  s.embedding_dim = 3;
  s.kernel_size = 3;
  s.cnn_stride = 2;
  s.num_layers = 2;
  return s;
}

inline const std::vector<Family>& neural_families() {
  static const std::vector<Family> f = {Family::gcn, Family::gat, Family::gin, Family::stgcn,
                                        Family::astgcn, Family::mlp, Family::cnn1d};
  return f;
}

inline const std::vector<Family>& graph_families() {
  static const std::vector<Family> f = {Family::gcn, Family::gat, Family::gin, Family::stgcn, Family::astgcn};
  return f;
}

}  // namespace braingraph::testing
