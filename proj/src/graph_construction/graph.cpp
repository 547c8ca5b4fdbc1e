#include "braingraph/graph_construction/graph.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <set>

#include "braingraph/datasets/csv.hpp"
#include "braingraph/errors.hpp"

namespace braingraph {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMatrix> view(const Tensor& t) { return {t.data(), static_cast<Eigen::Index>(t.dim(0)), static_cast<Eigen::Index>(t.dim(1))}; }

Tensor from_eigen(const RowMatrix& m) {
  Tensor out({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())}, 0.0);
  std::copy(m.data(), m.data() + m.size(), out.data());
  return out;
}

void require_square(const Tensor& t, const char* what) {
  if (t.rank() != 2 || t.dim(0) != t.dim(1)) throw DimensionError(std::string(what) + " must be square, got " + shape_string(t.shape()));
}

}  // namespace

void DiffusionConfig::validate() const {
  if (order < 1) throw ConfigurationError("diffusion order K must be >= 1");
  if (scheme == DiffusionScheme::heat && !(t > 0.0 && std::isfinite(t))) throw ConfigurationError("heat kernel needs t > 0");
  if (scheme == DiffusionScheme::ppr && !(alpha > 0.0 && alpha <= 1.0)) throw ConfigurationError("ppr needs 0 < alpha <= 1");
  if (post_sparsify_keep && !(*post_sparsify_keep > 0.0 && *post_sparsify_keep <= 1.0)) {
    throw ConfigurationError("post_sparsify_keep must be in (0, 1]");
  }
}

std::string DiffusionConfig::describe() const {
  std::string s;
  switch (scheme) {
    case DiffusionScheme::none: return "none";
    case DiffusionScheme::heat: s = "heat(t=" + csv::format_double(t) + ")"; break;
    case DiffusionScheme::ppr: s = "ppr(alpha=" + csv::format_double(alpha) + ")"; break;
  }
  s += transition == Transition::sym ? ",sym" : ",rw";
  s += ",K=" + std::to_string(order);
  if (post_sparsify_keep) s += ",keep=" + csv::format_double(*post_sparsify_keep);
  return s;
}

DiffusionScheme parse_diffusion_scheme(const std::string& name) {
  if (name == "none") return DiffusionScheme::none;
  if (name == "heat") return DiffusionScheme::heat;
  if (name == "ppr") return DiffusionScheme::ppr;
  throw ConfigurationError("unknown diffusion scheme '" + name + "'");
}

Transition parse_transition(const std::string& name) {
  if (name == "sym") return Transition::sym;
  if (name == "rw") return Transition::rw;
  throw ConfigurationError("unknown transition '" + name + "'");
}

Tensor pearson_fc(const Tensor& x) {
  if (x.rank() != 2) throw DimensionError("pearson_fc expects a T x N matrix");
  const std::size_t t = x.dim(0), n = x.dim(1);
  if (t < 2) throw ContractError("pearson_fc needs at least 2 timepoints");
  RowMatrix centered = view(x);
  centered.rowwise() -= centered.colwise().mean();
  Eigen::VectorXd norms = centered.colwise().norm();
  std::vector<bool> constant(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double scale = view(x).col(static_cast<Eigen::Index>(j)).cwiseAbs().maxCoeff();
    constant[j] = norms(static_cast<Eigen::Index>(j)) <= 1e-12 * std::max(1.0, scale) * std::sqrt(static_cast<double>(t));
    centered.col(static_cast<Eigen::Index>(j)) /= constant[j] ? 1.0 : norms(static_cast<Eigen::Index>(j));
  }
  RowMatrix r = centered.transpose() * centered;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double& v = r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (i == j) {
        v = 1.0;
      } else if (constant[i] || constant[j]) {
        v = 0.0;
      } else {
        v = std::clamp(v, -1.0, 1.0);
      }
    }
  }
  // symmetric by construction up to summation order; copy the upper triangle down
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j)
      r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
  return from_eigen(r);
}

Adjacency proportional_threshold(const Tensor& fc, double keep_fraction, EdgeRanking ranking) {
  require_square(fc, "FC matrix");
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) throw ConfigurationError("keep_fraction must be in (0, 1]");
  const std::size_t n = fc.dim(0);
  struct Entry {
    double key;
    std::size_t i, j;
  };
  std::vector<Entry> entries;
  entries.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      entries.push_back({ranking == EdgeRanking::magnitude ? std::abs(fc(i, j)) : fc(i, j), i, j});
  const auto keep = std::min(entries.size(), static_cast<std::size_t>(std::ceil(keep_fraction * static_cast<double>(entries.size()) - 1e-9)));
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.key > b.key; });

  Adjacency out{Tensor({n, n}, 0.0), false};
  for (std::size_t e = 0; e < keep; ++e) {
    const auto& [key, i, j] = entries[e];
    const double w = std::max(0.0, fc(i, j));
    out.values(i, j) = out.values(j, i) = w;
  }
  return out;
}

Adjacency normalize_adjacency(const Adjacency& raw) {
  require_square(raw.values, "adjacency");
  const std::size_t n = raw.size();
  Tensor a = raw.values;
  for (std::size_t i = 0; i < n; ++i) a(i, i) += 1.0;
  std::vector<double> inv_sqrt(n);
  for (std::size_t i = 0; i < n; ++i) {
    double d = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (a(i, j) < 0.0) throw ContractError("adjacency weights must be non-negative");
      d += a(i, j);
    }
    inv_sqrt[i] = 1.0 / std::sqrt(d);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) *= inv_sqrt[i] * inv_sqrt[j];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) a(i, j) = a(j, i);
  return {std::move(a), true};
}

std::vector<double> diffusion_coefficients(const DiffusionConfig& cfg) {
  cfg.validate();
  std::vector<double> theta(cfg.order + 1);
  for (std::size_t k = 0; k <= cfg.order; ++k) {
    if (cfg.scheme == DiffusionScheme::heat) {
      theta[k] = std::exp(-cfg.t + static_cast<double>(k) * std::log(cfg.t) - std::lgamma(static_cast<double>(k) + 1.0));
    } else if (cfg.scheme == DiffusionScheme::ppr) {
      theta[k] = cfg.alpha * std::pow(1.0 - cfg.alpha, static_cast<double>(k));
    } else {
      theta[k] = k == 1 ? 1.0 : 0.0;
    }
  }
  return theta;
}

Adjacency gdc_transform(const Adjacency& raw, const DiffusionConfig& cfg) {
  cfg.validate();
  if (cfg.scheme == DiffusionScheme::none) return normalize_adjacency(raw);
  require_square(raw.values, "adjacency");
  const std::size_t n = raw.size();

  RowMatrix transition;
  if (cfg.transition == Transition::sym) {
    transition = view(normalize_adjacency(raw).values);
  } else {
    RowMatrix a = view(raw.values);
    a.diagonal().array() += 1.0;
    const Eigen::VectorXd degree = a.rowwise().sum();
    // T_rw = A D^-1 scales column j by 1/d_j
    transition = a * degree.cwiseInverse().asDiagonal();
  }

  const auto theta = diffusion_coefficients(cfg);
  RowMatrix power = RowMatrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  RowMatrix s = theta[0] * power;
  for (std::size_t k = 1; k <= cfg.order; ++k) {
    power = power * transition;
    s += theta[k] * power;
  }

  Tensor out = from_eigen(s);
  if (cfg.post_sparsify_keep) {
    Adjacency kept = proportional_threshold(out, *cfg.post_sparsify_keep);
    for (std::size_t i = 0; i < n; ++i) kept.values(i, i) = out(i, i);
    out = kept.values;
  }
  if (cfg.post_sparsify_keep || cfg.transition == Transition::sym) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) out(i, j) = out(j, i) = 0.5 * (out(i, j) + out(j, i));
  }
  return {std::move(out), true};
}

Tensor fc_node_features(const Tensor& fc) {
  Tensor features = fc;
  for (std::size_t i = 0; i < fc.dim(0); ++i) features(i, i) = 0.0;
  return features;
}

BrainGraph build_static_graph(const Subject& subject, const GraphOptions& options) {
  const Tensor fc = pearson_fc(subject.timecourses);
  BrainGraph g;
  g.adjacency = gdc_transform(proportional_threshold(fc, options.keep_fraction, options.ranking), options.diffusion);
  g.node_features = fc_node_features(fc);
  g.label = subject.label;
  g.kind = GraphKind::static_fc;
  return g;
}

BrainGraph build_static_graph(const Subject& subject, const Adjacency& raw, const DiffusionConfig& diffusion) {
  if (raw.size() != subject.num_rois()) throw DimensionError("adjacency size does not match ROI count");
  BrainGraph g;
  g.adjacency = gdc_transform(raw, diffusion);
  g.node_features = fc_node_features(pearson_fc(subject.timecourses));
  g.label = subject.label;
  return g;
}

BrainGraph build_dynamic_graph(const Subject& subject, const GraphOptions& options, bool adaptive) {
  BrainGraph g;
  g.node_features = subject.timecourses.transposed();
  g.label = subject.label;
  if (adaptive) {
    g.kind = GraphKind::dynamic_adaptive;
  } else {
    const Tensor fc = pearson_fc(subject.timecourses);
    g.adjacency = gdc_transform(proportional_threshold(fc, options.keep_fraction, options.ranking), options.diffusion);
    g.kind = GraphKind::dynamic;
  }
  return g;
}

Adjacency support_adjacency(const Tensor& weights) {
  require_square(weights, "weights");
  const std::size_t n = weights.dim(0);
  Adjacency out{Tensor({n, n}, 0.0), false};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && (weights(i, j) != 0.0 || weights(j, i) != 0.0)) out.values(i, j) = 1.0;
  return out;
}

std::size_t edge_count(const Adjacency& adjacency) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < adjacency.size(); ++i)
    for (std::size_t j = i + 1; j < adjacency.size(); ++j) count += adjacency.values(i, j) != 0.0;
  return count;
}

Adjacency degree_matched_rewire(const Adjacency& binary, Rng& rng, std::size_t swaps_per_edge) {
  const std::size_t n = binary.size();
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::set<std::pair<std::size_t, std::size_t>> present;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (binary.values(i, j) != 0.0) {
        edges.emplace_back(i, j);
        present.emplace(i, j);
      }
  auto ordered = [](std::size_t a, std::size_t b) { return std::make_pair(std::min(a, b), std::max(a, b)); };
  if (edges.size() >= 2) {
    for (std::size_t step = 0; step < swaps_per_edge * edges.size(); ++step) {
      const std::size_t a = rng.below(edges.size());
      std::size_t b = rng.below(edges.size() - 1);
      if (b >= a) ++b;
      auto [i, j] = edges[a];
      auto [k, l] = edges[b];
      if (rng.uniform() < 0.5) std::swap(k, l);
      // (i,j),(k,l) -> (i,l),(k,j) keeps all four degrees
      if (i == k || i == l || j == k || j == l) continue;
      const auto e1 = ordered(i, l), e2 = ordered(k, j);
      if (present.count(e1) || present.count(e2)) continue;
      present.erase(edges[a]);
      present.erase(edges[b]);
      present.insert(e1);
      present.insert(e2);
      edges[a] = e1;
      edges[b] = e2;
    }
  }
  Adjacency out{Tensor({n, n}, 0.0), false};
  for (const auto& [i, j] : edges) out.values(i, j) = out.values(j, i) = 1.0;
  return out;
}

void dump_graph(const BrainGraph& graph, const std::string& subject_id, const std::filesystem::path& dir) {
  if (graph.adjacency) csv::write_matrix(dir / ("graph_" + subject_id + ".csv"), graph.adjacency->values);
  csv::write_matrix(dir / ("features_" + subject_id + ".csv"), graph.node_features);
}

}  // namespace braingraph
