#include "braingraph/datasets/synthetic.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdio>

#include "braingraph/datasets/csv.hpp"
#include "braingraph/errors.hpp"
#include "braingraph/numerics/random.hpp"

namespace braingraph {

void SyntheticConfig::validate() const {
  if (num_rois < 4) throw ConfigurationError("synthetic data needs N >= 4");
  if (num_timepoints < 50) throw ConfigurationError("synthetic data needs T >= 50");
  if (num_subjects < 2) throw ConfigurationError("synthetic data needs at least 2 subjects");
  if (!(density > 0.0 && density < 1.0)) throw ConfigurationError("density must be in (0, 1)");
  if (!(effect >= 0.0) || !std::isfinite(effect)) throw ConfigurationError("effect must be >= 0");
  if (!(noise_std > 0.0) || !std::isfinite(noise_std)) throw ConfigurationError("noise_std must be > 0");
  if (!(planted_fraction > 0.0 && planted_fraction <= 1.0)) throw ConfigurationError("planted_fraction must be in (0, 1]");
  if (!(planted_scale > 0.0)) throw ConfigurationError("planted_scale must be > 0");
  if (!(spectral_radius > 0.0 && spectral_radius < 1.0)) throw ConfigurationError("spectral_radius must be in (0, 1)");
}

double spectral_radius(const Tensor& a) {
  const std::size_t n = a.dim(0);
  Eigen::MatrixXd m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m(i, j) = a(i, j);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

namespace {

using Pair = std::pair<std::size_t, std::size_t>;

std::vector<Pair> upper_pairs(std::size_t n) {
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  return pairs;
}

std::vector<Pair> choose_pairs(std::size_t n, double fraction, Rng rng) {
  auto pairs = upper_pairs(n);
  rng.shuffle(pairs);
  const auto count = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * pairs.size())));
  pairs.resize(std::min(count, pairs.size()));
  return pairs;
}

Tensor rescale(const Tensor& a, double target) {
  const double r = spectral_radius(a);
  Tensor out = a;
  for (auto& v : out.values()) v *= target / r;
  return out;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.num_rois;
  const Rng root(cfg.seed);
  const double sqrt_n = std::sqrt(static_cast<double>(n));

  SyntheticData out;
  out.base = Tensor({n, n}, 0.0);
  {
    Rng rng = root.stream("base");
    for (const auto& [i, j] : choose_pairs(n, cfg.density, rng.stream("pairs"))) {
      double w = 0.0;
      while (w == 0.0) w = rng.normal(0.0, 0.5 / sqrt_n);
      out.base(i, j) = out.base(j, i) = w;
    }
  }
  out.planted = Tensor({n, n}, 0.0);
  {
    Rng rng = root.stream("planted");
    for (const auto& [i, j] : choose_pairs(n, cfg.planted_fraction, rng.stream("pairs"))) {
      double w = 0.0;
      while (w == 0.0) w = rng.normal(0.0, cfg.planted_scale / sqrt_n);
      out.planted(i, j) = out.planted(j, i) = w;
    }
  }

  Tensor class1 = out.base;
  for (std::size_t k = 0; k < class1.size(); ++k) class1[k] += cfg.effect * out.planted[k];
  out.coupling[0] = rescale(out.base, cfg.spectral_radius);
  out.coupling[1] = rescale(class1, cfg.spectral_radius);

  TimeSeriesDataset& ds = out.dataset;
  ds.num_rois = n;
  ds.metadata.source = "synthetic";
  ds.metadata.generation_seed = cfg.seed;
  ds.subjects.resize(cfg.num_subjects);
  const std::size_t steps = cfg.burn_in + cfg.num_timepoints;
  std::vector<double> x(n), next(n);
  for (std::size_t s = 0; s < cfg.num_subjects; ++s) {
    Subject& subj = ds.subjects[s];
    char id[32];
    std::snprintf(id, sizeof id, "sub%05zu", s);
    subj.id = id;
    subj.label = static_cast<int>(s % 2);
    subj.site = "synthetic";
    subj.timecourses = Tensor({cfg.num_timepoints, n}, 0.0);
    const Tensor& a = out.coupling[static_cast<std::size_t>(subj.label)];
    Rng noise = root.stream("subject", s);
    std::fill(x.begin(), x.end(), 0.0);
    for (std::size_t t = 0; t < steps; ++t) {
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += a(i, j) * x[j];
        next[i] = acc + noise.normal(0.0, cfg.noise_std);
      }
      std::swap(x, next);
      if (t >= cfg.burn_in) {
        for (std::size_t i = 0; i < n; ++i) subj.timecourses(t - cfg.burn_in, i) = x[i];
      }
    }
    zscore_columns(subj.timecourses);
  }
  ds.validate();
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> planted_pairs(const SyntheticData& data) {
  std::vector<Pair> pairs;
  for (const auto& [i, j] : upper_pairs(data.planted.dim(0)))
    if (data.planted(i, j) != 0.0) pairs.emplace_back(i, j);
  return pairs;
}

std::filesystem::path write_synthetic(const SyntheticData& data, const SyntheticConfig& cfg,
                                      const std::filesystem::path& dir) {
  const auto manifest = write_dataset(data.dataset, dir);
  csv::write_matrix(dir / "groundtruth_adjacency_class0.csv", data.coupling[0]);
  csv::write_matrix(dir / "groundtruth_adjacency_class1.csv", data.coupling[1]);
  csv::Table meta;
  meta.header = {"key", "value"};
  auto put = [&meta](const std::string& k, const std::string& v) { meta.rows.push_back({k, v}); };
  put("num_subjects", std::to_string(cfg.num_subjects));
  put("num_rois", std::to_string(cfg.num_rois));
  put("num_timepoints", std::to_string(cfg.num_timepoints));
  put("effect", csv::format_double(cfg.effect));
  put("noise_std", csv::format_double(cfg.noise_std));
  put("density", csv::format_double(cfg.density));
  put("seed", std::to_string(cfg.seed));
  put("planted_fraction", csv::format_double(cfg.planted_fraction));
  put("planted_scale", csv::format_double(cfg.planted_scale));
  put("spectral_radius", csv::format_double(cfg.spectral_radius));
  put("burn_in", std::to_string(cfg.burn_in));
  csv::write_table(dir / "meta.csv", meta);
  return manifest;
}

}  // namespace braingraph
