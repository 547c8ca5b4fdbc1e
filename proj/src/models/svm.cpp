#include "braingraph/models/svm.hpp"

#include <cmath>
#include <limits>

#include "braingraph/errors.hpp"

namespace braingraph {

double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma) {
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) d += (a[k] - b[k]) * (a[k] - b[k]);
  return std::exp(-gamma * d);
}

double SvmModel::decision(std::span<const double> x) const {
  const std::size_t p = support_vectors.dim(1);
  if (x.size() != p) throw ContractError("svm: feature length " + std::to_string(x.size()) + ", expected " + std::to_string(p));
  double f = bias;
  for (std::size_t s = 0; s < coefficients.size(); ++s) {
    f += coefficients[s] * rbf_kernel(support_vectors.values().subspan(s * p, p), x, gamma);
  }
  return f;
}

SvmSolution svm_rbf_train(const Tensor& x, const std::vector<int>& labels, const SvmOptions& opt) {
  if (x.rank() != 2) throw DimensionError("svm features must be a matrix");
  const std::size_t m = x.dim(0), p = x.dim(1);
  if (labels.size() != m) throw DimensionError("svm: label count differs from rows");
  if (m < 2) throw ConfigurationError("svm needs at least 2 samples");
  if (!(opt.c > 0.0)) throw ConfigurationError("svm C must be positive");
  std::vector<double> y(m);
  bool seen[2] = {false, false};
  for (std::size_t i = 0; i < m; ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw DataError("svm labels must be 0 or 1");
    seen[labels[i]] = true;
    y[i] = labels[i] == 1 ? 1.0 : -1.0;
  }
  if (!seen[0] || !seen[1]) throw ConfigurationError("svm training data contains a single class");
  const double gamma = opt.gamma > 0.0 ? opt.gamma : 1.0 / static_cast<double>(p);

  std::vector<double> k(m * m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i; j < m; ++j)
      k[i * m + j] = k[j * m + i] = rbf_kernel(x.values().subspan(i * p, p), x.values().subspan(j * p, p), gamma);
  auto q = [&](std::size_t i, std::size_t j) { return y[i] * y[j] * k[i * m + j]; };

  // Dual: min 0.5 a'Qa - e'a, 0 <= a <= C, y'a = 0. grad = Qa - e.
  std::vector<double> alpha(m, 0.0), grad(m, -1.0);
  const double c = opt.c;
  auto in_up = [&](std::size_t t) { return (y[t] > 0 && alpha[t] < c) || (y[t] < 0 && alpha[t] > 0); };
  auto in_low = [&](std::size_t t) { return (y[t] > 0 && alpha[t] > 0) || (y[t] < 0 && alpha[t] < c); };

  std::size_t iter = 0;
  for (; iter < opt.max_iterations; ++iter) {
    double g_max = -std::numeric_limits<double>::infinity(), g_min = std::numeric_limits<double>::infinity();
    std::size_t i = m, j = m;
    for (std::size_t t = 0; t < m; ++t) {
      const double v = -y[t] * grad[t];
      if (in_up(t) && v > g_max) {
        g_max = v;
        i = t;
      }
      if (in_low(t) && v < g_min) {
        g_min = v;
        j = t;
      }
    }
    if (i == m || j == m || g_max - g_min < opt.tolerance) break;

    const double old_i = alpha[i], old_j = alpha[j];
    double quad = q(i, i) + q(j, j) - 2.0 * y[i] * y[j] * q(i, j);
    if (quad <= 0.0) quad = 1e-12;
    if (y[i] != y[j]) {
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0 && alpha[j] < 0) {
        alpha[j] = 0;
        alpha[i] = diff;
      } else if (diff <= 0 && alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = -diff;
      }
      if (diff > 0 && alpha[i] > c) {
        alpha[i] = c;
        alpha[j] = c - diff;
      } else if (diff <= 0 && alpha[j] > c) {
        alpha[j] = c;
        alpha[i] = c + diff;
      }
    } else {
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c && alpha[i] > c) {
        alpha[i] = c;
        alpha[j] = sum - c;
      } else if (sum <= c && alpha[j] < 0) {
        alpha[j] = 0;
        alpha[i] = sum;
      }
      if (sum > c && alpha[j] > c) {
        alpha[j] = c;
        alpha[i] = sum - c;
      } else if (sum <= c && alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = sum;
      }
    }
    const double di = alpha[i] - old_i, dj = alpha[j] - old_j;
    for (std::size_t t = 0; t < m; ++t) grad[t] += q(t, i) * di + q(t, j) * dj;
  }

  // Bias: average over free vectors, else the midpoint of the feasible interval.
  double sum_free = 0.0, ub = std::numeric_limits<double>::infinity(), lb = -ub;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < m; ++t) {
    const double yg = y[t] * grad[t];
    if (alpha[t] > 0 && alpha[t] < c) {
      sum_free += yg;
      ++n_free;
    } else if ((y[t] > 0 && alpha[t] >= c) || (y[t] < 0 && alpha[t] <= 0)) {
      lb = std::max(lb, yg);
    } else {
      ub = std::min(ub, yg);
    }
  }
  const double rho = n_free ? sum_free / static_cast<double>(n_free) : 0.5 * (ub + lb);

  SvmSolution out;
  out.alpha = alpha;
  out.model.bias = -rho;
  out.model.gamma = gamma;
  out.model.iterations = iter;
  std::vector<double> sv;
  for (std::size_t t = 0; t < m; ++t) {
    if (alpha[t] <= 0.0) continue;
    out.model.coefficients.push_back(alpha[t] * y[t]);
    const auto row = x.values().subspan(t * p, p);
    sv.insert(sv.end(), row.begin(), row.end());
  }
  out.model.support_vectors = Tensor({out.model.coefficients.size(), p}, std::move(sv));
  return out;
}

ParameterSet svm_to_parameters(const SvmModel& model) {
  ParameterSet ps;
  ps.add("svm.sv", model.support_vectors);
  ps.add("svm.coef", Tensor({model.coefficients.size()}, model.coefficients));
  ps.add("svm.bias", Tensor::scalar(model.bias));
  ps.add("svm.gamma", Tensor::scalar(model.gamma));
  return ps;
}

SvmModel svm_from_parameters(const ParameterSet& ps) {
  SvmModel m;
  m.support_vectors = ps.get("svm.sv").value;
  const auto coef = ps.get("svm.coef").value.values();
  m.coefficients.assign(coef.begin(), coef.end());
  m.bias = ps.get("svm.bias").value.item();
  m.gamma = ps.get("svm.gamma").value.item();
  if (m.support_vectors.rank() != 2 || m.support_vectors.dim(0) != m.coefficients.size()) {
    throw SchemaError("svm parameters are inconsistent");
  }
  return m;
}

}  // namespace braingraph
