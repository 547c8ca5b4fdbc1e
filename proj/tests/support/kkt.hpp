#pragma once

// Independent optimality check for a trained soft-margin SVM.

#include <algorithm>
#include <cmath>
#include <vector>

#include "braingraph/models/svm.hpp"

namespace braingraph::testing {

struct KktReport {
  double residual = 0.0;       // worst margin-condition violation
  double equality = 0.0;       // |sum alpha_i y_i|
  double box = 0.0;            // worst excursion outside [0, C]
};

inline KktReport kkt_report(const Tensor& x, const std::vector<int>& labels, const SvmSolution& sol, double c) {
  KktReport r;
  const std::size_t m = x.dim(0), p = x.dim(1);
  for (std::size_t i = 0; i < m; ++i) {
    const double y = labels[i] == 1 ? 1.0 : -1.0;
    const double a = sol.alpha[i];
    r.equality += a * y;
    r.box = std::max({r.box, -a, a - c});
    const double margin = y * sol.model.decision(x.values().subspan(i * p, p));
    double violation = 0.0;
    if (a <= 1e-12) {
      violation = std::max(0.0, 1.0 - margin);
    } else if (a >= c - 1e-12) {
      violation = std::max(0.0, margin - 1.0);
    } else {
      violation = std::abs(margin - 1.0);
    }
    r.residual = std::max(r.residual, violation);
  }
  r.equality = std::abs(r.equality);
  return r;
}

}  // namespace braingraph::testing
