#pragma once

#include <vector>

#include "braingraph/numerics/autodiff.hpp"
#include "braingraph/numerics/tensor.hpp"

namespace braingraph {

struct SvmOptions {
  double c = 1.0;
  double gamma = 0.0;  // 0 selects 1 / feature_count
  double tolerance = 1e-3;
  std::size_t max_iterations = 1000000;
};

struct SvmModel {
  Tensor support_vectors;              // [S, P]
  std::vector<double> coefficients;    // alpha_i * y_i with y in {-1, +1}
  double bias = 0.0;
  double gamma = 1.0;
  std::size_t iterations = 0;

  double decision(std::span<const double> x) const;
};

struct SvmSolution {
  SvmModel model;
  std::vector<double> alpha;  // one per training row
};

double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma);

// Soft-margin dual solved by SMO with maximal-violating-pair selection. labels are 0/1.
SvmSolution svm_rbf_train(const Tensor& features, const std::vector<int>& labels, const SvmOptions& options);

// Serialization through a ParameterSet: sv, coef, bias, gamma.
ParameterSet svm_to_parameters(const SvmModel& model);
SvmModel svm_from_parameters(const ParameterSet& params);

}  // namespace braingraph
