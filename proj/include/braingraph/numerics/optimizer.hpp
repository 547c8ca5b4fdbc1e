#pragma once

#include <cstddef>
#include <map>
#include <string>

#include "braingraph/numerics/autodiff.hpp"

namespace braingraph {

struct Moments {
  Tensor first;
  Tensor second;
};

// Adam with decoupled weight decay.
struct OptimizerState {
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t step = 0;
  std::map<std::string, Moments> moments;
};

// Applies one update to every parameter that has an entry in `grads`.
// Throws TrainingError if any gradient is non-finite; parameters are untouched in that case.
void adam_step(ParameterSet& params, const Gradients& grads, OptimizerState& state);

enum class InitScheme { glorot_uniform, zeros, normal };

struct Init {
  InitScheme scheme = InitScheme::glorot_uniform;
  double stddev = 1.0;  // normal only

  static Init glorot() { return {InitScheme::glorot_uniform, 0.0}; }
  static Init zeros() { return {InitScheme::zeros, 0.0}; }
  static Init normal(double stddev) { return {InitScheme::normal, stddev}; }
};

// fan_in/fan_out follow the layout conventions of the layers:
// [in, out] matrices, [out, in, k] convolution kernels, vectors use their length for both.
std::pair<double, double> glorot_fans(const Shape& shape);
double glorot_bound(const Shape& shape);

Tensor init_params(const Shape& shape, const Init& init, Rng& rng);

}  // namespace braingraph
