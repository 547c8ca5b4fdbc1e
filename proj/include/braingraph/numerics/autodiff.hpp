#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "braingraph/numerics/random.hpp"
#include "braingraph/numerics/tensor.hpp"

namespace braingraph {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; only valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

struct Parameter {
  std::string name;
  Tensor value;
};

// Named trainable tensors in insertion order.
class ParameterSet {
 public:
  Parameter& add(std::string name, Tensor value);
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.contains(name); }

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::deque<Parameter> params_;
  std::map<std::string, std::size_t> index_;
};

using Gradients = std::map<std::string, Tensor>;

// Records primitive operations in evaluation order; backward() replays them in reverse.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& grad_output)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Marks a parameter for differentiation. Marking the same name twice returns the same node.
  Var parameter(const Parameter& p);
  Var parameter(const std::string& name, const Tensor& value);

  // Appends an op result. `fn` receives the gradient of the loss w.r.t. the result and must
  // push contributions to its inputs through grad_buffer(). Throws TrainingError on non-finite values.
  Var record(Tensor value, bool requires_grad, BackwardFn fn);

  const Tensor& value(Var v) const { return nodes_[v.id_].value; }
  bool requires_grad(Var v) const { return nodes_[v.id_].requires_grad; }
  bool any_requires_grad(std::initializer_list<Var> vars) const;

  // Gradient accumulator of `v`, allocated on first use, or nullptr if v is not differentiable.
  Tensor* grad_buffer(Var v);

  // Gradients of a scalar loss for every marked parameter; parameters the loss does
  // not depend on receive zeros.
  Gradients backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    BackwardFn backward;
    bool requires_grad = false;
  };

  std::deque<Node> nodes_;
  std::map<std::string, std::size_t> params_;
};

// Differentiable primitives. All operands must live on the same tape.
namespace ad {

Var matmul(Var a, Var b);
Var transpose(Var a);
Var reshape(Var a, Shape shape);

// Equal shapes, or either operand a scalar.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);

// x[..., n] + b[n] (row broadcast over the last axis).
Var add_bias(Var x, Var b);
// x[B, C, T] + b[C] or x[C, T] + b[C].
Var add_channel_bias(Var x, Var b);

Var relu(Var a);
Var leaky_relu(Var a, double slope);
Var tanh(Var a);
Var sigmoid(Var a);

enum class UnaryOp { relu, leaky_relu, tanh, sigmoid };
enum class BinaryOp { add, mul };
Var elementwise(UnaryOp op, Var a, double slope = 0.01);
Var elementwise(BinaryOp op, Var a, Var b);

enum class ReduceOp { sum, mean, max };
// Removes `axis`. Max routes its gradient to the first maximal element.
Var reduce(ReduceOp op, Var t, std::size_t axis);
Var sum(Var t, std::size_t axis);
Var mean(Var t, std::size_t axis);
Var max(Var t, std::size_t axis);
Var sum_all(Var t);

// Concatenates rank-1 tensors.
Var concat(const std::vector<Var>& parts);

struct Conv1dOptions {
  std::size_t stride = 1;
  std::size_t dilation = 1;
  std::size_t padding = 0;
};
std::size_t conv1d_output_length(std::size_t length, std::size_t kernel, const Conv1dOptions& opt);
// Cross-correlation. x is [C_in, T] or [B, C_in, T]; kernels are [C_out, C_in, k].
Var conv1d(Var x, Var kernels, const Conv1dOptions& opt = {});

// out[b, o, t] = sum_c x[b, c, t] * w[c, o]; x is [B, C, T], w is [C, C_out].
Var channel_mix(Var x, Var w);

// out[i, j] = s[i] + t[j].
Var outer_sum(Var s, Var t);

// Softmax over each row restricted to entries where mask is nonzero; other entries are 0.
Var masked_softmax_rows(Var x, const Tensor& mask);
Var softmax_rows(Var x);
// Row-wise Euclidean projection onto the probability simplex.
Var sparsemax_rows(Var x);

// Numerically stable binary cross-entropy of a scalar logit against label 0/1.
Var bce_with_logits(Var logit, double label);

// Inverted dropout; identity when rate == 0.
Var dropout(Var x, double rate, Rng& rng);

}  // namespace ad

// Forward-only sparsemax of a vector (also used by the differentiable op).
std::vector<double> sparsemax(std::span<const double> z);

}  // namespace braingraph
