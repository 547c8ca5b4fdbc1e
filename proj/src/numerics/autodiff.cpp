#include "braingraph/numerics/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "braingraph/errors.hpp"

namespace braingraph {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

ConstMap as_matrix(const Tensor& t) { return ConstMap(t.data(), t.dim(0), t.dim(1)); }
MutMap as_matrix(Tensor& t) { return MutMap(t.data(), t.dim(0), t.dim(1)); }

Tape& same_tape(Var a, Var b) {
  if (!a.valid() || !b.valid()) throw ContractError("operation on an empty Var");
  if (a.tape() != b.tape()) throw ContractError("operands recorded on different tapes");
  return *a.tape();
}

Tape& tape_of(Var a) {
  if (!a.valid()) throw ContractError("operation on an empty Var");
  return *a.tape();
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_string(t.shape()));
  }
}

template <typename Fwd, typename Deriv>
Var unary(Var a, Fwd fwd, Deriv deriv) {
  Tape& tape = tape_of(a);
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fwd(x[i]);
  return tape.record(std::move(out), tape.requires_grad(a), [a, deriv](Tape& t, const Tensor& g) {
    Tensor* ga = t.grad_buffer(a);
    if (!ga) return;
    const Tensor& x = a.value();
    for (std::size_t i = 0; i < x.size(); ++i) (*ga)[i] += g[i] * deriv(x[i]);
  });
}

enum class Broadcast { same, a_scalar, b_scalar };

Broadcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::same;
  if (a.size() == 1 && a.rank() == 0) return Broadcast::a_scalar;
  if (b.size() == 1 && b.rank() == 0) return Broadcast::b_scalar;
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_string(a.shape()) + " and " +
                       shape_string(b.shape()));
}

// Splits `shape` around `axis` into (outer, length, inner) extents.
struct AxisSplit {
  std::size_t outer = 1, length = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.length = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Var / ParameterSet / Tape

const Tensor& Var::value() const {
  if (!tape_) throw ContractError("value() of an empty Var");
  return tape_->value(*this);
}

Parameter& ParameterSet::add(std::string name, Tensor value) {
  if (index_.contains(name)) throw ContractError("duplicate parameter " + name);
  index_.emplace(name, params_.size());
  params_.push_back(Parameter{std::move(name), std::move(value)});
  return params_.back();
}

Parameter& ParameterSet::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter " + name);
  return params_[it->second];
}

const Parameter& ParameterSet::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter " + name);
  return params_[it->second];
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

Var Tape::constant(Tensor value) { return record(std::move(value), false, nullptr); }

Var Tape::parameter(const Parameter& p) { return parameter(p.name, p.value); }

Var Tape::parameter(const std::string& name, const Tensor& value) {
  if (auto it = params_.find(name); it != params_.end()) return Var(this, it->second);
  Var v = record(value, true, nullptr);
  params_.emplace(name, v.id_);
  return v;
}

Var Tape::record(Tensor value, bool requires_grad, BackwardFn fn) {
  if (!value.all_finite()) {
    throw TrainingError("non-finite value produced at tape position " + std::to_string(nodes_.size()));
  }
  nodes_.push_back(Node{std::move(value), Tensor{}, std::move(fn), requires_grad});
  return Var(this, nodes_.size() - 1);
}

bool Tape::any_requires_grad(std::initializer_list<Var> vars) const {
  return std::any_of(vars.begin(), vars.end(), [this](Var v) { return requires_grad(v); });
}

Tensor* Tape::grad_buffer(Var v) {
  Node& node = nodes_[v.id_];
  if (!node.requires_grad) return nullptr;
  if (node.grad.shape() != node.value.shape() || node.grad.empty() != node.value.empty()) {
    node.grad = Tensor(node.value.shape(), 0.0);
  }
  return &node.grad;
}

Gradients Tape::backward(Var loss) {
  if (loss.tape() != this) throw ContractError("loss belongs to another tape");
  if (loss.value().size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " + shape_string(loss.shape()));
  }
  for (auto& node : nodes_) node.grad = Tensor{};
  if (Tensor* g = grad_buffer(loss)) (*g)[0] = 1.0;

  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.backward || node.grad.empty()) continue;
    node.backward(*this, node.grad);
  }

  Gradients grads;
  for (const auto& [name, id] : params_) {
    const Node& node = nodes_[id];
    Tensor g = node.grad.empty() ? Tensor(node.value.shape(), 0.0) : node.grad;
    if (!g.all_finite()) throw TrainingError("non-finite gradient for parameter " + name);
    grads.emplace(name, std::move(g));
  }
  return grads;
}

// ---------------------------------------------------------------------------
// primitives

namespace ad {

Var matmul(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  require_rank(x, 2, "matmul");
  require_rank(y, 2, "matmul");
  if (x.dim(1) != y.dim(0)) {
    throw DimensionError("matmul: inner dimensions differ, " + shape_string(x.shape()) + " x " +
                         shape_string(y.shape()));
  }
  Tensor out(Shape{x.dim(0), y.dim(1)});
  as_matrix(out).noalias() = as_matrix(x) * as_matrix(y);
  return tape.record(std::move(out), tape.any_requires_grad({a, b}), [a, b](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_buffer(a)) as_matrix(*ga).noalias() += as_matrix(g) * as_matrix(b.value()).transpose();
    if (Tensor* gb = t.grad_buffer(b)) as_matrix(*gb).noalias() += as_matrix(a.value()).transpose() * as_matrix(g);
  });
}

Var transpose(Var a) {
  Tape& tape = tape_of(a);
  require_rank(a.value(), 2, "transpose");
  return tape.record(a.value().transposed(), tape.requires_grad(a), [a](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_buffer(a)) as_matrix(*ga) += as_matrix(g).transpose();
  });
}

Var reshape(Var a, Shape shape) {
  Tape& tape = tape_of(a);
  return tape.record(a.value().reshaped(std::move(shape)), tape.requires_grad(a), [a](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_buffer(a))
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
  });
}

Var add(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  const Broadcast kind = broadcast_kind(x, y, "add");
  Tensor out = kind == Broadcast::a_scalar ? y : x;
  if (kind == Broadcast::same) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += y[i];
  } else {
    const double s = kind == Broadcast::a_scalar ? x[0] : y[0];
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += s;
  }
  return tape.record(std::move(out), tape.any_requires_grad({a, b}), [a, b, kind](Tape& t, const Tensor& g) {
    auto push = [&](Var v, bool scalar) {
      Tensor* gv = t.grad_buffer(v);
      if (!gv) return;
      if (scalar) {
        (*gv)[0] += std::accumulate(g.values().begin(), g.values().end(), 0.0);
      } else {
        for (std::size_t i = 0; i < g.size(); ++i) (*gv)[i] += g[i];
      }
    };
    push(a, kind == Broadcast::a_scalar);
    push(b, kind == Broadcast::b_scalar);
  });
}

Var sub(Var a, Var b) { return add(a, scale(b, -1.0)); }

Var mul(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  const Broadcast kind = broadcast_kind(x, y, "mul");
  Tensor out = kind == Broadcast::a_scalar ? y : x;
  if (kind == Broadcast::same) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= y[i];
  } else {
    const double s = kind == Broadcast::a_scalar ? x[0] : y[0];
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
  }
  return tape.record(std::move(out), tape.any_requires_grad({a, b}), [a, b, kind](Tape& t, const Tensor& g) {
    const Tensor& x = a.value();
    const Tensor& y = b.value();
    if (Tensor* ga = t.grad_buffer(a)) {
      if (kind == Broadcast::same) {
        for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * y[i];
      } else if (kind == Broadcast::a_scalar) {
        for (std::size_t i = 0; i < g.size(); ++i) (*ga)[0] += g[i] * y[i];
      } else {
        for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * y[0];
      }
    }
    if (Tensor* gb = t.grad_buffer(b)) {
      if (kind == Broadcast::same) {
        for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * x[i];
      } else if (kind == Broadcast::b_scalar) {
        for (std::size_t i = 0; i < g.size(); ++i) (*gb)[0] += g[i] * x[i];
      } else {
        for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * x[0];
      }
    }
  });
}

Var scale(Var a, double factor) {
  return unary(a, [factor](double v) { return v * factor; }, [factor](double) { return factor; });
}

Var add_scalar(Var a, double offset) {
  return unary(a, [offset](double v) { return v + offset; }, [](double) { return 1.0; });
}

Var add_bias(Var x, Var b) {
  Tape& tape = same_tape(x, b);
  const Tensor& v = x.value();
  const Tensor& bias = b.value();
  require_rank(bias, 1, "add_bias");
  if (v.rank() == 0 || v.shape().back() != bias.dim(0)) {
    throw DimensionError("add_bias: " + shape_string(v.shape()) + " + " + shape_string(bias.shape()));
  }
  const std::size_t n = bias.dim(0);
  Tensor out = v;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bias[i % n];
  return tape.record(std::move(out), tape.any_requires_grad({x, b}), [x, b, n](Tape& t, const Tensor& g) {
    if (Tensor* gx = t.grad_buffer(x))
      for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
    if (Tensor* gb = t.grad_buffer(b))
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i % n] += g[i];
  });
}

Var add_channel_bias(Var x, Var b) {
  Tape& tape = same_tape(x, b);
  const Tensor& v = x.value();
  const Tensor& bias = b.value();
  require_rank(bias, 1, "add_channel_bias");
  if (v.rank() != 2 && v.rank() != 3) throw DimensionError("add_channel_bias: x must be [C,T] or [B,C,T]");
  const std::size_t channel_axis = v.rank() - 2;
  if (v.dim(channel_axis) != bias.dim(0)) {
    throw DimensionError("add_channel_bias: " + shape_string(v.shape()) + " + " + shape_string(bias.shape()));
  }
  const std::size_t channels = bias.dim(0);
  const std::size_t length = v.shape().back();
  Tensor out = v;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bias[(i / length) % channels];
  return tape.record(std::move(out), tape.any_requires_grad({x, b}),
                     [x, b, channels, length](Tape& t, const Tensor& g) {
                       if (Tensor* gx = t.grad_buffer(x))
                         for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
                       if (Tensor* gb = t.grad_buffer(b))
                         for (std::size_t i = 0; i < g.size(); ++i) (*gb)[(i / length) % channels] += g[i];
                     });
}

Var relu(Var a) {
  return unary(a, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

Var leaky_relu(Var a, double slope) {
  return unary(
      a, [slope](double v) { return v > 0.0 ? v : slope * v; }, [slope](double v) { return v > 0.0 ? 1.0 : slope; });
}

Var tanh(Var a) {
  return unary(
      a, [](double v) { return std::tanh(v); },
      [](double v) {
        const double y = std::tanh(v);
        return 1.0 - y * y;
      });
}

namespace {
double stable_sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}
}  // namespace

Var sigmoid(Var a) {
  return unary(a, stable_sigmoid, [](double v) {
    const double s = stable_sigmoid(v);
    return s * (1.0 - s);
  });
}

Var elementwise(UnaryOp op, Var a, double slope) {
  switch (op) {
    case UnaryOp::relu:
      return relu(a);
    case UnaryOp::leaky_relu:
      return leaky_relu(a, slope);
    case UnaryOp::tanh:
      return tanh(a);
    case UnaryOp::sigmoid:
      return sigmoid(a);
  }
  throw ContractError("unknown unary op");
}

Var elementwise(BinaryOp op, Var a, Var b) { return op == BinaryOp::add ? add(a, b) : mul(a, b); }

Var reduce(ReduceOp op, Var t, std::size_t axis) {
  Tape& tape = tape_of(t);
  const Tensor& x = t.value();
  if (axis >= x.rank()) {
    throw DimensionError("reduce: axis " + std::to_string(axis) + " invalid for " + shape_string(x.shape()));
  }
  const AxisSplit s = split_axis(x.shape(), axis);
  if (s.length == 0) throw DimensionError("reduce over an empty axis");
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  Tensor out(out_shape);
  std::vector<std::size_t> argmax;
  if (op == ReduceOp::max) argmax.resize(out.size());

  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.length * s.inner + in;
      const std::size_t dst = o * s.inner + in;
      if (op == ReduceOp::max) {
        std::size_t best = 0;
        double best_value = x[base];
        for (std::size_t l = 1; l < s.length; ++l) {
          const double v = x[base + l * s.inner];
          if (v > best_value) {
            best_value = v;
            best = l;
          }
        }
        out[dst] = best_value;
        argmax[dst] = best;
      } else {
        double acc = 0.0;
        for (std::size_t l = 0; l < s.length; ++l) acc += x[base + l * s.inner];
        out[dst] = op == ReduceOp::mean ? acc / static_cast<double>(s.length) : acc;
      }
    }
  }

  return tape.record(std::move(out), tape.requires_grad(t),
                     [t, op, s, argmax = std::move(argmax)](Tape& tp, const Tensor& g) {
                       Tensor* gt = tp.grad_buffer(t);
                       if (!gt) return;
                       const double w = op == ReduceOp::mean ? 1.0 / static_cast<double>(s.length) : 1.0;
                       for (std::size_t o = 0; o < s.outer; ++o) {
                         for (std::size_t in = 0; in < s.inner; ++in) {
                           const std::size_t base = o * s.length * s.inner + in;
                           const std::size_t dst = o * s.inner + in;
                           if (op == ReduceOp::max) {
                             (*gt)[base + argmax[dst] * s.inner] += g[dst];
                           } else {
                             for (std::size_t l = 0; l < s.length; ++l) (*gt)[base + l * s.inner] += w * g[dst];
                           }
                         }
                       }
                     });
}

Var sum(Var t, std::size_t axis) { return reduce(ReduceOp::sum, t, axis); }
Var mean(Var t, std::size_t axis) { return reduce(ReduceOp::mean, t, axis); }
Var max(Var t, std::size_t axis) { return reduce(ReduceOp::max, t, axis); }

Var sum_all(Var t) {
  const Tensor& x = t.value();
  return reduce(ReduceOp::sum, reshape(t, Shape{x.size()}), 0);
}

Var concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("concat of nothing");
  Tape& tape = tape_of(parts.front());
  std::vector<double> values;
  bool needs_grad = false;
  for (Var p : parts) {
    if (p.tape() != &tape) throw ContractError("concat operands on different tapes");
    require_rank(p.value(), 1, "concat");
    values.insert(values.end(), p.value().values().begin(), p.value().values().end());
    needs_grad = needs_grad || tape.requires_grad(p);
  }
  return tape.record(Tensor::vector(std::move(values)), needs_grad, [parts](Tape& t, const Tensor& g) {
    std::size_t offset = 0;
    for (Var p : parts) {
      const std::size_t n = p.value().size();
      if (Tensor* gp = t.grad_buffer(p))
        for (std::size_t i = 0; i < n; ++i) (*gp)[i] += g[offset + i];
      offset += n;
    }
  });
}

std::size_t conv1d_output_length(std::size_t length, std::size_t kernel, const Conv1dOptions& opt) {
  if (opt.stride == 0 || opt.dilation == 0) throw DimensionError("conv1d: stride and dilation must be positive");
  const std::size_t span = opt.dilation * (kernel - 1) + 1;
  const std::size_t padded = length + 2 * opt.padding;
  if (kernel == 0 || span > padded) {
    throw DimensionError("conv1d: kernel span " + std::to_string(span) + " exceeds padded length " +
                         std::to_string(padded));
  }
  return (padded - span) / opt.stride + 1;
}

namespace {

// Output positions t in [lo, hi) whose source index t*stride + offset lies inside [0, length).
std::pair<std::size_t, std::size_t> valid_range(std::ptrdiff_t offset, std::size_t stride, std::size_t length,
                                                std::size_t out_length) {
  const auto st = static_cast<std::ptrdiff_t>(stride);
  std::ptrdiff_t lo = offset >= 0 ? 0 : (-offset + st - 1) / st;
  std::ptrdiff_t hi = (static_cast<std::ptrdiff_t>(length) - 1 - offset);
  hi = hi < 0 ? 0 : hi / st + 1;
  if (offset > static_cast<std::ptrdiff_t>(length) - 1) hi = 0;
  hi = std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(out_length));
  if (lo > hi) lo = hi;
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

}  // namespace

Var conv1d(Var x, Var kernels, const Conv1dOptions& opt) {
  Tape& tape = same_tape(x, kernels);
  const Tensor& in = x.value();
  const Tensor& w = kernels.value();
  require_rank(w, 3, "conv1d kernels");
  if (in.rank() != 2 && in.rank() != 3) throw DimensionError("conv1d: input must be [C,T] or [B,C,T]");
  const bool batched = in.rank() == 3;
  const std::size_t batch = batched ? in.dim(0) : 1;
  const std::size_t c_in = in.dim(in.rank() - 2);
  const std::size_t length = in.dim(in.rank() - 1);
  const std::size_t c_out = w.dim(0);
  const std::size_t k = w.dim(2);
  if (w.dim(1) != c_in) {
    throw DimensionError("conv1d: kernels " + shape_string(w.shape()) + " do not match input " +
                         shape_string(in.shape()));
  }
  const std::size_t out_len = conv1d_output_length(length, k, opt);
  Shape out_shape = batched ? Shape{batch, c_out, out_len} : Shape{c_out, out_len};
  Tensor out(out_shape);

  const std::size_t stride = opt.stride;
  for (std::size_t j = 0; j < k; ++j) {
    const std::ptrdiff_t offset =
        static_cast<std::ptrdiff_t>(j * opt.dilation) - static_cast<std::ptrdiff_t>(opt.padding);
    const auto [lo, hi] = valid_range(offset, stride, length, out_len);
    if (lo >= hi) continue;
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t o = 0; o < c_out; ++o) {
        double* dst = out.data() + (b * c_out + o) * out_len;
        for (std::size_t c = 0; c < c_in; ++c) {
          const double wv = w[(o * c_in + c) * k + j];
          const double* src = in.data() + (b * c_in + c) * length;
          for (std::size_t t = lo; t < hi; ++t) {
            dst[t] += wv * src[static_cast<std::ptrdiff_t>(t * stride) + offset];
          }
        }
      }
    }
  }

  return tape.record(
      std::move(out), tape.any_requires_grad({x, kernels}),
      [x, kernels, opt, batch, c_in, c_out, length, k, out_len](Tape& t, const Tensor& g) {
        Tensor* gx = t.grad_buffer(x);
        Tensor* gw = t.grad_buffer(kernels);
        const Tensor& in = x.value();
        const Tensor& w = kernels.value();
        const std::size_t stride = opt.stride;
        for (std::size_t j = 0; j < k; ++j) {
          const std::ptrdiff_t offset =
              static_cast<std::ptrdiff_t>(j * opt.dilation) - static_cast<std::ptrdiff_t>(opt.padding);
          const auto [lo, hi] = valid_range(offset, stride, length, out_len);
          if (lo >= hi) continue;
          for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t o = 0; o < c_out; ++o) {
              const double* go = g.data() + (b * c_out + o) * out_len;
              for (std::size_t c = 0; c < c_in; ++c) {
                const std::size_t wi = (o * c_in + c) * k + j;
                const std::size_t xi = (b * c_in + c) * length;
                if (gw) {
                  const double* src = in.data() + xi;
                  double acc = 0.0;
                  for (std::size_t tt = lo; tt < hi; ++tt) acc += go[tt] * src[static_cast<std::ptrdiff_t>(tt * stride) + offset];
                  (*gw)[wi] += acc;
                }
                if (gx) {
                  double* dst = gx->data() + xi;
                  const double wv = w[wi];
                  for (std::size_t tt = lo; tt < hi; ++tt) dst[static_cast<std::ptrdiff_t>(tt * stride) + offset] += wv * go[tt];
                }
              }
            }
          }
        }
      });
}

Var channel_mix(Var x, Var w) {
  Tape& tape = same_tape(x, w);
  const Tensor& in = x.value();
  const Tensor& weights = w.value();
  require_rank(in, 3, "channel_mix");
  require_rank(weights, 2, "channel_mix weights");
  const std::size_t batch = in.dim(0), c_in = in.dim(1), length = in.dim(2);
  if (weights.dim(0) != c_in) {
    throw DimensionError("channel_mix: " + shape_string(in.shape()) + " with weights " +
                         shape_string(weights.shape()));
  }
  const std::size_t c_out = weights.dim(1);
  Tensor out(Shape{batch, c_out, length});
  const ConstMap wm = as_matrix(weights);
  for (std::size_t b = 0; b < batch; ++b) {
    ConstMap xb(in.data() + b * c_in * length, c_in, length);
    MutMap ob(out.data() + b * c_out * length, c_out, length);
    ob.noalias() = wm.transpose() * xb;
  }
  return tape.record(std::move(out), tape.any_requires_grad({x, w}),
                     [x, w, batch, c_in, c_out, length](Tape& t, const Tensor& g) {
                       Tensor* gx = t.grad_buffer(x);
                       Tensor* gw = t.grad_buffer(w);
                       const ConstMap wm = as_matrix(w.value());
                       for (std::size_t b = 0; b < batch; ++b) {
                         ConstMap gb(g.data() + b * c_out * length, c_out, length);
                         if (gx) {
                           MutMap gxb(gx->data() + b * c_in * length, c_in, length);
                           gxb.noalias() += wm * gb;
                         }
                         if (gw) {
                           ConstMap xb(x.value().data() + b * c_in * length, c_in, length);
                           as_matrix(*gw).noalias() += xb * gb.transpose();
                         }
                       }
                     });
}

Var outer_sum(Var s, Var t) {
  Tape& tape = same_tape(s, t);
  const Tensor& a = s.value();
  const Tensor& b = t.value();
  if (a.size() == 0 || b.size() == 0 || a.rank() > 2 || b.rank() > 2) {
    throw DimensionError("outer_sum expects vectors");
  }
  const std::size_t m = a.size(), n = b.size();
  Tensor out(Shape{m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) = a[i] + b[j];
  return tape.record(std::move(out), tape.any_requires_grad({s, t}), [s, t, m, n](Tape& tp, const Tensor& g) {
    Tensor* gs = tp.grad_buffer(s);
    Tensor* gt = tp.grad_buffer(t);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double v = g[i * n + j];
        if (gs) (*gs)[i] += v;
        if (gt) (*gt)[j] += v;
      }
    }
  });
}

Var masked_softmax_rows(Var x, const Tensor& mask) {
  Tape& tape = tape_of(x);
  const Tensor& in = x.value();
  require_rank(in, 2, "softmax_rows");
  if (mask.shape() != in.shape()) throw DimensionError("softmax mask shape mismatch");
  const std::size_t m = in.dim(0), n = in.dim(1);
  Tensor out(in.shape());
  for (std::size_t i = 0; i < m; ++i) {
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (mask(i, j) != 0.0) top = std::max(top, in(i, j));
    if (!std::isfinite(top)) continue;  // empty row
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (mask(i, j) == 0.0) continue;
      out(i, j) = std::exp(in(i, j) - top);
      z += out(i, j);
    }
    for (std::size_t j = 0; j < n; ++j) out(i, j) /= z;
  }
  Tensor probs = tape.requires_grad(x) ? out : Tensor{};
  return tape.record(std::move(out), tape.requires_grad(x), [x, m, n, p = std::move(probs)](Tape& t, const Tensor& g) {
    Tensor* gx = t.grad_buffer(x);
    if (!gx) return;
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += p(i, j) * g(i, j);
      for (std::size_t j = 0; j < n; ++j) (*gx)(i, j) += p(i, j) * (g(i, j) - dot);
    }
  });
}

Var softmax_rows(Var x) { return masked_softmax_rows(x, Tensor(x.value().shape(), 1.0)); }

Var sparsemax_rows(Var x) {
  Tape& tape = tape_of(x);
  const Tensor& in = x.value();
  require_rank(in, 2, "sparsemax_rows");
  const std::size_t m = in.dim(0), n = in.dim(1);
  Tensor out(in.shape());
  for (std::size_t i = 0; i < m; ++i) {
    const auto row = sparsemax(std::span<const double>(in.data() + i * n, n));
    std::copy(row.begin(), row.end(), out.data() + i * n);
  }
  Tensor support = out;
  for (auto& v : support.values()) v = v > 0.0 ? 1.0 : 0.0;
  return tape.record(std::move(out), tape.requires_grad(x),
                     [x, m, n, support = std::move(support)](Tape& t, const Tensor& g) {
                       Tensor* gx = t.grad_buffer(x);
                       if (!gx) return;
                       for (std::size_t i = 0; i < m; ++i) {
                         double acc = 0.0, count = 0.0;
                         for (std::size_t j = 0; j < n; ++j) {
                           acc += support(i, j) * g(i, j);
                           count += support(i, j);
                         }
                         const double avg = acc / count;
                         for (std::size_t j = 0; j < n; ++j) (*gx)(i, j) += support(i, j) * (g(i, j) - avg);
                       }
                     });
}

Var bce_with_logits(Var logit, double label) {
  Tape& tape = tape_of(logit);
  const double z = logit.value().item();
  const double loss = std::max(z, 0.0) - z * label + std::log1p(std::exp(-std::abs(z)));
  return tape.record(Tensor::scalar(loss), tape.requires_grad(logit), [logit, label](Tape& t, const Tensor& g) {
    if (Tensor* gz = t.grad_buffer(logit)) (*gz)[0] += g[0] * (stable_sigmoid(logit.value().item()) - label);
  });
}

Var dropout(Var x, double rate, Rng& rng) {
  if (rate <= 0.0) return x;
  if (rate >= 1.0) throw ConfigurationError("dropout rate must be < 1");
  Tape& tape = tape_of(x);
  Tensor mask(x.value().shape());
  const double keep = 1.0 / (1.0 - rate);
  for (auto& v : mask.values()) v = rng.uniform() < rate ? 0.0 : keep;
  return mul(x, tape.constant(std::move(mask)));
}

}  // namespace ad

std::vector<double> sparsemax(std::span<const double> z) {
  const std::size_t n = z.size();
  if (n == 0) return {};
  std::vector<double> sorted(z.begin(), z.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  // support size k is the largest k with 1 + k * z_(k) > sum_{j<=k} z_(j)
  double cumulative = 0.0, support_sum = 0.0;
  std::size_t support = 0;
  for (std::size_t k = 1; k <= n; ++k) {
    cumulative += sorted[k - 1];
    if (1.0 + static_cast<double>(k) * sorted[k - 1] > cumulative) {
      support = k;
      support_sum = cumulative;
    }
  }
  const double tau = (support_sum - 1.0) / static_cast<double>(support);
  std::vector<double> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = std::max(z[i] - tau, 0.0);
  return p;
}

}  // namespace braingraph
