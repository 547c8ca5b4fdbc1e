#include "braingraph/models/networks.hpp"

#include <cmath>

#include "braingraph/errors.hpp"
#include "braingraph/numerics/optimizer.hpp"

namespace braingraph {

namespace {

std::string key(const std::string& prefix, std::size_t index, const std::string& name) {
  return prefix + "." + std::to_string(index) + "." + name;
}

class Builder {
 public:
  Builder(ParameterSet& params, Rng& rng) : params_(params), rng_(rng) {}

  void add(const std::string& name, const Shape& shape, const Init& init = Init::glorot()) {
    Rng local = rng_.stream(name);
    params_.add(name, init_params(shape, init, local));
  }
  void linear(const std::string& prefix, std::size_t in, std::size_t out) {
    add(prefix + ".W", {in, out});
    add(prefix + ".b", {out}, Init::zeros());
  }

 private:
  ParameterSet& params_;
  Rng& rng_;
};

struct Net {
  Tape& tape;
  const ParameterSet& params;
  const ForwardContext& ctx;
  double dropout_rate;

  Var p(const std::string& name) const { return tape.parameter(params.get(name)); }
  Var linear(Var x, const std::string& prefix) const { return ad::add_bias(ad::matmul(x, p(prefix + ".W")), p(prefix + ".b")); }
  Var drop(Var x) const {
    if (!ctx.training || dropout_rate <= 0.0) return x;
    if (!ctx.rng) throw ContractError("dropout during training needs an rng");
    return ad::dropout(x, dropout_rate, *ctx.rng);
  }
  Var head(Var features) const {
    return ad::add(ad::sum_all(ad::mul(features, p("head.W"))), p("head.b"));
  }
};

const Tensor& adjacency_of(const BrainGraph& g, const char* family) {
  if (!g.adjacency) throw ContractError(std::string(family) + " needs a graph with an adjacency");
  if (g.adjacency->size() != g.num_nodes()) throw ContractError("adjacency size differs from node count");
  return g.adjacency->values;
}

void expect_rows(const Tensor& features, const Tensor& weight, const char* family) {
  if (features.rank() != 2 || features.dim(1) != weight.dim(0)) {
    throw ContractError(std::string(family) + ": node features " + shape_string(features.shape()) +
                        " do not match input weights " + shape_string(weight.shape()));
  }
}

ad::Conv1dOptions same_padding(std::size_t k) { return {1, 1, (k - 1) / 2}; }

// Shared block stack of the spatio-temporal models; `support` mixes nodes at every time frame.
Var temporal_blocks(const Net& net, const ModelSpec& spec, Var support, Var x) {
  const std::size_t n = x.shape()[0], t = x.shape()[2];
  Var h = x;
  for (std::size_t b = 0; b < spec.num_layers; ++b) {
    const std::string pre = "block." + std::to_string(b);
    Var g = layers::gated_tcn(h, net.p(pre + ".tcn_a.W"), net.p(pre + ".tcn_a.b"), net.p(pre + ".tcn_b.W"),
                              net.p(pre + ".tcn_b.b"), same_padding(spec.kernel_size));
    const std::size_t c = spec.hidden_dim;
    Var mixed = ad::reshape(ad::matmul(support, ad::reshape(g, {n, c * t})), {n, c, t});
    h = ad::relu(ad::channel_mix(mixed, net.p(pre + ".graph.W")));
    h = ad::relu(ad::add_channel_bias(ad::channel_mix(h, net.p(pre + ".phi.W")), net.p(pre + ".phi.b")));
    h = net.drop(h);
  }
  return ad::mean(h, 2);
}

}  // namespace

namespace layers {

std::size_t readout_width(std::size_t features, Readout kind) {
  return kind == Readout::mean_cat_max ? 2 * features : features;
}

Var readout(Var h, Readout kind) {
  switch (kind) {
    case Readout::mean: return ad::mean(h, 0);
    case Readout::sum: return ad::sum(h, 0);
    case Readout::mean_cat_max: return ad::concat({ad::mean(h, 0), ad::max(h, 0)});
  }
  throw ContractError("unknown readout");
}

Tensor readout(const Tensor& h, Readout kind) {
  Tape tape;
  return readout(tape.constant(h), kind).value();
}

Var gat_attention(Var z, Var a_src, Var a_dst, const Tensor& mask) {
  Var scores = ad::outer_sum(ad::matmul(z, a_src), ad::matmul(z, a_dst));
  return ad::masked_softmax_rows(ad::leaky_relu(scores, 0.2), mask);
}

Var adaptive_adjacency(Var embedding, RowNormalizer normalizer) {
  Var logits = ad::relu(ad::matmul(embedding, ad::transpose(embedding)));
  Var rows = normalizer == RowNormalizer::softmax ? ad::softmax_rows(logits) : ad::sparsemax_rows(logits);
  return ad::add(embedding.tape()->constant(Tensor::identity(embedding.shape()[0])), rows);
}

Var gated_tcn(Var x, Var wa, Var ba, Var wb, Var bb, const ad::Conv1dOptions& opt) {
  Var filter = ad::tanh(ad::add_channel_bias(ad::conv1d(x, wa, opt), ba));
  Var gate = ad::sigmoid(ad::add_channel_bias(ad::conv1d(x, wb, opt), bb));
  return ad::mul(filter, gate);
}

}  // namespace layers

Tensor fc_lower_triangle(const Tensor& fc) {
  const std::size_t n = fc.dim(0);
  Tensor out({n * (n - 1) / 2}, 0.0);
  std::size_t k = 0;
  for (std::size_t i = 1; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) out[k++] = fc(i, j);
  return out;
}

std::size_t cnn1d_output_length(const ModelSpec& spec, std::size_t timepoints) {
  const ad::Conv1dOptions opt{spec.cnn_stride, 1, 0};
  if (timepoints < spec.kernel_size) {
    throw ConfigurationError("cnn1d: " + std::to_string(timepoints) + " timepoints shorter than kernel " +
                             std::to_string(spec.kernel_size));
  }
  const std::size_t first = ad::conv1d_output_length(timepoints, spec.kernel_size, opt);
  if (first < spec.kernel_size) {
    throw ConfigurationError("cnn1d: " + std::to_string(timepoints) + " timepoints too short for two convolutions");
  }
  return ad::conv1d_output_length(first, spec.kernel_size, opt);
}

InputShape input_shape(const ModelSpec& spec, const BrainGraph& sample) {
  InputShape s;
  s.num_nodes = sample.num_nodes();
  s.feature_dim = sample.node_features.dim(1);
  if (spec.family == Family::mlp || spec.family == Family::svm_rbf) s.feature_dim = s.num_nodes * (s.num_nodes - 1) / 2;
  return s;
}

ParameterSet init_parameters(const ModelSpec& spec, const InputShape& input, Rng& rng) {
  spec.validate();
  ParameterSet params;
  Builder b(params, rng);
  const std::size_t h = spec.hidden_dim, f = input.feature_dim;
  std::size_t head_in = layers::readout_width(h, spec.readout);

  switch (spec.family) {
    case Family::gcn:
      for (std::size_t l = 0; l < spec.num_layers; ++l) {
        b.add(key("gcn", l, "W"), {l == 0 ? f : h, h});
        b.linear(key("gcn", l, "phi"), h, h);
      }
      break;
    case Family::gat:
      for (std::size_t l = 0; l < spec.num_layers; ++l) {
        for (std::size_t m = 0; m < spec.heads; ++m) {
          const std::string head = "head" + std::to_string(m);
          b.add(key("gat", l, head + ".W"), {l == 0 ? f : h, h});
          b.add(key("gat", l, head + ".a_src"), {h, 1});
          b.add(key("gat", l, head + ".a_dst"), {h, 1});
        }
        b.linear(key("gat", l, "phi"), h, h);
      }
      break;
    case Family::gin:
      for (std::size_t l = 0; l < spec.num_layers; ++l) {
        b.add(key("gin", l, "eps"), {}, Init::zeros());
        b.linear(key("gin", l, "mlp1"), l == 0 ? f : h, h);
        b.linear(key("gin", l, "mlp2"), h, h);
      }
      break;
    case Family::astgcn:
      b.add("adaptive.E", {input.num_nodes, spec.embedding_dim},
            Init::normal(1.0 / std::sqrt(static_cast<double>(spec.embedding_dim))));
      [[fallthrough]];
    case Family::stgcn:
      for (std::size_t blk = 0; blk < spec.num_layers; ++blk) {
        const std::string pre = "block." + std::to_string(blk);
        const std::size_t c_in = blk == 0 ? 1 : h;
        b.add(pre + ".tcn_a.W", {h, c_in, spec.kernel_size});
        b.add(pre + ".tcn_a.b", {h}, Init::zeros());
        b.add(pre + ".tcn_b.W", {h, c_in, spec.kernel_size});
        b.add(pre + ".tcn_b.b", {h}, Init::zeros());
        b.add(pre + ".graph.W", {h, h});
        b.add(pre + ".phi.W", {h, h});
        b.add(pre + ".phi.b", {h}, Init::zeros());
      }
      break;
    case Family::mlp: {
      std::size_t in = f;
      for (std::size_t l = 0; l < spec.num_layers; ++l) {
        b.linear("mlp." + std::to_string(l), in, h);
        in = h;
      }
      head_in = in;
      break;
    }
    case Family::cnn1d:
      cnn1d_output_length(spec, f);
      b.add("conv.0.W", {h, input.num_nodes, spec.kernel_size});
      b.add("conv.0.b", {h}, Init::zeros());
      b.add("conv.1.W", {h, h, spec.kernel_size});
      b.add("conv.1.b", {h}, Init::zeros());
      head_in = h;
      break;
    case Family::svm_rbf:
      throw ContractError("svm_rbf has no gradient-trained parameters");
  }
  b.add("head.W", {head_in});
  b.add("head.b", {}, Init::zeros());
  return params;
}

Var forward(const ModelSpec& spec, Tape& tape, const ParameterSet& params, const BrainGraph& graph,
            const ForwardContext& ctx) {
  const Net net{tape, params, ctx, spec.dropout};
  const Tensor& x = graph.node_features;

  switch (spec.family) {
    case Family::gcn: {
      expect_rows(x, params.get(key("gcn", 0, "W")).value, "gcn");
      Var s = tape.constant(adjacency_of(graph, "gcn"));
      Var h = tape.constant(x);
      for (std::size_t l = 0; l < spec.num_layers; ++l) {
        h = ad::relu(ad::matmul(s, ad::matmul(h, net.p(key("gcn", l, "W")))));
        h = net.drop(ad::relu(net.linear(h, key("gcn", l, "phi"))));
      }
      return net.head(layers::readout(h, spec.readout));
    }
    case Family::gat: {
      expect_rows(x, params.get(key("gat", 0, "head0.W")).value, "gat");
      const Tensor& adj = adjacency_of(graph, "gat");
      Tensor mask(adj.shape(), 0.0);
      for (std::size_t i = 0; i < adj.dim(0); ++i)
        for (std::size_t j = 0; j < adj.dim(1); ++j) mask(i, j) = (i == j || adj(i, j) != 0.0) ? 1.0 : 0.0;
      Var h = tape.constant(x);
      for (std::size_t l = 0; l < spec.num_layers; ++l) {
        Var total;
        for (std::size_t m = 0; m < spec.heads; ++m) {
          const std::string head = "head" + std::to_string(m);
          Var z = ad::matmul(h, net.p(key("gat", l, head + ".W")));
          Var alpha = layers::gat_attention(z, net.p(key("gat", l, head + ".a_src")), net.p(key("gat", l, head + ".a_dst")), mask);
          Var out = ad::matmul(alpha, z);
          total = m == 0 ? out : ad::add(total, out);
        }
        h = ad::relu(ad::scale(total, 1.0 / static_cast<double>(spec.heads)));
        h = net.drop(ad::relu(net.linear(h, key("gat", l, "phi"))));
      }
      return net.head(layers::readout(h, spec.readout));
    }
    case Family::gin: {
      expect_rows(x, params.get(key("gin", 0, "mlp1.W")).value, "gin");
      Tensor neighbours = adjacency_of(graph, "gin");
      for (std::size_t i = 0; i < neighbours.dim(0); ++i) neighbours(i, i) = 0.0;
      Var w = tape.constant(std::move(neighbours));
      Var h = tape.constant(x);
      for (std::size_t l = 0; l < spec.num_layers; ++l) {
        Var self = ad::add(h, ad::mul(net.p(key("gin", l, "eps")), h));
        Var agg = ad::add(self, ad::matmul(w, h));
        h = ad::relu(net.linear(ad::relu(net.linear(agg, key("gin", l, "mlp1"))), key("gin", l, "mlp2")));
        h = net.drop(h);
      }
      return net.head(layers::readout(h, spec.readout));
    }
    case Family::stgcn:
    case Family::astgcn: {
      const std::size_t n = x.dim(0), t = x.dim(1);
      if (t < spec.kernel_size) {
        throw ConfigurationError("temporal kernel " + std::to_string(spec.kernel_size) + " longer than " +
                                 std::to_string(t) + " timepoints");
      }
      Var support;
      if (spec.family == Family::stgcn) {
        support = tape.constant(adjacency_of(graph, "stgcn"));
      } else {
        const Tensor& e = params.get("adaptive.E").value;
        if (e.dim(0) != n) throw ContractError("astgcn: embedding has " + std::to_string(e.dim(0)) + " rows for " + std::to_string(n) + " nodes");
        support = layers::adaptive_adjacency(net.p("adaptive.E"), spec.row_normalizer);
      }
      Var h = temporal_blocks(net, spec, support, tape.constant(x.reshaped({n, 1, t})));
      return net.head(layers::readout(h, spec.readout));
    }
    case Family::mlp: {
      Tensor v = fc_lower_triangle(x);
      const std::size_t expected = spec.num_layers ? params.get("mlp.0.W").value.dim(0) : params.get("head.W").value.dim(0);
      if (v.size() != expected) {
        throw ContractError("mlp: input length " + std::to_string(v.size()) + ", expected " + std::to_string(expected));
      }
      const std::size_t len = v.size();
      Var h = tape.constant(v.reshaped({1, len}));
      for (std::size_t l = 0; l < spec.num_layers; ++l) {
        h = net.drop(ad::relu(net.linear(h, "mlp." + std::to_string(l))));
      }
      return net.head(ad::reshape(h, {h.shape()[1]}));
    }
    case Family::cnn1d: {
      const Tensor& w0 = params.get("conv.0.W").value;
      if (x.rank() != 2 || x.dim(0) != w0.dim(1)) throw ContractError("cnn1d: input channels do not match");
      cnn1d_output_length(spec, x.dim(1));
      const ad::Conv1dOptions opt{spec.cnn_stride, 1, 0};
      Var h = tape.constant(x);
      for (int l = 0; l < 2; ++l) {
        const std::string pre = "conv." + std::to_string(l);
        h = ad::relu(ad::add_channel_bias(ad::conv1d(h, net.p(pre + ".W"), opt), net.p(pre + ".b")));
      }
      return net.head(net.drop(ad::mean(h, 1)));
    }
    case Family::svm_rbf:
      break;
  }
  throw ContractError("forward is not defined for " + to_string(spec.family));
}

}  // namespace braingraph
