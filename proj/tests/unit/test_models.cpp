#include <doctest.h>

#include <cmath>

#include "braingraph/errors.hpp"
#include "braingraph/models/model.hpp"
#include "support/fixtures.hpp"
#include "support/gradcheck.hpp"
#include "support/kkt.hpp"
#include "support/tempdir.hpp"

using namespace braingraph;
using namespace braingraph::testing;

namespace {

double logit_of(const ModelSpec& spec, const ParameterSet& params, const BrainGraph& g) {
  Tape tape;
  return forward(spec, tape, params, g).value().item();
}

void set(ParameterSet& ps, const std::string& name, Tensor value) {
  REQUIRE(ps.get(name).value.shape() == value.shape());
  ps.get(name).value = std::move(value);
}

BrainGraph graph_from(Tensor adjacency, Tensor features, GraphKind kind = GraphKind::static_fc) {
  BrainGraph g;
  g.adjacency = Adjacency{std::move(adjacency), true};
  g.node_features = std::move(features);
  g.kind = kind;
  return g;
}

double relu(double v) { return v > 0 ? v : 0; }
double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// out[c][t] for a same-padded single-input-channel-stack cross-correlation
std::vector<std::vector<double>> conv_same(const std::vector<std::vector<double>>& x, const Tensor& w, const Tensor& b) {
  const std::size_t co = w.dim(0), ci = w.dim(1), k = w.dim(2), t = x[0].size(), pad = (k - 1) / 2;
  std::vector<std::vector<double>> out(co, std::vector<double>(t, 0.0));
  for (std::size_t o = 0; o < co; ++o)
    for (std::size_t s = 0; s < t; ++s) {
      double acc = b[o];
      for (std::size_t c = 0; c < ci; ++c)
        for (std::size_t j = 0; j < k; ++j) {
          const long idx = static_cast<long>(s + j) - static_cast<long>(pad);
          if (idx >= 0 && idx < static_cast<long>(t)) acc += w.at({o, c, j}) * x[c][static_cast<std::size_t>(idx)];
        }
      out[o][s] = acc;
    }
  return out;
}

}  // namespace

TEST_CASE("model spec round-trips through its key/value form") {
  ModelSpec s;
  s.family = Family::astgcn;
  s.readout = Readout::mean_cat_max;
  s.row_normalizer = RowNormalizer::sparsemax;
  s.dropout = 0.3;
  s.svm_gamma = 0.125;
  const ModelSpec back = ModelSpec::from_map(s.to_map());
  CHECK(back.to_map() == s.to_map());
  CHECK_THROWS_AS(parse_family("transformer"), ConfigurationError);
  auto bad = s.to_map();
  bad["hidden_dim"] = "0";
  CHECK_THROWS_AS(ModelSpec::from_map(bad), ConfigurationError);
  CHECK(Prediction::from_logit(0.0).label == 0);
  CHECK(Prediction::from_logit(1e-3).label == 1);
  CHECK(Prediction::from_logit(-30).probability > 0.0);
}

TEST_CASE("readout examples") {
  const Tensor h = Tensor::matrix({{1, 2}, {3, 4}});
  CHECK(layers::readout(h, Readout::mean) == Tensor::vector({2, 3}));
  CHECK(layers::readout(h, Readout::mean_cat_max) == Tensor::vector({2, 3, 3, 4}));
  CHECK(layers::readout(h, Readout::sum) == Tensor::vector({4, 6}));
  Rng rng(1);
  const Tensor r = random_matrix(7, 5, rng);
  const auto perm = random_permutation(7, rng);
  for (Readout kind : {Readout::mean, Readout::mean_cat_max, Readout::sum}) {
    CHECK(max_abs_diff(layers::readout(r, kind), layers::readout(permute_rows(r, perm), kind)) < 1e-12);
  }
}

TEST_CASE("gcn single node reduces to a linear map of its feature") {
  ModelSpec spec;
  spec.family = Family::gcn;
  spec.hidden_dim = 1;
  Rng rng(2);
  ParameterSet ps = init_parameters(spec, {1, 1}, rng);
  for (std::size_t l = 0; l < 2; ++l) {
    set(ps, "gcn." + std::to_string(l) + ".W", Tensor::matrix({{1}}));
    set(ps, "gcn." + std::to_string(l) + ".phi.W", Tensor::matrix({{1}}));
  }
  set(ps, "head.W", Tensor::vector({2.0}));
  set(ps, "head.b", Tensor::scalar(0.25));
  const BrainGraph g = graph_from(Tensor::matrix({{1}}), Tensor::matrix({{0.7}}));
  CHECK(std::abs(logit_of(spec, ps, g) - (2.0 * 0.7 + 0.25)) < 1e-15);
}

TEST_CASE("gcn on a 3-node path matches hand propagation") {
  ModelSpec spec;
  spec.family = Family::gcn;
  spec.hidden_dim = 3;
  Rng rng(3);
  ParameterSet ps = init_parameters(spec, {3, 3}, rng);
  for (std::size_t l = 0; l < 2; ++l) {
    set(ps, "gcn." + std::to_string(l) + ".W", Tensor::identity(3));
    set(ps, "gcn." + std::to_string(l) + ".phi.W", Tensor::identity(3));
  }
  set(ps, "head.W", Tensor::vector({1.0, -0.5, 2.0}));
  set(ps, "head.b", Tensor::scalar(0.1));
  const Tensor x = Tensor::matrix({{0.2, 0.5, 0.1}, {0.4, 0.3, 0.9}, {0.6, 0.8, 0.7}});
  const Adjacency s = normalize_adjacency({Tensor::matrix({{0, 1, 0}, {1, 0, 1}, {0, 1, 0}}), false});
  // S = D^-1/2 (A+I) D^-1/2 with degrees 2, 3, 2
  const double a = 1.0 / 2.0, b = 1.0 / std::sqrt(6.0), c = 1.0 / 3.0;
  const double hand[3][3] = {{a, b, 0}, {b, c, b}, {0, b, a}};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(s.values(i, j) - hand[i][j]) < 1e-15);
  double h[3][3], h2[3][3];
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t f = 0; f < 3; ++f) {
      h[i][f] = 0;
      for (std::size_t j = 0; j < 3; ++j) h[i][f] += hand[i][j] * x(j, f);
    }
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t f = 0; f < 3; ++f) {
      h2[i][f] = 0;
      for (std::size_t j = 0; j < 3; ++j) h2[i][f] += hand[i][j] * h[j][f];
    }
  const double w[3] = {1.0, -0.5, 2.0};
  double expected = 0.1;
  for (std::size_t f = 0; f < 3; ++f) expected += w[f] * (h2[0][f] + h2[1][f] + h2[2][f]) / 3.0;
  CHECK(std::abs(logit_of(spec, ps, graph_from(s.values, x)) - expected) < 1e-12);
}

TEST_CASE("forward rejects inputs that do not match the parameters") {
  Rng rng(4);
  const ModelSpec spec = small_spec(Family::gcn);
  const ParameterSet ps = init_parameters(spec, {6, 6}, rng);
  CHECK_THROWS_AS(logit_of(spec, ps, random_static_graph(5, rng)), ContractError);
  BrainGraph no_adj = random_static_graph(6, rng);
  no_adj.adjacency.reset();
  CHECK_THROWS_AS(logit_of(spec, ps, no_adj), ContractError);
  const ModelSpec mlp = small_spec(Family::mlp);
  const ParameterSet mp = init_parameters(mlp, {6, 15}, rng);
  CHECK_THROWS_AS(logit_of(mlp, mp, random_static_graph(5, rng)), ContractError);
}

TEST_CASE("gat attention") {
  Tape tape;
  const Tensor mask = Tensor::matrix({{1, 1, 0}, {1, 1, 1}, {0, 1, 1}});
  Var z = tape.constant(Tensor::matrix({{0.3, -0.2}, {0.3, -0.2}, {0.3, -0.2}}));
  Var as = tape.constant(Tensor::matrix({{1.0}, {2.0}}));
  Var ad_ = tape.constant(Tensor::matrix({{-0.5}, {0.7}}));
  const Tensor uniform = layers::gat_attention(z, as, ad_, mask).value();
  CHECK(std::abs(uniform(0, 0) - 0.5) < 1e-15);
  CHECK(std::abs(uniform(1, 2) - 1.0 / 3.0) < 1e-15);
  CHECK(uniform(0, 2) == 0.0);

  // two nodes: e_ij = LeakyReLU(z_i.a_src + z_j.a_dst), softmax over j
  Var z2 = tape.constant(Tensor::matrix({{1.0, 2.0}, {0.5, -1.0}}));
  const Tensor alpha = layers::gat_attention(z2, as, ad_, Tensor({2, 2}, 1.0)).value();
  const double src[2] = {1.0 + 4.0, 0.5 - 2.0}, dst[2] = {-0.5 + 1.4, -0.25 - 0.7};
  for (std::size_t i = 0; i < 2; ++i) {
    double e[2], total = 0;
    for (std::size_t j = 0; j < 2; ++j) {
      const double s = src[i] + dst[j];
      e[j] = std::exp(s > 0 ? s : 0.2 * s);
      total += e[j];
    }
    for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(alpha(i, j) - e[j] / total) < 1e-12);
  }
}

TEST_CASE("gin updates") {
  ModelSpec spec;
  spec.family = Family::gin;
  spec.num_layers = 1;
  spec.hidden_dim = 2;
  spec.readout = Readout::sum;
  Rng rng(5);
  ParameterSet ps = init_parameters(spec, {3, 2}, rng);
  CHECK(ps.get("gin.0.eps").value.item() == 0.0);
  set(ps, "gin.0.mlp1.W", Tensor::identity(2));
  set(ps, "gin.0.mlp2.W", Tensor::identity(2));
  set(ps, "gin.0.eps", Tensor::scalar(0.5));
  set(ps, "head.W", Tensor::vector({1.0, 0.0}));
  const Tensor x = Tensor::matrix({{0.1, 0.2}, {0.3, 0.4}, {0.5, 0.6}});
  const Tensor triangle = Tensor::matrix({{0, 1, 1}, {1, 0, 1}, {1, 1, 0}});
  // each node: 1.5 h_i + sum of the other two; summed over nodes gives 3.5 * sum
  CHECK(std::abs(logit_of(spec, ps, graph_from(triangle, x)) - 3.5 * 0.9) < 1e-12);

  // isolated nodes with eps 0: the layer is the MLP of each node alone
  set(ps, "gin.0.eps", Tensor::scalar(0.0));
  set(ps, "gin.0.mlp1.W", Tensor::matrix({{1.0, -2.0}, {0.5, 1.0}}));
  set(ps, "gin.0.mlp1.b", Tensor::vector({0.1, 0.0}));
  set(ps, "gin.0.mlp2.W", Tensor::matrix({{0.3, 1.0}, {-1.0, 0.2}}));
  set(ps, "head.W", Tensor::vector({1.0, 2.0}));
  const Tensor isolated(Shape{3, 3}, 0.0);
  double expected = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double u0 = relu(x(i, 0) * 1.0 + x(i, 1) * 0.5 + 0.1), u1 = relu(x(i, 0) * -2.0 + x(i, 1) * 1.0);
    expected += relu(u0 * 0.3 + u1 * -1.0) + 2.0 * relu(u0 * 1.0 + u1 * 0.2);
  }
  CHECK(std::abs(logit_of(spec, ps, graph_from(isolated, x)) - expected) < 1e-12);
}

TEST_CASE("gated temporal convolution") {
  Rng rng(6);
  Tape tape;
  const Tensor x = random_matrix(2, 30, rng);
  const Tensor wa = Tensor({3, 2, 3}, std::vector<double>(18, 0.0));
  Tensor ka({3, 2, 3}, 0.0), kb({3, 2, 3}, 0.0);
  for (auto& v : ka.values()) v = rng.normal(0, 0.5);
  for (auto& v : kb.values()) v = rng.normal(0, 0.5);
  const Tensor ba = Tensor::vector({0.1, -0.2, 0.3}), bb = Tensor::vector({0.0, 0.5, -0.5});
  const Tensor out = layers::gated_tcn(tape.constant(x), tape.constant(ka), tape.constant(ba), tape.constant(kb),
                                       tape.constant(bb))
                         .value();
  const Tensor a = ad::conv1d(tape.constant(x), tape.constant(ka)).value();
  const Tensor b = ad::conv1d(tape.constant(x), tape.constant(kb)).value();
  REQUIRE(out.shape() == Shape{3, 28});
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t t = 0; t < 28; ++t)
      CHECK(std::abs(out(c, t) - std::tanh(a(c, t) + ba[c]) * sigmoid(b(c, t) + bb[c])) < 1e-12);

  const Tensor saturated = layers::gated_tcn(tape.constant(x), tape.constant(ka), tape.constant(ba),
                                             tape.constant(kb), tape.constant(Tensor::vector({60, 60, 60})))
                               .value();
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t t = 0; t < 28; ++t) CHECK(std::abs(saturated(c, t) - std::tanh(a(c, t) + ba[c])) < 1e-12);

  const Tensor zero = layers::gated_tcn(tape.constant(Tensor({2, 30}, 0.0)), tape.constant(ka),
                                        tape.constant(Tensor({3}, 0.0)), tape.constant(kb),
                                        tape.constant(Tensor({3}, 0.0)))
                          .value();
  for (double v : zero.values()) CHECK(v == 0.0);
  (void)wa;
}

TEST_CASE("stgcn with identity adjacency decouples nodes") {
  Rng rng(7);
  ModelSpec spec = small_spec(Family::stgcn, Readout::sum);
  const std::size_t n = 5, t = 16;
  const ParameterSet ps = init_parameters(spec, {n, t}, rng);
  BrainGraph g = random_dynamic_graph(n, t, rng, false);
  g.adjacency = Adjacency{Tensor::identity(n), true};
  const double full = logit_of(spec, ps, g);
  const double bias = ps.get("head.b").value.item();
  double parts = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    BrainGraph single;
    single.kind = GraphKind::dynamic;
    single.adjacency = Adjacency{Tensor::identity(1), true};
    single.node_features = Tensor({1, t}, std::vector<double>(g.node_features.values().begin() + i * t,
                                                                g.node_features.values().begin() + (i + 1) * t));
    parts += logit_of(spec, ps, single) - bias;
  }
  CHECK(std::abs(full - (parts + bias)) < 1e-12);
  const auto perm = random_permutation(n, rng);
  CHECK(std::abs(logit_of(spec, ps, permute_graph(g, perm)) - full) < 1e-12);
}

TEST_CASE("stgcn single block matches a hand-stepped evaluation") {
  ModelSpec spec;
  spec.family = Family::stgcn;
  spec.num_layers = 1;
  spec.hidden_dim = 2;
  spec.kernel_size = 3;
  Rng rng(8);
  const std::size_t n = 2, t = 10;
  ParameterSet ps = init_parameters(spec, {n, t}, rng);
  set(ps, "block.0.tcn_a.W", Tensor({2, 1, 3}, {0.2, -0.1, 0.3, 0.05, 0.4, -0.2}));
  set(ps, "block.0.tcn_a.b", Tensor::vector({0.01, -0.02}));
  set(ps, "block.0.tcn_b.W", Tensor({2, 1, 3}, {-0.3, 0.1, 0.2, 0.1, 0.1, 0.1}));
  set(ps, "block.0.tcn_b.b", Tensor::vector({0.0, 0.1}));
  set(ps, "block.0.graph.W", Tensor::matrix({{0.5, -0.3}, {0.2, 0.8}}));
  set(ps, "block.0.phi.W", Tensor::matrix({{1.0, 0.1}, {-0.4, 0.6}}));
  set(ps, "block.0.phi.b", Tensor::vector({0.05, 0.02}));
  set(ps, "head.W", Tensor::vector({0.7, -1.1}));
  set(ps, "head.b", Tensor::scalar(0.3));
  const Tensor x = random_matrix(n, t, rng);
  const Tensor s = Tensor::matrix({{0.6, 0.4}, {0.4, 0.6}});
  BrainGraph g = graph_from(s, x, GraphKind::dynamic);

  std::vector<std::vector<std::vector<double>>> gated(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::vector<std::vector<double>> in = {std::vector<double>(x.values().begin() + i * t, x.values().begin() + (i + 1) * t)};
    const auto fa = conv_same(in, ps.get("block.0.tcn_a.W").value, ps.get("block.0.tcn_a.b").value);
    const auto fb = conv_same(in, ps.get("block.0.tcn_b.W").value, ps.get("block.0.tcn_b.b").value);
    gated[i].assign(2, std::vector<double>(t));
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t k = 0; k < t; ++k) gated[i][c][k] = std::tanh(fa[c][k]) * sigmoid(fb[c][k]);
  }
  const Tensor& gw = ps.get("block.0.graph.W").value;
  const Tensor& pw = ps.get("block.0.phi.W").value;
  const Tensor& pb = ps.get("block.0.phi.b").value;
  double pooled[2] = {0, 0};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < t; ++k) {
      double mixed[2], h[2];
      for (std::size_t c = 0; c < 2; ++c) mixed[c] = s(i, 0) * gated[0][c][k] + s(i, 1) * gated[1][c][k];
      for (std::size_t o = 0; o < 2; ++o) h[o] = relu(mixed[0] * gw(0, o) + mixed[1] * gw(1, o));
      for (std::size_t o = 0; o < 2; ++o) pooled[o] += relu(h[0] * pw(0, o) + h[1] * pw(1, o) + pb[o]) / t / n;
    }
  }
  const double expected = 0.3 + 0.7 * pooled[0] - 1.1 * pooled[1];
  CHECK(std::abs(logit_of(spec, ps, g) - expected) < 1e-10);

  g.node_features = random_matrix(n, 2, rng);
  CHECK_THROWS_AS(logit_of(spec, ps, g), ConfigurationError);
}

TEST_CASE("adaptive adjacency") {
  Tape tape;
  const std::size_t n = 4;
  const Tensor zero = layers::adaptive_adjacency(tape.constant(Tensor({n, 3}, 0.0)), RowNormalizer::softmax).value();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) CHECK(std::abs(zero(i, j) - ((i == j ? 1.0 : 0.0) + 0.25)) < 1e-15);

  Rng rng(9);
  for (int rep = 0; rep < 10; ++rep) {
    const Tensor e = random_matrix(6, 3, rng);
    for (RowNormalizer norm : {RowNormalizer::softmax, RowNormalizer::sparsemax}) {
      const Tensor a = layers::adaptive_adjacency(tape.constant(e), norm).value();
      for (std::size_t i = 0; i < 6; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < 6; ++j) {
          const double v = a(i, j) - (i == j ? 1.0 : 0.0);
          CHECK(v >= 0.0);
          row += v;
        }
        CHECK(std::abs(row - 1.0) < 1e-9);
      }
    }
  }

  // row 0 of E E^T is [9, 0, 0.3]: the leading entry beats the rest by more than 1
  const Tensor e = Tensor::matrix({{3.0, 0.0}, {0.0, 0.1}, {0.1, 0.2}});
  const Tensor sparse = layers::adaptive_adjacency(tape.constant(e), RowNormalizer::sparsemax).value();
  CHECK(sparse(0, 0) == 2.0);
  CHECK(sparse(0, 1) == 0.0);
  CHECK(sparse(0, 2) == 0.0);
}

TEST_CASE("sparsemax projections") {
  CHECK(sparsemax(std::vector<double>{0.5, 0.5}) == std::vector<double>{0.5, 0.5});
  CHECK(sparsemax(std::vector<double>{2, 0}) == std::vector<double>{1, 0});
  for (double v : sparsemax(std::vector<double>{1, 1, 1})) CHECK(std::abs(v - 1.0 / 3.0) < 1e-15);
}

TEST_CASE("mlp examples") {
  ModelSpec spec;
  spec.family = Family::mlp;
  spec.num_layers = 1;
  spec.hidden_dim = 3;
  Rng rng(10);
  const BrainGraph zero = graph_from(Tensor::identity(3), Tensor({3, 3}, 0.0));
  CHECK(input_shape(spec, zero).feature_dim == 3);
  ParameterSet ps = init_parameters(spec, input_shape(spec, zero), rng);
  CHECK(logit_of(spec, ps, zero) == 0.0);

  set(ps, "mlp.0.W", Tensor::identity(3));
  set(ps, "head.W", Tensor::vector({1.0, 2.0, 3.0}));
  set(ps, "head.b", Tensor::scalar(-0.5));
  const Tensor fc = Tensor::matrix({{0, 0.2, 0.4}, {0.2, 0, 0.6}, {0.4, 0.6, 0}});
  CHECK(fc_lower_triangle(fc) == Tensor::vector({0.2, 0.4, 0.6}));
  CHECK(std::abs(logit_of(spec, ps, graph_from(Tensor::identity(3), fc)) - (0.2 + 0.8 + 1.8 - 0.5)) < 1e-15);
}

TEST_CASE("cnn1d examples") {
  ModelSpec spec;
  spec.family = Family::cnn1d;
  spec.hidden_dim = 3;
  spec.kernel_size = 7;
  spec.cnn_stride = 2;
  CHECK(cnn1d_output_length(spec, 490) == 118);
  CHECK(ad::conv1d_output_length(490, 7, {2, 1, 0}) == 242);
  CHECK_THROWS_AS(cnn1d_output_length(spec, 6), ConfigurationError);
  CHECK_THROWS_AS(cnn1d_output_length(spec, 12), ConfigurationError);

  Rng rng(11);
  spec.kernel_size = 3;
  spec.cnn_stride = 1;
  ParameterSet ps = init_parameters(spec, {4, 30}, rng);
  // zero-sum kernels over time see a constant input as zero
  Tensor k0 = ps.get("conv.0.W").value;
  for (std::size_t o = 0; o < 3; ++o)
    for (std::size_t c = 0; c < 4; ++c) {
      double* k = k0.data() + (o * 4 + c) * 3;
      k[0] = 0.3 * (o + 1);
      k[1] = -0.1 * (c + 1);
      k[2] = -k[0] - k[1];
    }
  set(ps, "conv.0.W", k0);
  set(ps, "head.b", Tensor::scalar(0.25));
  BrainGraph constant;
  constant.kind = GraphKind::dynamic;
  constant.node_features = Tensor({4, 30}, 1.7);
  CHECK(std::abs(logit_of(spec, ps, constant) - 0.25) < 1e-12);

  // a pulse and its one-step shift, both away from the boundary, pool to the same features
  const ParameterSet fresh = init_parameters(spec, {4, 30}, rng);
  BrainGraph pulse = constant, shifted = constant;
  pulse.node_features = Tensor({4, 30}, 0.0);
  shifted.node_features = Tensor({4, 30}, 0.0);
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t t = 10; t < 15; ++t) {
      const double v = rng.normal();
      pulse.node_features(c, t) = v;
      shifted.node_features(c, t + 1) = v;
    }
  CHECK(std::abs(logit_of(spec, fresh, pulse) - logit_of(spec, fresh, shifted)) < 1e-12);
}

TEST_CASE("svm basics") {
  const Tensor two = Tensor::matrix({{0.0, 0.0}, {2.0, 0.0}});
  const auto sol = svm_rbf_train(two, {0, 1}, {1000.0, 0.5});
  CHECK(sol.model.decision(std::vector<double>{0.0, 0.0}) < 0);
  CHECK(sol.model.decision(std::vector<double>{2.0, 0.0}) > 0);
  CHECK(std::abs(sol.model.decision(std::vector<double>{1.0, 0.0})) < 1e-9);

  Rng rng(12);
  const Tensor x = random_matrix(40, 3, rng);
  std::vector<int> y(40);
  for (std::size_t i = 0; i < 40; ++i) y[i] = x(i, 0) + 0.5 * x(i, 1) > 0 ? 1 : 0;
  const auto fit = svm_rbf_train(x, y, {1.0, 0.5});
  const auto kkt = kkt_report(x, y, fit, 1.0);
  CHECK(kkt.equality < 1e-6);
  CHECK(kkt.box <= 0.0);
  CHECK(kkt.residual < 1e-3);

  const Tensor xor_x = Tensor::matrix({{0, 0}, {1, 1}, {0, 1}, {1, 0}});
  const std::vector<int> xor_y = {0, 0, 1, 1};
  const auto xor_fit = svm_rbf_train(xor_x, xor_y, {10.0, 1.0});
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK((xor_fit.model.decision(xor_x.values().subspan(2 * i, 2)) > 0) == (xor_y[i] == 1));
  }
  CHECK(kkt_report(xor_x, xor_y, xor_fit, 10.0).residual < 1e-3);

  CHECK_THROWS_AS(svm_rbf_train(two, {1, 1}, {}), ConfigurationError);
  const SvmModel back = svm_from_parameters(svm_to_parameters(xor_fit.model));
  CHECK(back.decision(std::vector<double>{0.3, 0.9}) == xor_fit.model.decision(std::vector<double>{0.3, 0.9}));
}

TEST_CASE("node permutations leave graph-model logits unchanged") {
  Rng rng(13);
  for (Family f : graph_families()) {
    for (Readout r : {Readout::mean, Readout::mean_cat_max, Readout::sum}) {
      const ModelSpec spec = small_spec(f, r);
      const BrainGraph g = random_graph_for(f, 6, 20, rng);
      const ParameterSet ps = init_parameters(spec, input_shape(spec, g), rng);
      const double base = logit_of(spec, ps, g);
      for (int k = 0; k < 10; ++k) {
        const auto perm = random_permutation(6, rng);
        const double moved = logit_of(spec, permute_node_parameters(ps, perm), permute_graph(g, perm));
        CHECK_MESSAGE(std::abs(moved - base) < 1e-9, to_string(f) << "/" << to_string(r));
      }
    }
  }
}

TEST_CASE("analytic gradients match finite differences for every family") {
  Rng rng(14);
  for (Family f : neural_families()) {
    for (RowNormalizer norm : {RowNormalizer::softmax, RowNormalizer::sparsemax}) {
      if (norm == RowNormalizer::sparsemax && f != Family::astgcn) continue;
      ModelSpec spec = small_spec(f, f == Family::gin ? Readout::sum : Readout::mean_cat_max);
      spec.row_normalizer = norm;
      const BrainGraph g = random_graph_for(f, 6, 20, rng);
      ParameterSet ps = init_parameters(spec, input_shape(spec, g), rng);
      // zero-initialised biases put ReLUs exactly on their kink when the input is exactly zero
      for (auto& p : ps)
        for (auto& v : p.value.values()) v += rng.normal(0.0, 0.1);
      const LossFn loss = [&](Tape& tape, const ParameterSet& p) {
        return ad::bce_with_logits(forward(spec, tape, p, g), g.label);
      };
      const auto result = gradient_check(loss, ps);
      CHECK_MESSAGE(result.worst < 1e-4, to_string(f) << " worst " << result.worst_param << " = " << result.worst);
    }
  }
}

TEST_CASE("dropout is active only in training") {
  Rng rng(15);
  ModelSpec spec = small_spec(Family::gcn);
  spec.dropout = 0.3;
  const BrainGraph g = random_static_graph(6, rng);
  const ParameterSet ps = init_parameters(spec, input_shape(spec, g), rng);
  const double eval = logit_of(spec, ps, g);
  CHECK(logit_of(spec, ps, g) == eval);
  Rng drop(3);
  Tape tape;
  const double train = forward(spec, tape, ps, g, {true, &drop}).value().item();
  CHECK(train != eval);
  Tape tape2;
  CHECK_THROWS_AS(forward(spec, tape2, ps, g, {true, nullptr}), ContractError);
}

TEST_CASE("checkpoints round-trip") {
  Rng rng(16);
  TempDir dir;
  for (Family f : neural_families()) {
    TrainedModel m;
    m.spec = small_spec(f);
    const BrainGraph g = random_graph_for(f, 6, 20, rng);
    m.input = input_shape(m.spec, g);
    m.parameters = init_parameters(m.spec, m.input, rng);
    m.history = {{1, 0.7, 0.69}, {2, 0.6, 0.65}};
    m.best_epoch = 2;
    const auto path = dir / to_string(f);
    save_checkpoint(m, path);
    const TrainedModel back = load_checkpoint(path);
    CHECK(back.spec.to_map() == m.spec.to_map());
    CHECK(back.best_epoch == 2);
    CHECK(back.history.size() == 2);
    CHECK(predict(back, g).logit == predict(m, g).logit);
  }
  TrainedModel svm;
  svm.spec.family = Family::svm_rbf;
  const Tensor x = Tensor::matrix({{0, 0}, {1, 1}, {0, 1}, {1, 0}});
  svm.parameters = svm_to_parameters(svm_rbf_train(x, {0, 0, 1, 1}, {10.0, 1.0}).model);
  save_checkpoint(svm, dir / "svm");
  const TrainedModel svm_back = load_checkpoint(dir / "svm");
  CHECK(max_abs_diff(svm_back.parameters.get("svm.sv").value, svm.parameters.get("svm.sv").value) == 0.0);

  write_tensor(dir / "gcn" / "param_head.W.csv", Tensor::vector({1.0, 2.0}));
  CHECK_THROWS_AS(load_checkpoint(dir / "gcn"), SchemaError);
}
