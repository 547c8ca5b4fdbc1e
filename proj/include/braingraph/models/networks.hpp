#pragma once

#include "braingraph/models/spec.hpp"

namespace braingraph {

struct ForwardContext {
  bool training = false;
  Rng* rng = nullptr;  // required when training with dropout > 0
};

// Shape of inputs a family expects, derived from one sample graph.
InputShape input_shape(const ModelSpec& spec, const BrainGraph& sample);

ParameterSet init_parameters(const ModelSpec& spec, const InputShape& input, Rng& rng);

// Logit (rank-0) for one graph. Not defined for svm_rbf.
Var forward(const ModelSpec& spec, Tape& tape, const ParameterSet& params, const BrainGraph& graph,
            const ForwardContext& ctx = {});

// Building blocks, exposed for direct testing.
namespace layers {

std::size_t readout_width(std::size_t features, Readout kind);
// h is [N, F].
Var readout(Var h, Readout kind);
Tensor readout(const Tensor& h, Readout kind);

// Row-stochastic attention over the nonzero entries of mask: softmax_j(LeakyReLU(z_i a_src + z_j a_dst)).
Var gat_attention(Var z, Var a_src, Var a_dst, const Tensor& mask);

// I + normalizer(ReLU(E E^T)).
Var adaptive_adjacency(Var embedding, RowNormalizer normalizer);

// tanh(W_a * x + b) ⊙ sigmoid(W_b * x + c) over x [C, T] or [B, C, T].
Var gated_tcn(Var x, Var wa, Var ba, Var wb, Var bb, const ad::Conv1dOptions& opt = {});

}  // namespace layers

// Strict lower triangle of the FC rows, row-major: (1,0), (2,0), (2,1), ...
Tensor fc_lower_triangle(const Tensor& fc_rows);

// Time samples left after the two strided convolutions; throws ConfigurationError if T is too short.
std::size_t cnn1d_output_length(const ModelSpec& spec, std::size_t timepoints);

}  // namespace braingraph
