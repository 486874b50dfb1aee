#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mlcl/numeric.hpp"

namespace mlcl {

/// Fully connected layer; weight is out_dim x in_dim, bias optional.
struct Linear {
    DenseMatrix weight;
    Vec bias;  // empty => no bias (projection head layers)

    Linear() = default;
    Linear(std::size_t out_dim, std::size_t in_dim, bool with_bias)
        : weight(out_dim, in_dim), bias(with_bias ? Vec(out_dim, 0.0) : Vec()) {}

    std::size_t out_dim() const { return weight.rows; }
    std::size_t in_dim() const { return weight.cols; }
};

/// MLP backbone (ReLU after every layer) plus a bias-free two-layer
/// projection head proj2 . ReLU . proj1 whose output is L2-normalized.
struct EncoderParams {
    std::vector<Linear> backbone;
    Linear proj1;  // h x h
    Linear proj2;  // d x h

    std::size_t input_dim() const { return backbone.front().in_dim(); }
    std::size_t repr_dim() const { return backbone.back().out_dim(); }
    std::size_t embed_dim() const { return proj2.out_dim(); }
};

/// Seeded uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) initialization.
EncoderParams init_encoder(std::size_t input_dim, std::size_t hidden_dim,
                           std::size_t num_hidden_layers, std::size_t embed_dim, SeededRng& rng);

struct EncoderOutput {
    Vec backbone_repr;  // pre-projection representation used for linear evaluation
    Vec projected;      // unit-norm embedding
};

/// Intermediate activations kept for the backward pass.
struct EncoderCache {
    Vec input;
    std::vector<Vec> backbone_pre;   // per layer, pre-ReLU
    std::vector<Vec> backbone_post;  // per layer, post-ReLU
    Vec proj_pre;                    // proj1 * repr
    Vec proj_hidden;                 // ReLU(proj_pre)
    Vec proj_out;                    // proj2 * proj_hidden (pre-normalization)
    double proj_out_norm = 0.0;
};

EncoderOutput encode(const EncoderParams& params, std::span<const double> features,
                     EncoderCache* cache = nullptr);

struct EncoderGrads {
    std::vector<Linear> backbone;  // same shapes as params
    Linear proj1;
    Linear proj2;
    Vec input_grad;
};

EncoderGrads zero_grads(const EncoderParams& params);

/// Backpropagates upstream gradients through the encoder, including the
/// Jacobian of the output L2 normalization. Either upstream span may be
/// empty. Accumulates into `grads`.
void encoder_backward(const EncoderParams& params, const EncoderCache& cache,
                      std::span<const double> grad_projected,
                      std::span<const double> grad_backbone_repr, EncoderGrads& grads);

}  // namespace mlcl
