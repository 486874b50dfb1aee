#include "mlcl/encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace mlcl {

namespace {

void init_linear(Linear& layer, SeededRng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in_dim()));
    for (double& w : layer.weight.values) w = rng.uniform(-bound, bound);
    for (double& b : layer.bias) b = rng.uniform(-bound, bound);
}

Vec affine(const Linear& layer, std::span<const double> x) {
    if (x.size() != layer.in_dim()) throw std::invalid_argument("encoder: dimension mismatch");
    Vec out(layer.out_dim(), 0.0);
    for (std::size_t r = 0; r < layer.out_dim(); ++r) {
        double acc = layer.bias.empty() ? 0.0 : layer.bias[r];
        const auto w = layer.weight.row(r);
        for (std::size_t c = 0; c < w.size(); ++c) acc += w[c] * x[c];
        out[r] = acc;
    }
    return out;
}

Vec relu(const Vec& v) {
    Vec out(v);
    for (double& x : out)
        if (x < 0.0) x = 0.0;
    return out;
}

// Accumulates dL/dW, dL/db and returns dL/dx for y = W x + b.
Vec affine_backward(const Linear& layer, std::span<const double> x,
                    std::span<const double> grad_out, Linear& grad) {
    Vec grad_in(layer.in_dim(), 0.0);
    for (std::size_t r = 0; r < layer.out_dim(); ++r) {
        const double g = grad_out[r];
        if (!grad.bias.empty()) grad.bias[r] += g;
        const auto w = layer.weight.row(r);
        auto gw = grad.weight.row(r);
        for (std::size_t c = 0; c < w.size(); ++c) {
            gw[c] += g * x[c];
            grad_in[c] += g * w[c];
        }
    }
    return grad_in;
}

}  // namespace

EncoderParams init_encoder(std::size_t input_dim, std::size_t hidden_dim,
                           std::size_t num_hidden_layers, std::size_t embed_dim, SeededRng& rng) {
    if (num_hidden_layers == 0) throw std::invalid_argument("encoder needs >= 1 backbone layer");
    EncoderParams p;
    std::size_t in = input_dim;
    for (std::size_t l = 0; l < num_hidden_layers; ++l) {
        p.backbone.emplace_back(hidden_dim, in, /*with_bias=*/true);
        init_linear(p.backbone.back(), rng);
        in = hidden_dim;
    }
    p.proj1 = Linear(hidden_dim, hidden_dim, /*with_bias=*/false);
    p.proj2 = Linear(embed_dim, hidden_dim, /*with_bias=*/false);
    init_linear(p.proj1, rng);
    init_linear(p.proj2, rng);
    return p;
}

EncoderOutput encode(const EncoderParams& params, std::span<const double> features,
                     EncoderCache* cache) {
    EncoderCache local;
    EncoderCache& c = cache ? *cache : local;
    c.input.assign(features.begin(), features.end());
    c.backbone_pre.clear();
    c.backbone_post.clear();

    Vec x(features.begin(), features.end());
    for (const Linear& layer : params.backbone) {
        Vec pre = affine(layer, x);
        Vec post = relu(pre);
        c.backbone_pre.push_back(std::move(pre));
        c.backbone_post.push_back(post);
        x = std::move(post);
    }

    c.proj_pre = affine(params.proj1, x);
    c.proj_hidden = relu(c.proj_pre);
    c.proj_out = affine(params.proj2, c.proj_hidden);
    c.proj_out_norm = norm(c.proj_out);

    EncoderOutput out;
    out.backbone_repr = x;
    out.projected = l2_normalize(c.proj_out);
    return out;
}

EncoderGrads zero_grads(const EncoderParams& params) {
    EncoderGrads g;
    for (const Linear& layer : params.backbone)
        g.backbone.emplace_back(layer.out_dim(), layer.in_dim(), !layer.bias.empty());
    g.proj1 = Linear(params.proj1.out_dim(), params.proj1.in_dim(), false);
    g.proj2 = Linear(params.proj2.out_dim(), params.proj2.in_dim(), false);
    g.input_grad.assign(params.input_dim(), 0.0);
    return g;
}

void encoder_backward(const EncoderParams& params, const EncoderCache& cache,
                      std::span<const double> grad_projected,
                      std::span<const double> grad_backbone_repr, EncoderGrads& grads) {
    const std::size_t num_layers = params.backbone.size();
    Vec grad_repr(params.repr_dim(), 0.0);
    if (!grad_backbone_repr.empty()) {
        if (grad_backbone_repr.size() != grad_repr.size())
            throw std::invalid_argument("encoder_backward: repr gradient dimension mismatch");
        for (std::size_t i = 0; i < grad_repr.size(); ++i) grad_repr[i] = grad_backbone_repr[i];
    }

    if (!grad_projected.empty()) {
        if (grad_projected.size() != params.embed_dim())
            throw std::invalid_argument("encoder_backward: projected gradient dimension mismatch");
        // z = u/||u||  =>  dL/du = (g - (g.z) z) / ||u||
        const double n = cache.proj_out_norm;
        Vec z(cache.proj_out);
        for (double& v : z) v /= n;
        const double gz = dot(grad_projected, z);
        Vec grad_u(z.size());
        for (std::size_t i = 0; i < z.size(); ++i)
            grad_u[i] = (grad_projected[i] - gz * z[i]) / n;

        Vec grad_proj_hidden = affine_backward(params.proj2, cache.proj_hidden, grad_u, grads.proj2);
        for (std::size_t i = 0; i < grad_proj_hidden.size(); ++i)
            if (cache.proj_pre[i] <= 0.0) grad_proj_hidden[i] = 0.0;
        const Vec& repr = cache.backbone_post.back();
        Vec g = affine_backward(params.proj1, repr, grad_proj_hidden, grads.proj1);
        for (std::size_t i = 0; i < grad_repr.size(); ++i) grad_repr[i] += g[i];
    }

    Vec g = std::move(grad_repr);
    for (std::size_t l = num_layers; l-- > 0;) {
        for (std::size_t i = 0; i < g.size(); ++i)
            if (cache.backbone_pre[l][i] <= 0.0) g[i] = 0.0;
        const Vec& in = (l == 0) ? cache.input : cache.backbone_post[l - 1];
        g = affine_backward(params.backbone[l], in, g, grads.backbone[l]);
    }
    for (std::size_t i = 0; i < g.size(); ++i) grads.input_grad[i] += g[i];
}

}  // namespace mlcl
