#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mlcl/encoder.hpp"
#include "mlcl/train.hpp"

using namespace mlcl;

TEST_CASE("init produces the contracted shapes within the uniform bound") {
    SeededRng rng(1);
    const EncoderParams p = init_encoder(10, 16, 3, 8, rng);
    REQUIRE(p.backbone.size() == 3);
    CHECK(p.backbone[0].in_dim() == 10);
    CHECK(p.backbone[0].out_dim() == 16);
    CHECK(p.backbone[2].out_dim() == 16);
    CHECK(p.proj1.in_dim() == 16);
    CHECK(p.proj1.out_dim() == 16);
    CHECK(p.proj2.out_dim() == 8);
    CHECK(p.proj1.bias.empty());
    CHECK(p.proj2.bias.empty());
    CHECK(!p.backbone[0].bias.empty());

    const double bound0 = 1.0 / std::sqrt(10.0);
    for (double w : p.backbone[0].weight.values) CHECK(std::abs(w) <= bound0);
}

TEST_CASE("same seed gives identical parameters") {
    SeededRng a(7), b(7);
    const EncoderParams pa = init_encoder(6, 8, 2, 4, a);
    const EncoderParams pb = init_encoder(6, 8, 2, 4, b);
    CHECK(pa.backbone[0].weight.values == pb.backbone[0].weight.values);
    CHECK(pa.proj2.weight.values == pb.proj2.weight.values);
}

TEST_CASE("projected output is unit norm") {
    SeededRng rng(2);
    const EncoderParams p = init_encoder(6, 8, 2, 4, rng);
    Vec x(6);
    for (double& v : x) v = rng.gaussian();
    const EncoderOutput out = encode(p, x);
    CHECK(norm(out.projected) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(out.backbone_repr.size() == 8);
}

TEST_CASE("encode with and without a cache agrees") {
    SeededRng rng(3);
    const EncoderParams p = init_encoder(5, 7, 2, 3, rng);
    Vec x(5);
    for (double& v : x) v = rng.gaussian();
    EncoderCache cache;
    const EncoderOutput with = encode(p, x, &cache);
    const EncoderOutput without = encode(p, x);
    CHECK(with.projected == without.projected);
    CHECK(with.backbone_repr == without.backbone_repr);
    CHECK(cache.proj_out_norm > 0.0);
}

TEST_CASE("projected embedding is invariant to positive rescaling of the last head layer") {
    SeededRng rng(4);
    EncoderParams p = init_encoder(6, 8, 2, 4, rng);
    Vec x(6);
    for (double& v : x) v = rng.gaussian();
    const EncoderOutput before = encode(p, x);
    for (double& w : p.proj2.weight.values) w *= 3.7;
    const EncoderOutput after = encode(p, x);
    for (std::size_t c = 0; c < 4; ++c)
        CHECK(after.projected[c] == doctest::Approx(before.projected[c]).epsilon(1e-12));
}

TEST_CASE("backward pass matches central finite differences") {
    CHECK(grad_check_encoder(11) < 1e-6);
    CHECK(grad_check_encoder(12) < 1e-6);
}

TEST_CASE("backward accumulates instead of overwriting") {
    SeededRng rng(5);
    const EncoderParams p = init_encoder(4, 6, 1, 3, rng);
    Vec x(4);
    for (double& v : x) v = rng.gaussian();
    EncoderCache cache;
    encode(p, x, &cache);
    Vec gp(3, 0.5);
    EncoderGrads once = zero_grads(p);
    encoder_backward(p, cache, gp, {}, once);
    EncoderGrads twice = zero_grads(p);
    encoder_backward(p, cache, gp, {}, twice);
    encoder_backward(p, cache, gp, {}, twice);
    for (std::size_t k = 0; k < once.proj2.weight.values.size(); ++k)
        CHECK(twice.proj2.weight.values[k] ==
              doctest::Approx(2.0 * once.proj2.weight.values[k]).epsilon(1e-12));
}
