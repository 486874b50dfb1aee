#include <benchmark/benchmark.h>

#include "mlcl/losses.hpp"
#include "mlcl/numeric.hpp"

namespace {

mlcl::DenseMatrix unit_rows(std::size_t n, std::size_t d, mlcl::SeededRng& rng) {
    mlcl::DenseMatrix m(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        mlcl::Vec v(d);
        for (double& x : v) x = rng.gaussian();
        const mlcl::Vec u = mlcl::l2_normalize(v);
        auto row = m.row(i);
        for (std::size_t c = 0; c < d; ++c) row[c] = u[c];
    }
    return m;
}

std::vector<mlcl::LabelVector> labels(std::size_t n, std::size_t num_labels,
                                      mlcl::SeededRng& rng) {
    std::vector<mlcl::LabelVector> out(n, mlcl::LabelVector(num_labels));
    for (auto& y : out) {
        y.set(rng.uniform_index(num_labels));
        if (rng.uniform() < 0.5) y.set(rng.uniform_index(num_labels));
    }
    return out;
}

void BM_msc_loss(benchmark::State& state) {
    mlcl::SeededRng rng(11);
    const std::size_t b = static_cast<std::size_t>(state.range(0)), d = 32, L = 20, K = 256;
    const mlcl::DenseMatrix batch = unit_rows(b, d, rng);
    const mlcl::DenseMatrix queue = unit_rows(K, d, rng);
    const mlcl::DenseMatrix protos = unit_rows(L, d, rng);
    const auto batch_labels = labels(b, L, rng);
    const auto queue_labels = labels(K, L, rng);
    mlcl::ContrastiveContext ctx;
    ctx.batch = &batch;
    ctx.batch_labels = &batch_labels;
    ctx.queue_keys = &queue;
    ctx.queue_labels = &queue_labels;
    ctx.prototypes = &protos;
    const mlcl::LossConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(mlcl::msc_loss(ctx, cfg));
}
BENCHMARK(BM_msc_loss)->Arg(16)->Arg(32)->Arg(64);

void BM_cosine_sim_matrix(benchmark::State& state) {
    mlcl::SeededRng rng(7);
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    const mlcl::DenseMatrix m = unit_rows(n, 32, rng);
    for (auto _ : state) benchmark::DoNotOptimize(mlcl::cosine_sim_matrix(m, m));
}
BENCHMARK(BM_cosine_sim_matrix)->Arg(64)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
