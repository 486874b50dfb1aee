#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace mlcl {

using Vec = std::vector<double>;

/// Row-major dense matrix of doubles. Summations over its entries always
/// run in index-increasing order so results are deterministic.
struct DenseMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    DenseMatrix() = default;
    DenseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

    std::span<double> row(std::size_t r) { return {values.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }

    bool empty() const { return rows == 0 || cols == 0; }
};

/// Deterministic seeded generator: identical seed => identical stream,
/// independent of the standard library's distribution implementations.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed);

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64();
    /// Uniform in [0, 1).
    double uniform();
    /// Uniform in [lo, hi).
    double uniform(double lo, double hi);
    /// Standard normal via Box-Muller.
    double gaussian();
    /// Uniform integer in [0, n).
    std::size_t uniform_index(std::size_t n);
    /// Fisher-Yates shuffle with stable draw order.
    void shuffle(std::vector<std::size_t>& v);
    /// Derive an independent stream (for per-epoch / per-label seeding).
    SeededRng fork(std::uint64_t stream_id) const;

private:
    std::uint64_t seed_;
    std::uint64_t state_[4];
    bool have_spare_ = false;
    double spare_ = 0.0;
};

/// log sum_i exp(v_i) via max-shift; throws on empty input.
double logsumexp(std::span<const double> values);

/// Returns v / ||v||; throws "degenerate norm" when ||v|| <= 1e-20.
Vec l2_normalize(std::span<const double> v);

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> v);

/// Pairwise dot products of row-normalized matrices: out[i][j] = <a_i, b_j>.
DenseMatrix cosine_sim_matrix(const DenseMatrix& a, const DenseMatrix& b);

}  // namespace mlcl
