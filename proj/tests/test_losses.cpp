#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "mlcl/losses.hpp"
#include "mlcl/train.hpp"

using namespace mlcl;

namespace {

DenseMatrix unit_rows(std::size_t n, std::size_t d, SeededRng& rng) {
    DenseMatrix m(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        Vec v(d);
        for (double& x : v) x = rng.gaussian();
        const Vec u = l2_normalize(v);
        for (std::size_t c = 0; c < d; ++c) m.at(i, c) = u[c];
    }
    return m;
}

std::vector<LabelVector> random_multilabels(std::size_t n, std::size_t L, SeededRng& rng) {
    std::vector<LabelVector> out(n, LabelVector(L));
    for (auto& y : out) {
        for (std::size_t j = 0; j < L; ++j)
            if (rng.uniform() < 0.4) y.set(j);
        if (y.popcount() == 0) y.set(rng.uniform_index(L));
    }
    return out;
}

// ---- independent oracles, written straight from the definitions ----

double clamp_p(double p) {
    const double eps = 1e-12;
    return std::min(std::max(p, eps), 1.0 - eps);
}

double bce_oracle(const DenseMatrix& probs, const DenseMatrix& labels) {
    double total = 0.0;
    for (std::size_t k = 0; k < probs.values.size(); ++k) {
        const double p = clamp_p(probs.values[k]);
        const double y = labels.values[k];
        total += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
    }
    return total / static_cast<double>(probs.values.size());
}

double focal_oracle(const DenseMatrix& probs, const DenseMatrix& labels, double gamma) {
    double total = 0.0;
    for (std::size_t k = 0; k < probs.values.size(); ++k) {
        const double p = clamp_p(probs.values[k]);
        const double y = labels.values[k];
        total += y != 0.0 ? -std::pow(1.0 - p, gamma) * std::log(p)
                          : -std::pow(p, gamma) * std::log(1.0 - p);
    }
    return total / static_cast<double>(probs.values.size());
}

double asym_oracle(const DenseMatrix& probs, const DenseMatrix& labels, double gp, double gn,
                   double margin) {
    double total = 0.0;
    for (std::size_t k = 0; k < probs.values.size(); ++k) {
        const double p = clamp_p(probs.values[k]);
        const double y = labels.values[k];
        if (y != 0.0) {
            total += -std::pow(1.0 - p, gp) * std::log(p);
        } else {
            const double pm = std::max(p - margin, 0.0);
            if (pm > 0.0) total += -std::pow(pm, gn) * std::log(clamp_p(1.0 - pm));
        }
    }
    return total / static_cast<double>(probs.values.size());
}

// mono-label SupCon, batch mean over anchors; anchors without positives
// contribute 0
double supcon_oracle(const DenseMatrix& batch, const std::vector<std::size_t>& cls, double tau) {
    const std::size_t n = batch.rows;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> denom;
        double pos_sum = 0.0;
        std::size_t pos_count = 0;
        for (std::size_t k = 0; k < n; ++k) {
            if (k == i) continue;
            denom.push_back(dot(batch.row(i), batch.row(k)) / tau);
        }
        const double log_denom = logsumexp(denom);
        for (std::size_t k = 0; k < n; ++k) {
            if (k == i || cls[k] != cls[i]) continue;
            pos_sum += dot(batch.row(i), batch.row(k)) / tau - log_denom;
            ++pos_count;
        }
        if (pos_count > 0) total -= pos_sum / static_cast<double>(pos_count);
    }
    return total / static_cast<double>(n);
}

// literal transcription of the balanced loss definition, structured as
// plain nested loops over labels and positive sets
double msc_oracle(const DenseMatrix& batch, const std::vector<LabelVector>& labels,
                  const DenseMatrix* queue_keys, const std::vector<LabelVector>* queue_labels,
                  const DenseMatrix* protos, double tau, double beta) {
    const std::size_t n = batch.rows;
    const std::size_t L = labels[0].size();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        // denominator over every candidate except the anchor itself
        std::vector<double> terms;
        auto push = [&](std::span<const double> z, bool proto) {
            terms.push_back(std::log(proto ? 1.0 : beta) + dot(batch.row(i), z) / tau);
        };
        for (std::size_t k = 0; k < n; ++k)
            if (k != i) push(batch.row(k), false);
        if (queue_keys)
            for (std::size_t k = 0; k < queue_keys->rows; ++k) push(queue_keys->row(k), false);
        if (protos)
            for (std::size_t k = 0; k < protos->rows; ++k) push(protos->row(k), true);
        const double log_denom = logsumexp(terms);

        double anchor = 0.0;
        for (std::size_t j = 0; j < L; ++j) {
            if (!labels[i].has(j)) continue;
            double n_ij = 0.0;
            double inner = 0.0;
            auto accumulate = [&](std::span<const double> z, const LabelVector* y, bool proto) {
                const double f =
                    proto ? 1.0 : 1.0 / static_cast<double>(union_count(labels[i], *y));
                n_ij += f;
                inner += f * (dot(batch.row(i), z) / tau - log_denom);
            };
            for (std::size_t k = 0; k < n; ++k)
                if (k != i && labels[k].has(j)) accumulate(batch.row(k), &labels[k], false);
            if (queue_keys)
                for (std::size_t k = 0; k < queue_keys->rows; ++k)
                    if ((*queue_labels)[k].has(j))
                        accumulate(queue_keys->row(k), &(*queue_labels)[k], false);
            if (protos) accumulate(protos->row(j), nullptr, true);
            if (n_ij > 0.0) anchor -= inner / n_ij;
        }
        total += anchor / static_cast<double>(labels[i].popcount());
    }
    return total / static_cast<double>(n);
}

}  // namespace

TEST_CASE("bce matches the double-loop oracle") {
    SeededRng rng(1);
    DenseMatrix probs(6, 5), labels(6, 5);
    for (std::size_t k = 0; k < probs.values.size(); ++k) {
        probs.values[k] = rng.uniform(0.01, 0.99);
        labels.values[k] = rng.uniform() < 0.5 ? 1.0 : 0.0;
    }
    CHECK(bce_loss(probs, labels).value ==
          doctest::Approx(bce_oracle(probs, labels)).epsilon(1e-13));
}

TEST_CASE("bce stays finite at the clamp boundary") {
    DenseMatrix probs(1, 2), labels(1, 2);
    probs.values = {0.0, 1.0};
    labels.values = {1.0, 0.0};
    const ProbLossOutput out = bce_loss(probs, labels);
    CHECK(std::isfinite(out.value));
    CHECK(std::isfinite(out.prob_grads.values[0]));
}

TEST_CASE("focal matches its oracle and reduces exactly to bce at gamma=0") {
    SeededRng rng(2);
    DenseMatrix probs(7, 4), labels(7, 4);
    for (std::size_t k = 0; k < probs.values.size(); ++k) {
        probs.values[k] = rng.uniform(0.05, 0.95);
        labels.values[k] = rng.uniform() < 0.5 ? 1.0 : 0.0;
    }
    CHECK(focal_loss(probs, labels, 2.0).value ==
          doctest::Approx(focal_oracle(probs, labels, 2.0)).epsilon(1e-13));

    const ProbLossOutput f0 = focal_loss(probs, labels, 0.0);
    const ProbLossOutput b = bce_loss(probs, labels);
    CHECK(std::abs(f0.value - b.value) <= 1e-12);
    for (std::size_t k = 0; k < b.prob_grads.values.size(); ++k)
        CHECK(std::abs(f0.prob_grads.values[k] - b.prob_grads.values[k]) <= 1e-12);
}

TEST_CASE("asymmetric matches its oracle and reduces to focal") {
    SeededRng rng(3);
    DenseMatrix probs(7, 4), labels(7, 4);
    for (std::size_t k = 0; k < probs.values.size(); ++k) {
        probs.values[k] = rng.uniform(0.05, 0.95);
        labels.values[k] = rng.uniform() < 0.5 ? 1.0 : 0.0;
    }
    CHECK(asymmetric_loss(probs, labels, 0.0, 3.0, 0.3).value ==
          doctest::Approx(asym_oracle(probs, labels, 0.0, 3.0, 0.3)).epsilon(1e-13));

    const ProbLossOutput a = asymmetric_loss(probs, labels, 2.0, 2.0, 0.0);
    const ProbLossOutput f = focal_loss(probs, labels, 2.0);
    CHECK(std::abs(a.value - f.value) <= 1e-12);
    for (std::size_t k = 0; k < f.prob_grads.values.size(); ++k)
        CHECK(std::abs(a.prob_grads.values[k] - f.prob_grads.values[k]) <= 1e-12);
}

TEST_CASE("asymmetric negatives below the margin contribute nothing") {
    DenseMatrix probs(1, 1), labels(1, 1);
    probs.values = {0.2};
    labels.values = {0.0};
    const ProbLossOutput out = asymmetric_loss(probs, labels, 0.0, 3.0, 0.3);
    CHECK(out.value == 0.0);
    CHECK(out.prob_grads.values[0] == 0.0);
}

TEST_CASE("pair weights summed over shared labels equal the Jaccard similarity") {
    SeededRng rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t L = 2 + rng.uniform_index(10);
        const auto ys = random_multilabels(2, L, rng);
        double summed = 0.0;
        for (std::size_t j = 0; j < L; ++j)
            if (ys[0].has(j) && ys[1].has(j)) summed += attraction_weight_f(ys[0], ys[1], false);
        // repeated addition of 1/|union| vs the direct ratio: identical up
        // to one rounding step per addend
        const double j = jaccard(ys[0], ys[1]);
        CHECK(std::abs(summed - j) <=
              2.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, j));
    }
}

TEST_CASE("repulsion weight g") {
    CHECK(repulsion_weight_g(true, 0.1) == 1.0);
    CHECK(repulsion_weight_g(false, 0.1) == 0.1);
    CHECK_THROWS_AS(repulsion_weight_g(false, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(repulsion_weight_g(false, 1.5), std::invalid_argument);
}

TEST_CASE("base loss equals the SupCon oracle on mono-label batches") {
    SeededRng rng(5);
    const std::size_t n = 10, d = 8;
    const DenseMatrix batch = unit_rows(n, d, rng);
    std::vector<std::size_t> cls(n);
    std::vector<LabelVector> labels(n, LabelVector(4));
    for (std::size_t i = 0; i < n; ++i) {
        cls[i] = rng.uniform_index(3);
        labels[i].set(cls[i]);
    }
    const double oracle = supcon_oracle(batch, cls, 0.1);
    CHECK(std::abs(base_contrastive_loss(batch, labels, 0.1).value - oracle) <= 1e-10);
}

TEST_CASE("base loss gives anchors without positives a zero term") {
    SeededRng rng(6);
    const DenseMatrix batch = unit_rows(4, 6, rng);
    // class 2 is a singleton: the oracle assigns its anchor term 0
    std::vector<std::size_t> cls = {0, 0, 2, 0};
    std::vector<LabelVector> labels(4, LabelVector(3));
    for (std::size_t i = 0; i < 4; ++i) labels[i].set(cls[i]);
    CHECK(std::abs(base_contrastive_loss(batch, labels, 0.1).value -
                   supcon_oracle(batch, cls, 0.1)) <= 1e-10);
}

TEST_CASE("msc equals the literal-definition oracle across the ladder") {
    SeededRng rng(7);
    const std::size_t n = 6, d = 8, L = 5, K = 7;
    const DenseMatrix batch = unit_rows(n, d, rng);
    const auto labels = random_multilabels(n, L, rng);
    const DenseMatrix queue = unit_rows(K, d, rng);
    const auto queue_labels = random_multilabels(K, L, rng);
    const DenseMatrix protos = unit_rows(L, d, rng);

    ContrastiveContext ctx;
    ctx.batch = &batch;
    ctx.batch_labels = &labels;
    ctx.queue_keys = &queue;
    ctx.queue_labels = &queue_labels;
    ctx.prototypes = &protos;

    LossConfig cfg;  // tau 0.1, beta 0.1

    SUBCASE("label-loop base: no queue, no prototypes, unbalanced") {
        cfg.use_queue = false;
        cfg.use_prototypes = false;
        cfg.balanced = false;
        const double oracle = msc_oracle(batch, labels, nullptr, nullptr, nullptr, cfg.tau, 1.0);
        CHECK(msc_loss(ctx, cfg).value == doctest::Approx(oracle).epsilon(1e-12));
    }
    SUBCASE("queue variant") {
        cfg.use_queue = true;
        cfg.use_prototypes = false;
        cfg.balanced = false;
        const double oracle =
            msc_oracle(batch, labels, &queue, &queue_labels, nullptr, cfg.tau, 1.0);
        CHECK(msc_loss(ctx, cfg).value == doctest::Approx(oracle).epsilon(1e-12));
    }
    SUBCASE("queue + prototypes") {
        cfg.use_queue = true;
        cfg.use_prototypes = true;
        cfg.balanced = false;
        const double oracle =
            msc_oracle(batch, labels, &queue, &queue_labels, &protos, cfg.tau, 1.0);
        CHECK(msc_loss(ctx, cfg).value == doctest::Approx(oracle).epsilon(1e-12));
    }
    SUBCASE("fully balanced") {
        const double oracle =
            msc_oracle(batch, labels, &queue, &queue_labels, &protos, cfg.tau, cfg.beta);
        CHECK(msc_loss(ctx, cfg).value == doctest::Approx(oracle).epsilon(1e-12));
    }
}

TEST_CASE("msc on mono-label batches reduces to the SupCon oracle") {
    SeededRng rng(8);
    const std::size_t n = 9, d = 8;
    const DenseMatrix batch = unit_rows(n, d, rng);
    std::vector<std::size_t> cls(n);
    std::vector<LabelVector> labels(n, LabelVector(4));
    for (std::size_t i = 0; i < n; ++i) {
        cls[i] = rng.uniform_index(3);
        labels[i].set(cls[i]);
    }
    ContrastiveContext ctx;
    ctx.batch = &batch;
    ctx.batch_labels = &labels;
    LossConfig cfg;
    cfg.use_queue = false;
    cfg.use_prototypes = false;
    cfg.balanced = false;  // effective beta = 1
    CHECK(std::abs(msc_loss(ctx, cfg).value - supcon_oracle(batch, cls, cfg.tau)) <= 1e-10);
}

TEST_CASE("balanced=false equals explicit beta=1") {
    SeededRng rng(9);
    const DenseMatrix batch = unit_rows(5, 6, rng);
    const auto labels = random_multilabels(5, 4, rng);
    const DenseMatrix queue = unit_rows(6, 6, rng);
    const auto queue_labels = random_multilabels(6, 4, rng);
    ContrastiveContext ctx;
    ctx.batch = &batch;
    ctx.batch_labels = &labels;
    ctx.queue_keys = &queue;
    ctx.queue_labels = &queue_labels;
    LossConfig off;
    off.use_prototypes = false;
    off.balanced = false;
    off.beta = 0.2;  // must be ignored
    LossConfig one;
    one.use_prototypes = false;
    one.balanced = true;
    one.beta = 1.0;
    CHECK(msc_loss(ctx, off).value == doctest::Approx(msc_loss(ctx, one).value).epsilon(1e-14));
}

TEST_CASE("shrinking beta lowers the balanced loss (weaker non-prototype repulsion)") {
    SeededRng rng(10);
    const DenseMatrix batch = unit_rows(6, 8, rng);
    const auto labels = random_multilabels(6, 4, rng);
    const DenseMatrix protos = unit_rows(4, 8, rng);
    ContrastiveContext ctx;
    ctx.batch = &batch;
    ctx.batch_labels = &labels;
    ctx.prototypes = &protos;
    LossConfig cfg;
    cfg.use_queue = false;
    double prev = -1e300;
    for (double beta : {0.05, 0.1, 0.3, 0.6, 1.0}) {
        cfg.beta = beta;
        const double v = msc_loss(ctx, cfg).value;
        CHECK(v > prev);
        prev = v;
    }
}

TEST_CASE("msc is invariant to batch permutation") {
    SeededRng rng(11);
    const std::size_t n = 6, d = 8, L = 4;
    const DenseMatrix batch = unit_rows(n, d, rng);
    const auto labels = random_multilabels(n, L, rng);
    DenseMatrix perm_batch(n, d);
    std::vector<LabelVector> perm_labels(n);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < d; ++c) perm_batch.at(i, c) = batch.at(order[i], c);
        perm_labels[i] = labels[order[i]];
    }
    ContrastiveContext a, b;
    a.batch = &batch;
    a.batch_labels = &labels;
    b.batch = &perm_batch;
    b.batch_labels = &perm_labels;
    LossConfig cfg;
    cfg.use_queue = false;
    cfg.use_prototypes = false;
    CHECK(msc_loss(a, cfg).value == doctest::Approx(msc_loss(b, cfg).value).epsilon(1e-12));
}

TEST_CASE("jscl is non-negative and skips zero-overlap pairs") {
    SeededRng rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        const DenseMatrix batch = unit_rows(6, 8, rng);
        const auto labels = random_multilabels(6, 4, rng);
        const double v = jscl_loss(batch, labels, 0.1).value;
        CHECK(v >= 0.0);
    }
    // fully disjoint labels: no positive pairs anywhere, loss is 0
    DenseMatrix batch = unit_rows(3, 6, rng);
    std::vector<LabelVector> disjoint(3, LabelVector(3));
    for (std::size_t i = 0; i < 3; ++i) disjoint[i].set(i);
    CHECK(jscl_loss(batch, disjoint, 0.1).value == 0.0);
}

TEST_CASE("con loss matches a literal double-loop oracle") {
    SeededRng rng(13);
    const std::size_t n = 6, d = 8, L = 4;
    const DenseMatrix batch = unit_rows(n, d, rng);
    const auto labels = random_multilabels(n, L, rng);
    const double tau = 0.5;

    double oracle = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double c_i = 0.0;
        for (std::size_t k = 0; k < n; ++k)
            if (k != i) c_i += static_cast<double>(label_dot(labels[i], labels[k]));
        if (c_i == 0.0) continue;
        std::vector<double> logits;
        for (std::size_t k = 0; k < n; ++k) {
            if (k == i) continue;
            double sq = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                const double dlt = batch.at(i, c) - batch.at(k, c);
                sq += dlt * dlt;
            }
            logits.push_back(-std::sqrt(sq) / tau);
        }
        const double log_denom = logsumexp(logits);
        std::size_t t = 0;
        for (std::size_t k = 0; k < n; ++k) {
            if (k == i) continue;
            const double w = static_cast<double>(label_dot(labels[i], labels[k]));
            if (w > 0.0) oracle -= (w / c_i) * (logits[t] - log_denom);
            ++t;
        }
    }
    oracle /= static_cast<double>(n);
    CHECK(con_loss(batch, labels, tau).value == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("mulcon rejects instances without any positive pair") {
    PerLabelEmbeddings emb;
    emb.n = 2;
    emb.num_labels = 2;
    emb.dim = 3;
    emb.values.assign(12, 0.1);
    emb.mask = {1, 0, 0, 1};  // two labels, one instance each
    CHECK_THROWS_AS(mulcon_loss(emb, 0.5), std::invalid_argument);
}

TEST_CASE("all analytic gradients survive finite differences") {
    GradCheckSpec spec;
    LossConfig plain;
    CHECK(grad_check(LossKind::Bce, plain, spec) < 1e-5);
    CHECK(grad_check(LossKind::Focal, plain, spec) < 1e-5);
    CHECK(grad_check(LossKind::Asymmetric, plain, spec) < 1e-5);
    CHECK(grad_check(LossKind::Base, plain, spec) < 1e-5);
    CHECK(grad_check(LossKind::Jscl, plain, spec) < 1e-5);
    CHECK(grad_check(LossKind::Con, plain, spec) < 1e-5);
    CHECK(grad_check(LossKind::Msc, plain, spec) < 1e-5);
    CHECK(grad_check_mulcon(spec, 0.5) < 1e-5);
}

TEST_CASE("degenerate inputs are rejected") {
    SeededRng rng(14);
    const DenseMatrix one = unit_rows(1, 4, rng);
    std::vector<LabelVector> y1(1, LabelVector(2, {0}));
    CHECK_THROWS_AS(base_contrastive_loss(one, y1, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(base_contrastive_loss(unit_rows(3, 4, rng),
                                          std::vector<LabelVector>(3, LabelVector(2, {0})), 0.0),
                    std::invalid_argument);
    ContrastiveContext ctx;
    LossConfig cfg;
    CHECK_THROWS_AS(msc_loss(ctx, cfg), std::invalid_argument);
}
