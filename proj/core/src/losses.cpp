#include "mlcl/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace mlcl {

namespace {

constexpr double kProbEps = 1e-12;

double clamp_prob(double p) {
    if (p < kProbEps) return kProbEps;
    if (p > 1.0 - kProbEps) return 1.0 - kProbEps;
    return p;
}

void check_prob_shapes(const DenseMatrix& probs, const DenseMatrix& labels) {
    if (probs.rows != labels.rows || probs.cols != labels.cols)
        throw std::invalid_argument("probability loss: shape mismatch");
    if (probs.rows == 0 || probs.cols == 0)
        throw std::invalid_argument("probability loss: empty input");
}

// A denominator/positive candidate for one anchor. Queue entries carry no
// gradient slot; batch and prototype entries do.
struct Candidate {
    enum class Kind { Batch, Queue, Proto };
    Kind kind;
    std::size_t index;  // row in its source matrix
    std::span<const double> vec;
    const LabelVector* label;  // null for prototypes
};

void axpy(std::span<double> out, double a, std::span<const double> x) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += a * x[i];
}

}  // namespace

ProbLossOutput bce_loss(const DenseMatrix& probs, const DenseMatrix& labels) {
    check_prob_shapes(probs, labels);
    const double inv = 1.0 / static_cast<double>(probs.rows * probs.cols);
    ProbLossOutput out;
    out.prob_grads = DenseMatrix(probs.rows, probs.cols);
    double acc = 0.0;
    for (std::size_t k = 0; k < probs.values.size(); ++k) {
        const double p = clamp_prob(probs.values[k]);
        const double y = labels.values[k];
        acc += y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
        out.prob_grads.values[k] = -inv * (y / p - (1.0 - y) / (1.0 - p));
    }
    out.value = -inv * acc;
    return out;
}

ProbLossOutput focal_loss(const DenseMatrix& probs, const DenseMatrix& labels, double gamma) {
    if (gamma < 0.0) throw std::invalid_argument("focal loss: gamma must be >= 0");
    if (gamma == 0.0) return bce_loss(probs, labels);
    check_prob_shapes(probs, labels);
    const double inv = 1.0 / static_cast<double>(probs.rows * probs.cols);
    ProbLossOutput out;
    out.prob_grads = DenseMatrix(probs.rows, probs.cols);
    double acc = 0.0;
    for (std::size_t k = 0; k < probs.values.size(); ++k) {
        const double p = clamp_prob(probs.values[k]);
        const double y = labels.values[k];
        const double log_p = std::log(p);
        const double log_q = std::log(1.0 - p);
        const double pos = std::pow(1.0 - p, gamma) * log_p;
        const double neg = std::pow(p, gamma) * log_q;
        acc += y * pos + (1.0 - y) * neg;
        const double dpos = -gamma * std::pow(1.0 - p, gamma - 1.0) * log_p +
                            std::pow(1.0 - p, gamma) / p;
        const double dneg = gamma * std::pow(p, gamma - 1.0) * log_q -
                            std::pow(p, gamma) / (1.0 - p);
        out.prob_grads.values[k] = -inv * (y * dpos + (1.0 - y) * dneg);
    }
    out.value = -inv * acc;
    return out;
}

ProbLossOutput asymmetric_loss(const DenseMatrix& probs, const DenseMatrix& labels,
                               double gamma_pos, double gamma_neg, double margin) {
    if (gamma_pos < 0.0 || gamma_neg < 0.0)
        throw std::invalid_argument("asymmetric loss: exponents must be >= 0");
    if (margin < 0.0 || margin >= 1.0)
        throw std::invalid_argument("asymmetric loss: margin must be in [0,1)");
    check_prob_shapes(probs, labels);
    const double inv = 1.0 / static_cast<double>(probs.rows * probs.cols);
    ProbLossOutput out;
    out.prob_grads = DenseMatrix(probs.rows, probs.cols);
    double acc = 0.0;
    for (std::size_t k = 0; k < probs.values.size(); ++k) {
        const double p = clamp_prob(probs.values[k]);
        const double y = labels.values[k];
        double term = 0.0;
        double dterm = 0.0;
        if (y > 0.5) {
            const double log_p = std::log(p);
            if (gamma_pos == 0.0) {
                term = log_p;
                dterm = 1.0 / p;
            } else {
                term = std::pow(1.0 - p, gamma_pos) * log_p;
                dterm = -gamma_pos * std::pow(1.0 - p, gamma_pos - 1.0) * log_p +
                        std::pow(1.0 - p, gamma_pos) / p;
            }
        } else {
            const double pm = (p - margin > 0.0) ? (p - margin) : 0.0;
            if (pm > 0.0) {
                const double log_q = std::log(1.0 - pm);
                if (gamma_neg == 0.0) {
                    term = log_q;
                    dterm = -1.0 / (1.0 - pm);
                } else {
                    term = std::pow(pm, gamma_neg) * log_q;
                    dterm = gamma_neg * std::pow(pm, gamma_neg - 1.0) * log_q -
                            std::pow(pm, gamma_neg) / (1.0 - pm);
                }
            }
        }
        acc += term;
        out.prob_grads.values[k] = -inv * dterm;
    }
    out.value = -inv * acc;
    return out;
}

double repulsion_weight_g(bool is_prototype, double beta) {
    if (beta <= 0.0 || beta > 1.0)
        throw std::invalid_argument("repulsion weight: beta must be in (0,1]");
    return is_prototype ? 1.0 : beta;
}

double attraction_weight_f(const LabelVector& y_i, const LabelVector& y_l, bool is_prototype) {
    if (is_prototype) return 1.0;
    const std::size_t u = union_count(y_i, y_l);
    if (u == 0) return 0.0;
    return 1.0 / static_cast<double>(u);
}

ContrastiveLossOutput base_contrastive_loss(const DenseMatrix& batch,
                                            const std::vector<LabelVector>& labels, double tau) {
    const std::size_t n = batch.rows;
    if (n < 2) throw std::invalid_argument("base contrastive loss: batch of size < 2");
    if (labels.size() != n) throw std::invalid_argument("base contrastive loss: label count");
    if (tau <= 0.0) throw std::invalid_argument("temperature must be positive");

    ContrastiveLossOutput out;
    out.batch_grads = DenseMatrix(n, batch.cols);
    double total = 0.0;
    const double inv_b = 1.0 / static_cast<double>(n);

    std::vector<double> logits(n - 1);
    std::vector<std::size_t> others(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        const auto zi = batch.row(i);
        std::size_t t = 0;
        for (std::size_t k = 0; k < n; ++k) {
            if (k == i) continue;
            others[t] = k;
            logits[t] = dot(zi, batch.row(k)) / tau;
            ++t;
        }
        double norm_i = 0.0;
        for (std::size_t k : others) norm_i += jaccard(labels[i], labels[k]);
        if (norm_i == 0.0) continue;

        const double log_denom = logsumexp(logits);
        double pos_weight_sum = 0.0;
        for (std::size_t t2 = 0; t2 < others.size(); ++t2) {
            const std::size_t k = others[t2];
            const double w = jaccard(labels[i], labels[k]) / norm_i;
            if (w == 0.0) continue;
            total -= inv_b * w * (logits[t2] - log_denom);
            pos_weight_sum += w;
            // positive pull on z_i and z_k
            axpy(out.batch_grads.row(i), -inv_b * w / tau, batch.row(k));
            axpy(out.batch_grads.row(k), -inv_b * w / tau, zi);
        }
        // denominator push, softmax-weighted
        for (std::size_t t2 = 0; t2 < others.size(); ++t2) {
            const std::size_t k = others[t2];
            const double p = std::exp(logits[t2] - log_denom);
            const double c = inv_b * pos_weight_sum * p / tau;
            axpy(out.batch_grads.row(i), c, batch.row(k));
            axpy(out.batch_grads.row(k), c, zi);
        }
    }
    out.value = total;
    return out;
}

ContrastiveLossOutput msc_loss(const ContrastiveContext& ctx, const LossConfig& cfg) {
    if (!ctx.batch || !ctx.batch_labels) throw std::invalid_argument("msc loss: missing batch");
    const DenseMatrix& batch = *ctx.batch;
    const std::vector<LabelVector>& labels = *ctx.batch_labels;
    const std::size_t n = batch.rows;
    const std::size_t d = batch.cols;
    if (labels.size() != n) throw std::invalid_argument("msc loss: label count mismatch");
    if (n == 0) throw std::invalid_argument("msc loss: empty batch");
    if (cfg.tau <= 0.0) throw std::invalid_argument("temperature must be positive");
    const bool with_queue = cfg.use_queue && ctx.queue_keys && ctx.queue_keys->rows > 0;
    const bool with_protos = cfg.use_prototypes;
    if (with_protos && !ctx.prototypes)
        throw std::invalid_argument("msc loss: prototypes requested but absent");
    if (with_queue && (!ctx.queue_labels || ctx.queue_labels->size() != ctx.queue_keys->rows))
        throw std::invalid_argument("msc loss: queue key/label mismatch");

    const double beta = cfg.balanced ? cfg.beta : 1.0;
    const double tau = cfg.tau;
    const std::size_t num_labels = labels.empty() ? 0 : labels[0].size();

    ContrastiveLossOutput out;
    out.batch_grads = DenseMatrix(n, d);
    if (with_protos) out.prototype_grads = DenseMatrix(ctx.prototypes->rows, d);

    const double inv_b = 1.0 / static_cast<double>(n);
    double total = 0.0;

    std::vector<Candidate> cands;
    std::vector<double> shifted;  // log g_k + s_k
    std::vector<double> logits;
    std::vector<double> omega;

    for (std::size_t i = 0; i < n; ++i) {
        const auto zi = batch.row(i);
        const std::size_t y_count = labels[i].popcount();
        if (y_count == 0) throw std::invalid_argument("msc loss: anchor with empty label set");

        cands.clear();
        for (std::size_t k = 0; k < n; ++k)
            if (k != i)
                cands.push_back({Candidate::Kind::Batch, k, batch.row(k), &labels[k]});
        if (with_queue)
            for (std::size_t k = 0; k < ctx.queue_keys->rows; ++k)
                cands.push_back({Candidate::Kind::Queue, k, ctx.queue_keys->row(k),
                                 &(*ctx.queue_labels)[k]});
        if (with_protos)
            for (std::size_t k = 0; k < ctx.prototypes->rows; ++k)
                cands.push_back({Candidate::Kind::Proto, k, ctx.prototypes->row(k), nullptr});
        if (cands.empty()) continue;

        const std::size_t m = cands.size();
        logits.resize(m);
        shifted.resize(m);
        for (std::size_t k = 0; k < m; ++k) {
            logits[k] = dot(zi, cands[k].vec) / tau;
            const double g = (cands[k].kind == Candidate::Kind::Proto) ? 1.0 : beta;
            shifted[k] = std::log(g) + logits[k];
        }
        const double log_denom = logsumexp(shifted);

        // Accumulate positive coefficients per candidate across the label loop.
        omega.assign(m, 0.0);
        double anchor_value = 0.0;
        for (std::size_t j = 0; j < num_labels; ++j) {
            if (!labels[i].has(j)) continue;
            // P(j,i) U {c_j}: instances carrying label j plus the prototype
            double norm_ij = 0.0;
            for (std::size_t k = 0; k < m; ++k) {
                const Candidate& c = cands[k];
                if (c.kind == Candidate::Kind::Proto) {
                    if (with_protos && c.index == j) norm_ij += 1.0;
                } else if (c.label->has(j)) {
                    norm_ij += attraction_weight_f(labels[i], *c.label, false);
                }
            }
            if (norm_ij == 0.0) continue;  // empty positive set: label term skipped
            const double scale = 1.0 / (norm_ij * static_cast<double>(y_count));
            for (std::size_t k = 0; k < m; ++k) {
                const Candidate& c = cands[k];
                double f = 0.0;
                if (c.kind == Candidate::Kind::Proto) {
                    if (with_protos && c.index == j) f = 1.0;
                } else if (c.label->has(j)) {
                    f = attraction_weight_f(labels[i], *c.label, false);
                }
                if (f == 0.0) continue;
                const double w = f * scale;
                omega[k] += w;
                anchor_value -= w * (logits[k] - log_denom);
            }
        }
        total += inv_b * anchor_value;

        double omega_sum = 0.0;
        for (double w : omega) omega_sum += w;

        for (std::size_t k = 0; k < m; ++k) {
            const Candidate& c = cands[k];
            const double p = std::exp(shifted[k] - log_denom);
            const double coeff = inv_b * (-omega[k] + omega_sum * p) / tau;
            // d/dz_i gets the mirrored term through the dot product
            axpy(out.batch_grads.row(i), coeff, c.vec);
            switch (c.kind) {
                case Candidate::Kind::Batch:
                    axpy(out.batch_grads.row(c.index), coeff, zi);
                    break;
                case Candidate::Kind::Proto:
                    axpy(out.prototype_grads.row(c.index), coeff, zi);
                    break;
                case Candidate::Kind::Queue:
                    break;  // detached
            }
        }
    }
    out.value = total;
    return out;
}

ContrastiveLossOutput jscl_loss(const DenseMatrix& batch, const std::vector<LabelVector>& labels,
                                double tau) {
    const std::size_t n = batch.rows;
    if (n < 2) throw std::invalid_argument("jscl loss: batch of size < 2");
    if (labels.size() != n) throw std::invalid_argument("jscl loss: label count mismatch");
    if (tau <= 0.0) throw std::invalid_argument("temperature must be positive");

    ContrastiveLossOutput out;
    out.batch_grads = DenseMatrix(n, batch.cols);
    const double inv_b2 = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
    double total = 0.0;

    std::vector<std::size_t> pos;
    std::vector<double> logits;
    for (std::size_t i = 0; i < n; ++i) {
        const auto zi = batch.row(i);
        pos.clear();
        logits.clear();
        for (std::size_t k = 0; k < n; ++k) {
            if (k == i) continue;
            if (jaccard(labels[i], labels[k]) > 0.0) {
                pos.push_back(k);
                logits.push_back(dot(zi, batch.row(k)) / tau);
            }
        }
        if (pos.empty()) continue;
        const double log_denom = logsumexp(logits);
        const double count = static_cast<double>(pos.size());
        for (std::size_t t = 0; t < pos.size(); ++t) {
            const std::size_t k = pos[t];
            total -= inv_b2 * (std::log(jaccard(labels[i], labels[k])) + logits[t] - log_denom);
        }
        for (std::size_t t = 0; t < pos.size(); ++t) {
            const std::size_t k = pos[t];
            const double p = std::exp(logits[t] - log_denom);
            const double coeff = inv_b2 * (-1.0 + count * p) / tau;
            axpy(out.batch_grads.row(i), coeff, batch.row(k));
            axpy(out.batch_grads.row(k), coeff, zi);
        }
    }
    out.value = total;
    return out;
}

ContrastiveLossOutput con_loss(const DenseMatrix& batch, const std::vector<LabelVector>& labels,
                               double tau) {
    const std::size_t n = batch.rows;
    if (n < 2) throw std::invalid_argument("con loss: batch of size < 2");
    if (labels.size() != n) throw std::invalid_argument("con loss: label count mismatch");
    if (tau <= 0.0) throw std::invalid_argument("temperature must be positive");

    ContrastiveLossOutput out;
    out.batch_grads = DenseMatrix(n, batch.cols);
    const double inv_b = 1.0 / static_cast<double>(n);
    double total = 0.0;

    std::vector<std::size_t> others(n - 1);
    std::vector<double> dist(n - 1);
    std::vector<double> logits(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        const auto zi = batch.row(i);
        std::size_t t = 0;
        for (std::size_t k = 0; k < n; ++k) {
            if (k == i) continue;
            double acc = 0.0;
            const auto zk = batch.row(k);
            for (std::size_t c = 0; c < zi.size(); ++c) {
                const double dlt = zi[c] - zk[c];
                acc += dlt * dlt;
            }
            others[t] = k;
            dist[t] = std::sqrt(acc);
            logits[t] = -dist[t] / tau;
            ++t;
        }
        double c_i = 0.0;
        for (std::size_t k : others) c_i += static_cast<double>(label_dot(labels[i], labels[k]));
        if (c_i == 0.0) continue;

        const double log_denom = logsumexp(logits);
        // dL/ds coefficients, then chain through s = -||z_i - z_k|| / tau
        for (std::size_t t2 = 0; t2 < others.size(); ++t2) {
            const std::size_t k = others[t2];
            const double w = static_cast<double>(label_dot(labels[i], labels[k]));
            const double p = std::exp(logits[t2] - log_denom);
            if (w > 0.0) total -= inv_b * (w / c_i) * (logits[t2] - log_denom);
            const double ds = inv_b * (-w / c_i + p);
            if (dist[t2] < 1e-12) continue;  // kink at coincident points
            const double chain = -ds / (tau * dist[t2]);
            const auto zk = batch.row(k);
            for (std::size_t c = 0; c < zi.size(); ++c) {
                const double diff = zi[c] - zk[c];
                out.batch_grads.row(i)[c] += chain * diff;
                out.batch_grads.row(k)[c] -= chain * diff;
            }
        }
    }
    out.value = total;
    return out;
}

MulConLossOutput mulcon_loss(const PerLabelEmbeddings& emb, double tau) {
    if (tau <= 0.0) throw std::invalid_argument("temperature must be positive");
    struct Entry {
        std::size_t example;
        std::size_t label;
    };
    std::vector<Entry> entries;
    for (std::size_t i = 0; i < emb.n; ++i)
        for (std::size_t j = 0; j < emb.num_labels; ++j)
            if (emb.present(i, j)) entries.push_back({i, j});

    std::vector<std::size_t> label_counts(emb.num_labels, 0);
    for (const Entry& e : entries) ++label_counts[e.label];
    bool any_pair = false;
    for (std::size_t c : label_counts) any_pair |= (c >= 2);
    if (!any_pair) throw std::invalid_argument("no positive pairs");

    MulConLossOutput out;
    out.grads.assign(emb.values.size(), 0.0);
    const std::size_t m = entries.size();
    const double inv_set = 1.0 / static_cast<double>(m);
    double total = 0.0;

    std::vector<double> logits(m);
    for (std::size_t a = 0; a < m; ++a) {
        const auto za = emb.at(entries[a].example, entries[a].label);
        const std::size_t pos_count = label_counts[entries[a].label] - 1;
        if (pos_count == 0) continue;

        std::vector<double> denom_logits;
        denom_logits.reserve(m - 1);
        for (std::size_t k = 0; k < m; ++k) {
            logits[k] = (k == a) ? 0.0 : dot(za, emb.at(entries[k].example, entries[k].label)) / tau;
            if (k != a) denom_logits.push_back(logits[k]);
        }
        const double log_denom = logsumexp(denom_logits);
        const double pos_coeff = inv_set / static_cast<double>(pos_count);

        for (std::size_t k = 0; k < m; ++k) {
            if (k == a) continue;
            const bool positive =
                entries[k].label == entries[a].label && entries[k].example != entries[a].example;
            const double p = std::exp(logits[k] - log_denom);
            double ds = inv_set * p;  // repulsion via the log-denominator
            if (positive) {
                total -= pos_coeff * (logits[k] - log_denom);
                ds -= pos_coeff;
            }
            const auto zk = emb.at(entries[k].example, entries[k].label);
            auto ga = std::span<double>(
                out.grads.data() + (entries[a].example * emb.num_labels + entries[a].label) * emb.dim,
                emb.dim);
            auto gk = std::span<double>(
                out.grads.data() + (entries[k].example * emb.num_labels + entries[k].label) * emb.dim,
                emb.dim);
            axpy(ga, ds / tau, zk);
            axpy(gk, ds / tau, za);
        }
    }
    out.value = total;
    return out;
}

}  // namespace mlcl
