#include "mlcl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace mlcl {

namespace {

double f1_from_counts(std::size_t tp, std::size_t fp, std::size_t fn, bool zero_as_zero) {
    const std::size_t denom = 2 * tp + fp + fn;
    if (denom == 0) return zero_as_zero ? 0.0 : 1.0;
    return 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

double euclidean(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Minimal AdamW for the per-label logistic regressions. Decay is
// decoupled and skips the bias.
struct LogisticModel {
    Vec w;
    double b = 0.0;
};

LogisticModel train_logistic(const DenseMatrix& x, const std::vector<std::uint8_t>& y, double lr,
                             double decay, std::size_t epochs, std::size_t batch_size,
                             std::uint64_t seed) {
    const std::size_t dim = x.cols;
    LogisticModel model;
    SeededRng init(seed);
    model.w.resize(dim);
    const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
    for (double& v : model.w) v = init.uniform(-bound, bound);

    Vec mw(dim, 0.0), vw(dim, 0.0);
    double mb = 0.0, vb = 0.0;
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    std::size_t step = 0;

    Vec gw(dim);
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        std::vector<std::size_t> order(x.rows);
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        SeededRng shuf = SeededRng(seed).fork(1000 + epoch);
        shuf.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            const std::size_t end = std::min(order.size(), start + batch_size);
            std::fill(gw.begin(), gw.end(), 0.0);
            double gb = 0.0;
            const double inv = 1.0 / static_cast<double>(end - start);
            for (std::size_t t = start; t < end; ++t) {
                const auto row = x.row(order[t]);
                const double p = sigmoid(dot(model.w, row) + model.b);
                const double err = inv * (p - static_cast<double>(y[order[t]]));
                for (std::size_t c = 0; c < dim; ++c) gw[c] += err * row[c];
                gb += err;
            }
            ++step;
            const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step));
            for (std::size_t c = 0; c < dim; ++c) {
                mw[c] = b1 * mw[c] + (1.0 - b1) * gw[c];
                vw[c] = b2 * vw[c] + (1.0 - b2) * gw[c] * gw[c];
                model.w[c] -= lr * (mw[c] / bc1) / (std::sqrt(vw[c] / bc2) + eps);
                model.w[c] -= lr * decay * model.w[c];
            }
            mb = b1 * mb + (1.0 - b1) * gb;
            vb = b2 * vb + (1.0 - b2) * gb * gb;
            model.b -= lr * (mb / bc1) / (std::sqrt(vb / bc2) + eps);
        }
    }
    return model;
}

Vec predict_proba(const LogisticModel& m, const DenseMatrix& x) {
    Vec out(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) out[i] = sigmoid(dot(m.w, x.row(i)) + m.b);
    return out;
}

}  // namespace

MetricsRecord classification_metrics(const std::vector<LabelVector>& pred,
                                     const std::vector<LabelVector>& truth,
                                     bool zero_division_as_zero) {
    if (pred.size() != truth.size() || pred.empty())
        throw std::invalid_argument("metrics: shape mismatch");
    const std::size_t n = pred.size();
    const std::size_t num_labels = truth[0].size();

    std::size_t pooled_tp = 0, pooled_fp = 0, pooled_fn = 0, mismatches = 0;
    double macro_sum = 0.0;
    for (std::size_t j = 0; j < num_labels; ++j) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const bool p = pred[i].has(j);
            const bool t = truth[i].has(j);
            tp += (p && t);
            fp += (p && !t);
            fn += (!p && t);
            mismatches += (p != t);
        }
        pooled_tp += tp;
        pooled_fp += fp;
        pooled_fn += fn;
        macro_sum += f1_from_counts(tp, fp, fn, zero_division_as_zero);
    }

    MetricsRecord rec;
    rec.micro_f1 = f1_from_counts(pooled_tp, pooled_fp, pooled_fn, zero_division_as_zero);
    rec.macro_f1 = macro_sum / static_cast<double>(num_labels);
    rec.hamming = static_cast<double>(mismatches) / static_cast<double>(n * num_labels);
    return rec;
}

void LinearEvalConfig::use_full_grid() {
    learning_rates = {1.0, 1e-1, 1e-2};
    weight_decays = {1.0, 1e-1, 1e-2, 1e-4, 1e-6};
}

LinearEvalResult linear_evaluation(const DenseMatrix& train_repr,
                                   const std::vector<LabelVector>& train_labels,
                                   const DenseMatrix& val_repr,
                                   const std::vector<LabelVector>& val_labels,
                                   const DenseMatrix& test_repr,
                                   const std::vector<LabelVector>& test_labels,
                                   const LinearEvalConfig& cfg) {
    if (train_repr.rows != train_labels.size() || val_repr.rows != val_labels.size() ||
        test_repr.rows != test_labels.size())
        throw std::invalid_argument("linear evaluation: representation/label count mismatch");
    const std::size_t num_labels = train_labels[0].size();

    LinearEvalResult result;
    std::vector<LabelVector> val_pred(val_repr.rows, LabelVector(num_labels));
    std::vector<LabelVector> test_pred(test_repr.rows, LabelVector(num_labels));

    for (std::size_t j = 0; j < num_labels; ++j) {
        std::vector<std::uint8_t> target(train_repr.rows);
        std::size_t positives = 0;
        for (std::size_t i = 0; i < train_repr.rows; ++i) {
            target[i] = train_labels[i].has(j) ? 1 : 0;
            positives += target[i];
        }
        if (positives == 0) {
            result.untrainable_labels.push_back(j);
            continue;  // all-negative prediction
        }

        double best_f1 = -1.0;
        Vec best_val_prob, best_test_prob;
        for (std::size_t li = 0; li < cfg.learning_rates.size(); ++li) {
            for (std::size_t di = 0; di < cfg.weight_decays.size(); ++di) {
                Vec val_prob(val_repr.rows, 0.0), test_prob(test_repr.rows, 0.0);
                for (std::size_t s = 0; s < cfg.num_seeds; ++s) {
                    const std::uint64_t seed =
                        SeededRng(cfg.seed).fork(((j * 31 + li) * 31 + di) * 31 + s).next_u64();
                    LogisticModel m =
                        train_logistic(train_repr, target, cfg.learning_rates[li],
                                       cfg.weight_decays[di], cfg.epochs, cfg.batch_size, seed);
                    const Vec pv = predict_proba(m, val_repr);
                    const Vec pt = predict_proba(m, test_repr);
                    for (std::size_t i = 0; i < pv.size(); ++i) val_prob[i] += pv[i];
                    for (std::size_t i = 0; i < pt.size(); ++i) test_prob[i] += pt[i];
                }
                const double inv = 1.0 / static_cast<double>(cfg.num_seeds);
                for (double& p : val_prob) p *= inv;
                for (double& p : test_prob) p *= inv;

                std::size_t tp = 0, fp = 0, fn = 0;
                for (std::size_t i = 0; i < val_repr.rows; ++i) {
                    const bool p = val_prob[i] >= 0.5;
                    const bool t = val_labels[i].has(j);
                    tp += (p && t);
                    fp += (p && !t);
                    fn += (!p && t);
                }
                const double f1 = f1_from_counts(tp, fp, fn, true);
                if (f1 > best_f1) {
                    best_f1 = f1;
                    best_val_prob = val_prob;
                    best_test_prob = test_prob;
                }
            }
        }
        for (std::size_t i = 0; i < val_repr.rows; ++i)
            if (best_val_prob[i] >= 0.5) val_pred[i].set(j);
        for (std::size_t i = 0; i < test_repr.rows; ++i)
            if (best_test_prob[i] >= 0.5) test_pred[i].set(j);
    }

    result.val = classification_metrics(val_pred, val_labels);
    result.test = classification_metrics(test_pred, test_labels);
    return result;
}

CombinationClassing label_combination_classes(const std::vector<LabelVector>& labels,
                                              double keep_fraction) {
    if (keep_fraction <= 0.0 || keep_fraction > 1.0)
        throw std::invalid_argument("keep fraction must be in (0,1]");
    std::map<std::vector<std::uint8_t>, std::size_t> combo_ids;
    std::vector<std::size_t> combo_of(labels.size());
    std::vector<std::size_t> counts;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto [it, inserted] = combo_ids.try_emplace(labels[i].bits, combo_ids.size());
        if (inserted) counts.push_back(0);
        combo_of[i] = it->second;
        ++counts[it->second];
    }

    const std::size_t distinct = counts.size();
    const std::size_t keep =
        static_cast<std::size_t>(std::ceil(keep_fraction * static_cast<double>(distinct)));

    // rank combos by count desc, first-seen order breaking ties
    std::vector<std::size_t> order(distinct);
    for (std::size_t i = 0; i < distinct; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return counts[a] > counts[b]; });

    std::vector<std::int64_t> remap(distinct, -1);
    for (std::size_t rank = 0; rank < keep && rank < distinct; ++rank)
        remap[order[rank]] = static_cast<std::int64_t>(rank);

    CombinationClassing out;
    out.keep_fraction = keep_fraction;
    out.num_distinct = distinct;
    out.num_classes = std::min(keep, distinct);
    out.class_ids.resize(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) out.class_ids[i] = remap[combo_of[i]];
    return out;
}

double silhouette(const DenseMatrix& embeddings, const std::vector<std::int64_t>& class_ids) {
    if (embeddings.rows != class_ids.size()) throw std::invalid_argument("silhouette: shape");
    std::vector<std::size_t> members_count;
    std::vector<std::size_t> rows;
    std::int64_t max_class = -1;
    for (std::size_t i = 0; i < class_ids.size(); ++i) {
        if (class_ids[i] < 0) continue;
        rows.push_back(i);
        max_class = std::max(max_class, class_ids[i]);
    }
    if (max_class < 1) throw std::domain_error("silhouette: undefined");
    const std::size_t num_classes = static_cast<std::size_t>(max_class) + 1;
    members_count.assign(num_classes, 0);
    for (std::size_t i : rows) ++members_count[static_cast<std::size_t>(class_ids[i])];

    double total = 0.0;
    std::vector<double> mean_dist(num_classes);
    for (std::size_t i : rows) {
        const std::size_t ci = static_cast<std::size_t>(class_ids[i]);
        if (members_count[ci] == 1) continue;  // singleton convention s = 0
        std::fill(mean_dist.begin(), mean_dist.end(), 0.0);
        for (std::size_t k : rows) {
            if (k == i) continue;
            mean_dist[static_cast<std::size_t>(class_ids[k])] +=
                euclidean(embeddings.row(i), embeddings.row(k));
        }
        const double a = mean_dist[ci] / static_cast<double>(members_count[ci] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < num_classes; ++c) {
            if (c == ci || members_count[c] == 0) continue;
            b = std::min(b, mean_dist[c] / static_cast<double>(members_count[c]));
        }
        const double denom = std::max(a, b);
        if (denom > 0.0) total += (b - a) / denom;
    }
    return total / static_cast<double>(rows.size());
}

double davies_bouldin(const DenseMatrix& embeddings, const std::vector<std::int64_t>& class_ids) {
    if (embeddings.rows != class_ids.size()) throw std::invalid_argument("davies_bouldin: shape");
    std::int64_t max_class = -1;
    for (std::int64_t c : class_ids) max_class = std::max(max_class, c);
    if (max_class < 1) throw std::domain_error("davies_bouldin: need >= 2 classes");
    const std::size_t num_classes = static_cast<std::size_t>(max_class) + 1;

    DenseMatrix centroids(num_classes, embeddings.cols);
    std::vector<std::size_t> counts(num_classes, 0);
    for (std::size_t i = 0; i < embeddings.rows; ++i) {
        if (class_ids[i] < 0) continue;
        const std::size_t c = static_cast<std::size_t>(class_ids[i]);
        auto mu = centroids.row(c);
        auto x = embeddings.row(i);
        for (std::size_t d = 0; d < embeddings.cols; ++d) mu[d] += x[d];
        ++counts[c];
    }
    for (std::size_t c = 0; c < num_classes; ++c) {
        if (counts[c] == 0) throw std::invalid_argument("davies_bouldin: empty class");
        auto mu = centroids.row(c);
        for (std::size_t d = 0; d < embeddings.cols; ++d) mu[d] /= static_cast<double>(counts[c]);
    }

    std::vector<double> dispersion(num_classes, 0.0);
    for (std::size_t i = 0; i < embeddings.rows; ++i) {
        if (class_ids[i] < 0) continue;
        const std::size_t c = static_cast<std::size_t>(class_ids[i]);
        dispersion[c] += euclidean(embeddings.row(i), centroids.row(c));
    }
    for (std::size_t c = 0; c < num_classes; ++c)
        dispersion[c] /= static_cast<double>(counts[c]);

    double total = 0.0;
    for (std::size_t i = 0; i < num_classes; ++i) {
        double worst = 0.0;
        for (std::size_t j = 0; j < num_classes; ++j) {
            if (i == j) continue;
            const double d = euclidean(centroids.row(i), centroids.row(j));
            if (d <= 1e-15) throw std::domain_error("davies_bouldin: degenerate centroids");
            worst = std::max(worst, (dispersion[i] + dispersion[j]) / d);
        }
        total += worst;
    }
    return total / static_cast<double>(num_classes);
}

std::vector<SweepRow> clustering_sweep(const DenseMatrix& embeddings,
                                       const std::vector<LabelVector>& labels,
                                       const std::vector<double>& fractions) {
    std::vector<SweepRow> rows;
    for (double p : fractions) {
        const CombinationClassing classing = label_combination_classes(labels, p);
        SweepRow row{p, silhouette(embeddings, classing.class_ids),
                     davies_bouldin(embeddings, classing.class_ids)};
        rows.push_back(row);
    }
    return rows;
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream out;
    out << "fraction,silhouette,dbi\n";
    out.precision(17);
    for (const SweepRow& r : rows)
        out << r.fraction << ',' << r.silhouette << ',' << r.dbi << '\n';
    return out.str();
}

AttRepReport attraction_repulsion_report(const DenseMatrix& embeddings,
                                         const std::vector<std::int64_t>& class_ids,
                                         std::int64_t y) {
    if (embeddings.rows != class_ids.size())
        throw std::invalid_argument("attraction_repulsion_report: shape");
    AttRepReport rep;
    for (std::size_t i = 0; i < class_ids.size(); ++i)
        (class_ids[i] == y ? rep.in_class : rep.out_of_class).push_back(i);
    if (rep.in_class.size() < 2)
        throw std::invalid_argument("attraction_repulsion_report: class with < 2 members");
    if (rep.out_of_class.empty())
        throw std::invalid_argument("attraction_repulsion_report: no out-of-class instances");

    const double in_sz = static_cast<double>(rep.in_class.size());
    const double out_sz = static_cast<double>(rep.out_of_class.size());
    double bound = 0.0;
    double actual = 0.0;
    std::vector<double> denom_logits;
    for (std::size_t i : rep.in_class) {
        const auto zi = embeddings.row(i);
        double att = 0.0;
        for (std::size_t j : rep.in_class)
            if (j != i) att += dot(zi, embeddings.row(j));
        att = -att / (in_sz - 1.0);
        double repl = 0.0;
        for (std::size_t j : rep.out_of_class) repl += dot(zi, embeddings.row(j));
        repl /= out_sz;
        rep.s_att.push_back(att);
        rep.s_rep.push_back(repl);
        bound += std::log(in_sz - 1.0 + out_sz * std::exp(att + repl));

        denom_logits.clear();
        for (std::size_t k = 0; k < embeddings.rows; ++k)
            if (k != i) denom_logits.push_back(dot(zi, embeddings.row(k)));
        actual += att + logsumexp(denom_logits);
    }
    rep.bound = bound;
    rep.actual = actual;
    return rep;
}

CollapseReport collapse_metric(const DenseMatrix& embeddings_by_label,
                               const std::vector<std::int64_t>& label_of_row) {
    if (embeddings_by_label.rows != label_of_row.size())
        throw std::invalid_argument("collapse_metric: shape");
    std::int64_t max_label = -1;
    for (std::int64_t l : label_of_row) max_label = std::max(max_label, l);
    if (max_label < 0) throw std::invalid_argument("collapse_metric: no labels");
    const std::size_t num_labels = static_cast<std::size_t>(max_label) + 1;
    const std::size_t d = embeddings_by_label.cols;

    DenseMatrix centroids(num_labels, d);
    std::vector<std::size_t> counts(num_labels, 0);
    for (std::size_t i = 0; i < embeddings_by_label.rows; ++i) {
        const std::size_t l = static_cast<std::size_t>(label_of_row[i]);
        auto mu = centroids.row(l);
        auto x = embeddings_by_label.row(i);
        for (std::size_t c = 0; c < d; ++c) mu[c] += x[c];
        ++counts[l];
    }
    for (std::size_t l = 0; l < num_labels; ++l) {
        if (counts[l] == 0) throw std::invalid_argument("collapse_metric: empty label set");
        auto mu = centroids.row(l);
        for (std::size_t c = 0; c < d; ++c) mu[c] /= static_cast<double>(counts[l]);
    }

    CollapseReport rep;
    rep.within_variance.assign(num_labels, 0.0);
    for (std::size_t i = 0; i < embeddings_by_label.rows; ++i) {
        const std::size_t l = static_cast<std::size_t>(label_of_row[i]);
        const double dist = euclidean(embeddings_by_label.row(i), centroids.row(l));
        rep.within_variance[l] += dist * dist;
    }
    for (std::size_t l = 0; l < num_labels; ++l)
        rep.within_variance[l] /= static_cast<double>(counts[l]);

    rep.centroid_cosines = DenseMatrix(num_labels, num_labels);
    for (std::size_t a = 0; a < num_labels; ++a) {
        const Vec ua = l2_normalize(centroids.row(a));
        for (std::size_t b = 0; b < num_labels; ++b) {
            const Vec ub = l2_normalize(centroids.row(b));
            rep.centroid_cosines.at(a, b) = dot(ua, ub);
        }
    }
    return rep;
}

}  // namespace mlcl
