#include "mlcl/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>

namespace mlcl {

TrainConfig variant_config(const TrainConfig& base, const std::string& variant) {
    TrainConfig cfg = base;
    if (variant == "base") {
        cfg.loss = LossKind::Base;
        cfg.loss_cfg.use_queue = false;
        cfg.loss_cfg.use_prototypes = false;
        cfg.loss_cfg.balanced = false;
    } else if (variant == "bqueue") {
        cfg.loss = LossKind::Msc;
        cfg.loss_cfg.use_queue = true;
        cfg.loss_cfg.use_prototypes = false;
        cfg.loss_cfg.balanced = false;
    } else if (variant == "bqproto") {
        cfg.loss = LossKind::Msc;
        cfg.loss_cfg.use_queue = true;
        cfg.loss_cfg.use_prototypes = true;
        cfg.loss_cfg.balanced = false;
    } else if (variant == "msc") {
        cfg.loss = LossKind::Msc;
        cfg.loss_cfg.use_queue = true;
        cfg.loss_cfg.use_prototypes = true;
        cfg.loss_cfg.balanced = true;
    } else if (variant == "jscl") {
        cfg.loss = LossKind::Jscl;
        cfg.loss_cfg.use_queue = false;
        cfg.loss_cfg.use_prototypes = false;
    } else if (variant == "con") {
        cfg.loss = LossKind::Con;
        cfg.loss_cfg.use_queue = false;
        cfg.loss_cfg.use_prototypes = false;
    } else if (variant == "bce") {
        cfg.loss = LossKind::Bce;
    } else if (variant == "focal") {
        cfg.loss = LossKind::Focal;
    } else if (variant == "asymmetric") {
        cfg.loss = LossKind::Asymmetric;
    } else {
        throw std::invalid_argument("unknown variant: " + variant);
    }
    return cfg;
}

namespace {

bool is_supervised(const std::string& variant) {
    return variant == "bce" || variant == "focal" || variant == "asymmetric";
}

MetricsRecord decoder_metrics(const TrainedState& state, const Dataset& ds) {
    const std::size_t num_labels = state.decoder.out_dim();
    std::vector<LabelVector> pred(ds.size(), LabelVector(num_labels));
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const EncoderOutput out = encode(state.encoder, ds.features.row(i));
        for (std::size_t j = 0; j < num_labels; ++j) {
            double logit = state.decoder.bias[j];
            const auto w = state.decoder.weight.row(j);
            for (std::size_t c = 0; c < w.size(); ++c) logit += w[c] * out.backbone_repr[c];
            if (logit >= 0.0) pred[i].set(j);  // sigmoid(logit) >= 0.5
        }
    }
    return classification_metrics(pred, ds.labels);
}

}  // namespace

VariantRun run_variant(const DatasetSplits& data, const TrainConfig& base,
                       const std::string& variant, std::uint64_t seed) {
    TrainConfig cfg = variant_config(base, variant);
    cfg.seed = seed;
    VariantRun run;
    run.variant = variant;
    run.seed = seed;
    if (is_supervised(variant)) {
        const TrainResult r = train_supervised(data, cfg);
        run.test = decoder_metrics(r.selected, data.test);
        run.val = decoder_metrics(r.selected, data.val);
    } else {
        const TrainResult r = train_contrastive(data, cfg);
        const DenseMatrix train_repr =
            backbone_representations(r.selected.encoder, data.train.features);
        const DenseMatrix val_repr =
            backbone_representations(r.selected.encoder, data.val.features);
        const DenseMatrix test_repr =
            backbone_representations(r.selected.encoder, data.test.features);
        const LinearEvalResult e =
            linear_evaluation(train_repr, data.train.labels, val_repr, data.val.labels,
                              test_repr, data.test.labels, cfg.eval_cfg);
        run.test = e.test;
        run.val = e.val;
    }
    return run;
}

AblationResult run_ablation(const DatasetSplits& data, const TrainConfig& base,
                            const std::vector<std::string>& variants,
                            const std::vector<std::uint64_t>& seeds) {
    if (seeds.empty()) throw std::invalid_argument("run_ablation: no seeds");
    AblationResult result;
    for (const std::string& variant : variants) {
        AblationRow row;
        row.variant = variant;
        for (std::uint64_t seed : seeds) row.runs.push_back(run_variant(data, base, variant, seed));

        auto stats = [&](auto field, double& mean, double& sd) {
            mean = 0.0;
            for (const VariantRun& r : row.runs) mean += field(r.test);
            mean /= static_cast<double>(row.runs.size());
            double sq = 0.0;
            for (const VariantRun& r : row.runs) {
                const double d = field(r.test) - mean;
                sq += d * d;
            }
            sd = row.runs.size() > 1
                     ? std::sqrt(sq / static_cast<double>(row.runs.size() - 1))
                     : 0.0;
        };
        stats([](const MetricsRecord& m) { return m.micro_f1; }, row.mean.micro_f1,
              row.stddev.micro_f1);
        stats([](const MetricsRecord& m) { return m.macro_f1; }, row.mean.macro_f1,
              row.stddev.macro_f1);
        stats([](const MetricsRecord& m) { return m.hamming; }, row.mean.hamming,
              row.stddev.hamming);
        result.rows.push_back(std::move(row));
    }
    return result;
}

std::string ablation_table(const AblationResult& result) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(2);
    out << std::left << std::setw(12) << "variant" << std::right << std::setw(16) << "micro-F1"
        << std::setw(16) << "macro-F1" << std::setw(16) << "hamming(x1e3)" << "\n";
    for (const AblationRow& row : result.rows) {
        auto cell = [&](double mean, double sd, double scale) {
            std::ostringstream c;
            c << std::fixed << std::setprecision(2) << mean * scale << " +/- " << sd * scale;
            return c.str();
        };
        out << std::left << std::setw(12) << row.variant << std::right << std::setw(16)
            << cell(row.mean.micro_f1, row.stddev.micro_f1, 100.0) << std::setw(16)
            << cell(row.mean.macro_f1, row.stddev.macro_f1, 100.0) << std::setw(16)
            << cell(row.mean.hamming, row.stddev.hamming, 1e3) << "\n";
    }
    return out.str();
}

std::vector<GradCheckRow> run_grad_checks(std::size_t instances, double tol) {
    std::vector<GradCheckRow> rows;
    auto add = [&](const std::string& name, auto&& runner) {
        GradCheckRow row;
        row.name = name;
        for (std::size_t k = 0; k < instances; ++k) {
            GradCheckSpec spec;
            spec.seed = 1000 + 17 * k;
            row.max_rel_err = std::max(row.max_rel_err, runner(spec));
        }
        row.pass = row.max_rel_err < tol;
        rows.push_back(std::move(row));
    };

    LossConfig plain;
    add("bce", [&](const GradCheckSpec& s) { return grad_check(LossKind::Bce, plain, s); });
    add("focal", [&](const GradCheckSpec& s) { return grad_check(LossKind::Focal, plain, s); });
    add("asymmetric",
        [&](const GradCheckSpec& s) { return grad_check(LossKind::Asymmetric, plain, s); });
    add("base", [&](const GradCheckSpec& s) { return grad_check(LossKind::Base, plain, s); });

    LossConfig queue_only = plain;
    queue_only.use_queue = true;
    queue_only.use_prototypes = false;
    queue_only.balanced = false;
    add("msc(queue)",
        [&](const GradCheckSpec& s) { return grad_check(LossKind::Msc, queue_only, s); });

    LossConfig qproto = queue_only;
    qproto.use_prototypes = true;
    add("msc(queue+proto)",
        [&](const GradCheckSpec& s) { return grad_check(LossKind::Msc, qproto, s); });

    LossConfig full = qproto;
    full.balanced = true;
    add("msc(balanced)",
        [&](const GradCheckSpec& s) { return grad_check(LossKind::Msc, full, s); });

    add("jscl", [&](const GradCheckSpec& s) { return grad_check(LossKind::Jscl, plain, s); });
    add("con", [&](const GradCheckSpec& s) { return grad_check(LossKind::Con, plain, s); });
    add("mulcon", [&](const GradCheckSpec& s) { return grad_check_mulcon(s, 0.5); });
    add("encoder",
        [&](const GradCheckSpec& s) { return grad_check_encoder(s.seed, s.epsilon); });
    return rows;
}

std::string grad_check_table(const std::vector<GradCheckRow>& rows) {
    std::ostringstream out;
    out << std::left << std::setw(20) << "loss" << std::right << std::setw(14) << "max rel err"
        << std::setw(8) << "status" << "\n";
    for (const GradCheckRow& r : rows) {
        out << std::left << std::setw(20) << r.name << std::right << std::setw(14)
            << std::scientific << std::setprecision(3) << r.max_rel_err << std::setw(8)
            << (r.pass ? "PASS" : "FAIL") << "\n";
    }
    return out.str();
}

ReprAnalysis run_repr_analysis(const DenseMatrix& embeddings,
                               const std::vector<LabelVector>& labels,
                               const std::vector<double>& fractions) {
    ReprAnalysis out;
    out.sweep = clustering_sweep(embeddings, labels, fractions);
    out.csv = sweep_to_csv(out.sweep);

    // attraction/repulsion on the most frequent combination class
    const CombinationClassing classing = label_combination_classes(labels, 1.0);
    std::map<std::int64_t, std::size_t> counts;
    for (std::int64_t c : classing.class_ids)
        if (c >= 0) ++counts[c];
    std::int64_t best = -1;
    std::size_t best_count = 0;
    for (const auto& [c, n] : counts) {
        if (n > best_count) {
            best = c;
            best_count = n;
        }
    }
    if (best >= 0 && best_count >= 2) {
        out.attrep = attraction_repulsion_report(embeddings, classing.class_ids, best);
        out.attrep_class = best;
    }
    return out;
}

CollapseDemoResult run_collapse_demo(std::size_t n, std::size_t num_labels, std::size_t dim,
                                     std::size_t max_steps, double lr, double tau,
                                     std::uint64_t seed) {
    if (n < 2 || num_labels < 2 || dim < 2)
        throw std::invalid_argument("collapse demo: degenerate shape");
    SeededRng rng(seed);
    PerLabelEmbeddings emb;
    emb.n = n;
    emb.num_labels = num_labels;
    emb.dim = dim;
    emb.values.resize(n * num_labels * dim);
    emb.mask.assign(n * num_labels, 1);  // every instance carries every label
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < num_labels; ++j) {
            Vec v(dim);
            for (double& x : v) x = rng.gaussian();
            const Vec u = l2_normalize(v);
            auto dst = emb.at(i, j);
            for (std::size_t c = 0; c < dim; ++c) dst[c] = u[c];
        }

    CollapseDemoResult result;
    for (std::size_t step = 0; step < max_steps; ++step) {
        const MulConLossOutput loss = mulcon_loss(emb, tau);
        result.final_loss = loss.value;
        result.steps = step + 1;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < num_labels; ++j) {
                auto z = emb.at(i, j);
                const std::size_t base = (i * num_labels + j) * dim;
                Vec next(dim);
                for (std::size_t c = 0; c < dim; ++c)
                    next[c] = z[c] - lr * loss.grads[base + c];
                const Vec u = l2_normalize(next);
                for (std::size_t c = 0; c < dim; ++c) z[c] = u[c];
            }
    }

    // collapse diagnostics: one row per (instance, label) embedding
    DenseMatrix rows(n * num_labels, dim);
    std::vector<std::int64_t> label_of_row(n * num_labels);
    std::size_t r = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < num_labels; ++j, ++r) {
            const auto src = emb.at(i, j);
            auto dst = rows.row(r);
            for (std::size_t c = 0; c < dim; ++c) dst[c] = src[c];
            label_of_row[r] = static_cast<std::int64_t>(j);
        }
    result.report = collapse_metric(rows, label_of_row);
    result.max_within_variance = 0.0;
    for (double v : result.report.within_variance)
        result.max_within_variance = std::max(result.max_within_variance, v);
    result.min_offdiag_cosine = 1.0;
    result.max_offdiag_cosine = -1.0;
    for (std::size_t a = 0; a < num_labels; ++a)
        for (std::size_t b = 0; b < num_labels; ++b) {
            if (a == b) continue;
            const double c = result.report.centroid_cosines.at(a, b);
            result.min_offdiag_cosine = std::min(result.min_offdiag_cosine, c);
            result.max_offdiag_cosine = std::max(result.max_offdiag_cosine, c);
        }
    return result;
}

}  // namespace mlcl
