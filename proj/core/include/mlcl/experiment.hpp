#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mlcl/config.hpp"
#include "mlcl/eval.hpp"
#include "mlcl/train.hpp"

namespace mlcl {

/// Named variants of the ablation ladder. "base", "bqueue", "bqproto" and
/// "msc" are contrastive rungs evaluated with a frozen-representation
/// linear probe; "bce", "focal" and "asymmetric" are supervised baselines
/// evaluated with their own decoder.
TrainConfig variant_config(const TrainConfig& base, const std::string& variant);

struct VariantRun {
    std::string variant;
    std::uint64_t seed = 0;
    MetricsRecord test;
    MetricsRecord val;
};

/// Trains one variant on one seed and evaluates it on the test split.
VariantRun run_variant(const DatasetSplits& data, const TrainConfig& base,
                       const std::string& variant, std::uint64_t seed);

struct AblationRow {
    std::string variant;
    std::vector<VariantRun> runs;
    MetricsRecord mean;
    MetricsRecord stddev;
};

struct AblationResult {
    std::vector<AblationRow> rows;
};

AblationResult run_ablation(const DatasetSplits& data, const TrainConfig& base,
                            const std::vector<std::string>& variants,
                            const std::vector<std::uint64_t>& seeds);

/// Fixed-width summary: micro/macro F1 in percent and hamming loss scaled
/// by 1e3, two decimals, mean +/- stddev across seeds.
std::string ablation_table(const AblationResult& result);

struct GradCheckRow {
    std::string name;
    double max_rel_err = 0.0;
    bool pass = false;
};

/// Runs every loss (and the encoder backward pass) against central
/// differences on `instances` random instances each; an entry passes when
/// the worst relative error stays below `tol`.
std::vector<GradCheckRow> run_grad_checks(std::size_t instances, double tol);

std::string grad_check_table(const std::vector<GradCheckRow>& rows);

struct ReprAnalysis {
    std::vector<SweepRow> sweep;
    std::string csv;
    AttRepReport attrep;       // for the most frequent combination class
    std::int64_t attrep_class = -1;
};

/// Clustering sweep over combination-class keep fractions plus the
/// attraction/repulsion diagnostic on the dominant class.
ReprAnalysis run_repr_analysis(const DenseMatrix& embeddings,
                               const std::vector<LabelVector>& labels,
                               const std::vector<double>& fractions);

struct CollapseDemoResult {
    CollapseReport report;
    std::size_t steps = 0;
    double final_loss = 0.0;
    double max_within_variance = 0.0;
    double min_offdiag_cosine = 0.0;
    double max_offdiag_cosine = 0.0;
};

/// Gradient descent on free per-label unit embeddings (every instance
/// carries every label) under the per-label loss; demonstrates collapse to
/// one point per label with centroids at pairwise cosine -1/(L-1).
CollapseDemoResult run_collapse_demo(std::size_t n, std::size_t num_labels, std::size_t dim,
                                     std::size_t max_steps, double lr, double tau,
                                     std::uint64_t seed);

}  // namespace mlcl
