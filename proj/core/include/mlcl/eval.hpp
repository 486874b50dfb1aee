#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mlcl/label.hpp"
#include "mlcl/numeric.hpp"

namespace mlcl {

struct MetricsRecord {
    double micro_f1 = 0.0;
    double macro_f1 = 0.0;
    double hamming = 0.0;  // raw fraction; reports print hamming * 1e3
};

/// Micro-F1 from pooled confusion counts, macro-F1 as the unweighted mean
/// of per-label F1 (an all-zero label scores 0 by default), hamming as the
/// fraction of mismatched bits.
MetricsRecord classification_metrics(const std::vector<LabelVector>& pred,
                                     const std::vector<LabelVector>& truth,
                                     bool zero_division_as_zero = true);

struct LinearEvalConfig {
    std::vector<double> learning_rates = {1e-1, 1e-2};
    std::vector<double> weight_decays = {1e-2, 1e-4};
    std::size_t epochs = 40;
    std::size_t num_seeds = 3;
    std::size_t batch_size = 128;
    std::uint64_t seed = 17;
    /// Full grid: lr {1, 1e-1, 1e-2} x decay {1, 1e-1, 1e-2, 1e-4, 1e-6}.
    void use_full_grid();
};

struct LinearEvalResult {
    MetricsRecord test;
    MetricsRecord val;
    std::vector<std::size_t> untrainable_labels;  // absent from the train split
};

/// Per-label logistic regressions on frozen representations: a small
/// lr x decay grid, 3 seeds averaged by mean probability, grid cell chosen
/// per label by validation F1, test metrics at threshold 0.5.
LinearEvalResult linear_evaluation(const DenseMatrix& train_repr,
                                   const std::vector<LabelVector>& train_labels,
                                   const DenseMatrix& val_repr,
                                   const std::vector<LabelVector>& val_labels,
                                   const DenseMatrix& test_repr,
                                   const std::vector<LabelVector>& test_labels,
                                   const LinearEvalConfig& cfg);

struct CombinationClassing {
    std::vector<std::int64_t> class_ids;  // -1 => excluded
    std::size_t num_classes = 0;          // retained classes
    std::size_t num_distinct = 0;         // distinct combinations seen
    double keep_fraction = 1.0;
};

/// Each distinct label vector is one class; the top ceil(p * distinct)
/// classes by frequency are retained, everything else is excluded.
CombinationClassing label_combination_classes(const std::vector<LabelVector>& labels,
                                              double keep_fraction);

/// Mean silhouette with Euclidean distances; singleton clusters score 0.
/// Throws "undefined" with fewer than two classes.
double silhouette(const DenseMatrix& embeddings, const std::vector<std::int64_t>& class_ids);

/// Davies-Bouldin index with centroid-distance dispersion; throws
/// "degenerate centroids" when two centroids coincide.
double davies_bouldin(const DenseMatrix& embeddings, const std::vector<std::int64_t>& class_ids);

struct SweepRow {
    double fraction;
    double silhouette;
    double dbi;
};

std::vector<SweepRow> clustering_sweep(const DenseMatrix& embeddings,
                                       const std::vector<LabelVector>& labels,
                                       const std::vector<double>& fractions);

/// CSV with header "fraction,silhouette,dbi".
std::string sweep_to_csv(const std::vector<SweepRow>& rows);

/// Attraction/repulsion diagnostics for one mono-label class y, with the
/// lower bound on the class-restricted supervised contrastive loss.
struct AttRepReport {
    std::vector<std::size_t> in_class;      // B_y
    std::vector<std::size_t> out_of_class;  // B_y^C
    std::vector<double> s_att;              // per anchor in B_y
    std::vector<double> s_rep;
    double bound = 0.0;
    double actual = 0.0;  // class-restricted SupCon loss at tau = 1
};

AttRepReport attraction_repulsion_report(const DenseMatrix& embeddings,
                                         const std::vector<std::int64_t>& class_ids,
                                         std::int64_t y);

struct CollapseReport {
    std::vector<double> within_variance;  // per label: mean squared distance to centroid
    DenseMatrix centroid_cosines;         // L x L, unit-normalized centroids
};

CollapseReport collapse_metric(const DenseMatrix& embeddings_by_label,
                               const std::vector<std::int64_t>& label_of_row);

}  // namespace mlcl
