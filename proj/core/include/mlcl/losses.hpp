#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mlcl/label.hpp"
#include "mlcl/memory.hpp"
#include "mlcl/numeric.hpp"

namespace mlcl {

/// Hyperparameters and variant flags selecting a rung of the loss ladder:
///   use_queue=false, use_prototypes=false, balanced=false  -> label-loop base loss
///   use_queue only                                          -> queue variant
///   use_queue + use_prototypes                              -> queue + prototypes
///   all three                                               -> balanced loss (beta-weighted repulsion)
struct LossConfig {
    double tau = 0.1;
    double beta = 0.1;
    bool use_queue = true;
    bool use_prototypes = true;
    bool balanced = true;
    double gamma = 2.0;
    double gamma_pos = 0.0;
    double gamma_neg = 3.0;
    double margin = 0.3;
};

/// Batch embeddings plus optional queue and prototype views. All
/// embeddings are unit-norm rows. Queue entries never receive gradients.
struct ContrastiveContext {
    const DenseMatrix* batch = nullptr;
    const std::vector<LabelVector>* batch_labels = nullptr;
    const DenseMatrix* queue_keys = nullptr;               // may be null
    const std::vector<LabelVector>* queue_labels = nullptr;
    const DenseMatrix* prototypes = nullptr;               // may be null
};

struct ContrastiveLossOutput {
    double value = 0.0;
    DenseMatrix batch_grads;      // B x d
    DenseMatrix prototype_grads;  // L x d; empty when prototypes unused
};

struct ProbLossOutput {
    double value = 0.0;
    DenseMatrix prob_grads;  // N x L, d(loss)/d(prob)
};

/// Mean binary cross-entropy over N examples and L labels.
/// Probabilities are clamped to [1e-12, 1 - 1e-12] before logs.
ProbLossOutput bce_loss(const DenseMatrix& probs, const DenseMatrix& labels);

/// Focal loss; gamma = 0 reduces exactly to bce_loss.
ProbLossOutput focal_loss(const DenseMatrix& probs, const DenseMatrix& labels, double gamma);

/// Asymmetric loss: positives are focal-weighted with gamma_pos; negatives
/// are shifted by the margin (p_m = max(p - m, 0)) and weighted with
/// gamma_neg. gamma_pos = gamma_neg = g, m = 0 reduces exactly to focal(g).
ProbLossOutput asymmetric_loss(const DenseMatrix& probs, const DenseMatrix& labels,
                               double gamma_pos, double gamma_neg, double margin);

/// Jaccard-weighted in-batch contrastive loss with per-anchor
/// normalization N(i); anchors with N(i) = 0 contribute 0.
ContrastiveLossOutput base_contrastive_loss(const DenseMatrix& batch,
                                            const std::vector<LabelVector>& labels, double tau);

/// Balanced multi-label supervised contrastive loss and its ablation
/// ladder (selected by the LossConfig flags). Gradients are returned for
/// batch embeddings and prototypes; queue keys are gradient-inert.
ContrastiveLossOutput msc_loss(const ContrastiveContext& ctx, const LossConfig& cfg);

/// Weight on a denominator (repulsion) term: 1 for prototypes, beta otherwise.
double repulsion_weight_g(bool is_prototype, double beta);

/// Weight on a positive pair: 1 for prototypes, 1/|y_i U y_l| otherwise.
double attraction_weight_f(const LabelVector& y_i, const LabelVector& y_l, bool is_prototype);

/// Jaccard-weight-inside-the-log comparison loss; pairs with zero Jaccard
/// are skipped. Softmax runs over each anchor's positive set.
ContrastiveLossOutput jscl_loss(const DenseMatrix& batch, const std::vector<LabelVector>& labels,
                                double tau);

/// Distance-based comparison loss: exp(-||z_i - z_j||/tau) similarities
/// with integer label dot-product weights, normalized by C(i).
ContrastiveLossOutput con_loss(const DenseMatrix& batch, const std::vector<LabelVector>& labels,
                               double tau);

/// Per-label representations with a presence mask; entry (i, j) is the
/// d-dimensional representation of label j for example i, valid when
/// mask[i*L + j] is set.
struct PerLabelEmbeddings {
    std::size_t n = 0;
    std::size_t num_labels = 0;
    std::size_t dim = 0;
    std::vector<double> values;        // n * num_labels * dim
    std::vector<std::uint8_t> mask;    // n * num_labels

    std::span<double> at(std::size_t i, std::size_t j) {
        return {values.data() + (i * num_labels + j) * dim, dim};
    }
    std::span<const double> at(std::size_t i, std::size_t j) const {
        return {values.data() + (i * num_labels + j) * dim, dim};
    }
    bool present(std::size_t i, std::size_t j) const { return mask[i * num_labels + j] != 0; }
};

struct MulConLossOutput {
    double value = 0.0;
    std::vector<double> grads;  // same layout as PerLabelEmbeddings::values
};

/// Per-label contrastive loss over the set of present label
/// representations; used for the collapse demonstration. Throws
/// "no positive pairs" when no label has two present instances.
MulConLossOutput mulcon_loss(const PerLabelEmbeddings& emb, double tau);

}  // namespace mlcl
