#pragma once

#include <cstdint>
#include <vector>

#include "mlcl/encoder.hpp"
#include "mlcl/label.hpp"
#include "mlcl/numeric.hpp"

namespace mlcl {

/// FIFO ring buffer of momentum-encoded keys with their label vectors.
/// Keys are detached snapshots: nothing downstream may write gradients
/// into them.
class KeyQueue {
public:
    KeyQueue(std::size_t capacity, std::size_t embed_dim, std::size_t num_labels);

    /// Enqueues a batch, evicting the oldest entries once full.
    /// Throws when the batch is larger than the capacity.
    void push(const DenseMatrix& keys, const std::vector<LabelVector>& labels);

    std::size_t size() const { return size_; }
    std::size_t capacity() const { return capacity_; }
    std::size_t embed_dim() const { return embed_dim_; }
    std::size_t num_labels() const { return num_labels_; }

    /// Snapshot in FIFO order (oldest first).
    DenseMatrix keys() const;
    std::vector<LabelVector> labels() const;

private:
    std::size_t capacity_;
    std::size_t embed_dim_;
    std::size_t num_labels_;
    std::size_t head_ = 0;  // next write slot
    std::size_t size_ = 0;
    DenseMatrix keys_;  // capacity x d ring storage
    std::vector<LabelVector> labels_;
};

/// One trainable unit-norm prototype row per label.
struct PrototypeBank {
    DenseMatrix c;  // L x d

    std::size_t num_labels() const { return c.rows; }
    std::size_t embed_dim() const { return c.cols; }
    /// Re-projects every row onto the unit sphere (after optimizer steps).
    void renormalize();
};

PrototypeBank init_prototypes(std::size_t num_labels, std::size_t embed_dim, SeededRng& rng);

/// theta_k = m * theta_k + (1 - m) * theta, elementwise.
void momentum_update(EncoderParams& theta_k, const EncoderParams& theta, double m);

}  // namespace mlcl
