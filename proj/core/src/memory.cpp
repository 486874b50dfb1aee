#include "mlcl/memory.hpp"

#include <stdexcept>

namespace mlcl {

KeyQueue::KeyQueue(std::size_t capacity, std::size_t embed_dim, std::size_t num_labels)
    : capacity_(capacity),
      embed_dim_(embed_dim),
      num_labels_(num_labels),
      keys_(capacity, embed_dim),
      labels_(capacity, LabelVector(num_labels)) {
    if (capacity == 0) throw std::invalid_argument("queue capacity must be positive");
}

void KeyQueue::push(const DenseMatrix& keys, const std::vector<LabelVector>& labels) {
    if (keys.rows != labels.size()) throw std::invalid_argument("queue: key/label count mismatch");
    if (keys.rows > capacity_) throw std::invalid_argument("queue: batch larger than capacity");
    if (keys.rows > 0 && keys.cols != embed_dim_)
        throw std::invalid_argument("queue: embedding dimension mismatch");
    for (std::size_t i = 0; i < keys.rows; ++i) {
        if (labels[i].size() != num_labels_)
            throw std::invalid_argument("queue: label length mismatch");
        auto dst = keys_.row(head_);
        auto src = keys.row(i);
        for (std::size_t c = 0; c < embed_dim_; ++c) dst[c] = src[c];
        labels_[head_] = labels[i];
        head_ = (head_ + 1) % capacity_;
        if (size_ < capacity_) ++size_;
    }
}

DenseMatrix KeyQueue::keys() const {
    DenseMatrix out(size_, embed_dim_);
    const std::size_t oldest = (size_ < capacity_) ? 0 : head_;
    for (std::size_t i = 0; i < size_; ++i) {
        const std::size_t slot = (oldest + i) % capacity_;
        auto dst = out.row(i);
        auto src = keys_.row(slot);
        for (std::size_t c = 0; c < embed_dim_; ++c) dst[c] = src[c];
    }
    return out;
}

std::vector<LabelVector> KeyQueue::labels() const {
    std::vector<LabelVector> out(size_);
    const std::size_t oldest = (size_ < capacity_) ? 0 : head_;
    for (std::size_t i = 0; i < size_; ++i) out[i] = labels_[(oldest + i) % capacity_];
    return out;
}

void PrototypeBank::renormalize() {
    for (std::size_t r = 0; r < c.rows; ++r) {
        const Vec unit = l2_normalize(c.row(r));
        auto row = c.row(r);
        for (std::size_t j = 0; j < row.size(); ++j) row[j] = unit[j];
    }
}

PrototypeBank init_prototypes(std::size_t num_labels, std::size_t embed_dim, SeededRng& rng) {
    if (num_labels < 1 || embed_dim < 2)
        throw std::invalid_argument("init_prototypes: need L >= 1 and d >= 2");
    PrototypeBank bank;
    bank.c = DenseMatrix(num_labels, embed_dim);
    for (double& v : bank.c.values) v = rng.gaussian();
    bank.renormalize();
    return bank;
}

namespace {
void blend(Vec& old_v, const Vec& new_v, double m) {
    for (std::size_t i = 0; i < old_v.size(); ++i) old_v[i] = m * old_v[i] + (1.0 - m) * new_v[i];
}
void blend(DenseMatrix& old_m, const DenseMatrix& new_m, double m) {
    if (old_m.rows != new_m.rows || old_m.cols != new_m.cols)
        throw std::invalid_argument("momentum_update: shape mismatch");
    blend(old_m.values, new_m.values, m);
}
}  // namespace

void momentum_update(EncoderParams& theta_k, const EncoderParams& theta, double m) {
    if (m < 0.0 || m > 1.0) throw std::invalid_argument("momentum_update: m must be in [0,1]");
    if (theta_k.backbone.size() != theta.backbone.size())
        throw std::invalid_argument("momentum_update: shape mismatch");
    for (std::size_t l = 0; l < theta.backbone.size(); ++l) {
        blend(theta_k.backbone[l].weight, theta.backbone[l].weight, m);
        if (theta_k.backbone[l].bias.size() != theta.backbone[l].bias.size())
            throw std::invalid_argument("momentum_update: shape mismatch");
        blend(theta_k.backbone[l].bias, theta.backbone[l].bias, m);
    }
    blend(theta_k.proj1.weight, theta.proj1.weight, m);
    blend(theta_k.proj2.weight, theta.proj2.weight, m);
}

}  // namespace mlcl
