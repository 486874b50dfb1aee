#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace mlcl {

/// Binary label indicator vector of length L. Training examples carry at
/// least one positive label; the default-constructed empty vector is only
/// valid as a placeholder.
struct LabelVector {
    std::vector<std::uint8_t> bits;

    LabelVector() = default;
    explicit LabelVector(std::size_t num_labels) : bits(num_labels, 0) {}
    LabelVector(std::size_t num_labels, const std::vector<std::size_t>& positives);

    std::size_t size() const { return bits.size(); }
    bool has(std::size_t j) const { return bits[j] != 0; }
    void set(std::size_t j) { bits[j] = 1; }

    /// Number of positive labels, |y|.
    std::size_t popcount() const;
    std::vector<std::size_t> positive_indices() const;

    bool operator==(const LabelVector& other) const { return bits == other.bits; }
};

std::size_t intersection_count(const LabelVector& a, const LabelVector& b);
std::size_t union_count(const LabelVector& a, const LabelVector& b);

/// |a ∩ b| / |a ∪ b|; 0 when the union is empty.
double jaccard(const LabelVector& a, const LabelVector& b);

/// Integer label dot product <y_a, y_b> = |a ∩ b|.
std::size_t label_dot(const LabelVector& a, const LabelVector& b);

}  // namespace mlcl
