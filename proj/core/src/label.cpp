#include "mlcl/label.hpp"

#include <stdexcept>

namespace mlcl {

LabelVector::LabelVector(std::size_t num_labels, const std::vector<std::size_t>& positives)
    : bits(num_labels, 0) {
    for (std::size_t j : positives) {
        if (j >= num_labels) throw std::out_of_range("label index out of range");
        bits[j] = 1;
    }
}

std::size_t LabelVector::popcount() const {
    std::size_t n = 0;
    for (auto b : bits) n += b;
    return n;
}

std::vector<std::size_t> LabelVector::positive_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < bits.size(); ++j)
        if (bits[j]) out.push_back(j);
    return out;
}

std::size_t intersection_count(const LabelVector& a, const LabelVector& b) {
    if (a.size() != b.size()) throw std::invalid_argument("label length mismatch");
    std::size_t n = 0;
    for (std::size_t j = 0; j < a.size(); ++j) n += (a.bits[j] & b.bits[j]);
    return n;
}

std::size_t union_count(const LabelVector& a, const LabelVector& b) {
    if (a.size() != b.size()) throw std::invalid_argument("label length mismatch");
    std::size_t n = 0;
    for (std::size_t j = 0; j < a.size(); ++j) n += (a.bits[j] | b.bits[j]);
    return n;
}

double jaccard(const LabelVector& a, const LabelVector& b) {
    const std::size_t u = union_count(a, b);
    if (u == 0) return 0.0;
    return static_cast<double>(intersection_count(a, b)) / static_cast<double>(u);
}

std::size_t label_dot(const LabelVector& a, const LabelVector& b) {
    return intersection_count(a, b);
}

}  // namespace mlcl
