#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mlcl/label.hpp"
#include "mlcl/numeric.hpp"

namespace mlcl {

struct Dataset {
    DenseMatrix features;             // N x D
    std::vector<LabelVector> labels;  // N entries, each length L
    std::vector<std::size_t> label_frequencies;
    std::string split;

    std::size_t size() const { return features.rows; }
    std::size_t feature_dim() const { return features.cols; }
    std::size_t num_labels() const { return label_frequencies.size(); }

    void recount_frequencies(std::size_t num_labels);
};

struct GeneratorConfig {
    std::size_t n_train = 2000;
    std::size_t n_val = 500;
    std::size_t n_test = 500;
    std::size_t feature_dim = 64;
    std::size_t num_labels = 20;
    double zipf_exponent = 1.2;
    double mean_labels = 2.4;
    double noise_scale = 1.0;
    double cooccur_concentration = 1.0;
    std::uint64_t seed = 1;
};

struct DatasetSplits {
    Dataset train;
    Dataset val;
    Dataset test;
};

/// Label-anchored Gaussian mixture with a Zipf label prior: label counts
/// follow a truncated geometric around mean_labels, labels are drawn
/// without replacement from a co-occurrence-tilted categorical, and
/// features are the sum of per-label anchor vectors plus isotropic noise.
/// One generative pass; splits are disjoint index ranges.
DatasetSplits generate_longtail_dataset(const GeneratorConfig& cfg);

/// JSON-lines interchange: one record per line,
/// {"features":[...], "labels":[strictly increasing 0-based indices]}.
Dataset load_dataset(const std::string& path);
void save_dataset(const Dataset& ds, const std::string& path);

/// Seeded per-epoch shuffle into batches; a trailing batch smaller than 2
/// is dropped.
std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, std::size_t batch_size,
                                                    std::uint64_t seed, std::size_t epoch);

}  // namespace mlcl
