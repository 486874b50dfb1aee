#include "mlcl/data.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace mlcl {

namespace {

using nlohmann::json;

std::size_t sample_categorical(const std::vector<double>& weights, SeededRng& rng) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (total <= 0.0) throw std::logic_error("categorical with zero mass");
    double u = rng.uniform() * total;
    for (std::size_t j = 0; j < weights.size(); ++j) {
        u -= weights[j];
        if (u < 0.0) return j;
    }
    return weights.size() - 1;
}

// Truncated geometric on {1, ..., max_count} with success rate 1/mean.
std::size_t sample_label_count(double mean, std::size_t max_count, SeededRng& rng) {
    const double q = 1.0 / mean;
    std::size_t c = 1;
    while (c < max_count && rng.uniform() > q) ++c;
    return c;
}

}  // namespace

void Dataset::recount_frequencies(std::size_t num_labels) {
    label_frequencies.assign(num_labels, 0);
    for (const LabelVector& y : labels)
        for (std::size_t j = 0; j < num_labels; ++j)
            if (y.has(j)) ++label_frequencies[j];
}

DatasetSplits generate_longtail_dataset(const GeneratorConfig& cfg) {
    if (cfg.n_train == 0 || cfg.n_val == 0 || cfg.n_test == 0)
        throw std::invalid_argument("generator: every split must be non-empty");
    if (cfg.feature_dim == 0) throw std::invalid_argument("generator: feature_dim must be >= 1");
    if (cfg.num_labels < 2) throw std::invalid_argument("generator: need L >= 2");
    if (cfg.mean_labels < 1.0) throw std::invalid_argument("generator: mean_labels must be >= 1");
    if (cfg.mean_labels > static_cast<double>(cfg.num_labels))
        throw std::invalid_argument("generator: mean_labels > L is infeasible");
    if (cfg.zipf_exponent < 0.0) throw std::invalid_argument("generator: zipf exponent < 0");
    if (cfg.noise_scale < 0.0) throw std::invalid_argument("generator: noise scale < 0");
    if (cfg.cooccur_concentration <= 0.0)
        throw std::invalid_argument("generator: co-occurrence concentration must be > 0");

    const std::size_t total = cfg.n_train + cfg.n_val + cfg.n_test;
    const std::size_t L = cfg.num_labels;
    const std::size_t D = cfg.feature_dim;

    SeededRng rng(cfg.seed);

    // Fixed per-seed structure: zipf prior, label affinity embeddings,
    // and per-label feature anchors shared across splits.
    std::vector<double> prior(L);
    for (std::size_t j = 0; j < L; ++j)
        prior[j] = std::pow(static_cast<double>(j + 1), -cfg.zipf_exponent);

    const std::size_t affinity_dim = 8;
    DenseMatrix affinity(L, affinity_dim);
    for (double& v : affinity.values) v = rng.gaussian();
    for (std::size_t j = 0; j < L; ++j) {
        const Vec u = l2_normalize(affinity.row(j));
        auto row = affinity.row(j);
        for (std::size_t c = 0; c < affinity_dim; ++c) row[c] = u[c];
    }

    DenseMatrix anchors(L, D);
    for (double& v : anchors.values) v = rng.gaussian();

    DenseMatrix features(total, D);
    std::vector<LabelVector> labels(total);
    std::vector<double> weights(L);
    for (std::size_t i = 0; i < total; ++i) {
        const std::size_t count = sample_label_count(cfg.mean_labels, L, rng);
        LabelVector y(L);
        std::vector<std::size_t> chosen;
        for (std::size_t t = 0; t < count; ++t) {
            for (std::size_t j = 0; j < L; ++j) {
                if (y.has(j)) {
                    weights[j] = 0.0;
                    continue;
                }
                double tilt = 0.0;
                if (!chosen.empty()) {
                    const std::size_t last = chosen.back();
                    tilt = cfg.cooccur_concentration * dot(affinity.row(j), affinity.row(last));
                }
                weights[j] = prior[j] * std::exp(tilt);
            }
            const std::size_t j = sample_categorical(weights, rng);
            y.set(j);
            chosen.push_back(j);
        }
        labels[i] = y;
        auto x = features.row(i);
        for (std::size_t j = 0; j < L; ++j) {
            if (!y.has(j)) continue;
            const auto a = anchors.row(j);
            for (std::size_t c = 0; c < D; ++c) x[c] += a[c];
        }
        for (std::size_t c = 0; c < D; ++c) x[c] += cfg.noise_scale * rng.gaussian();
    }

    auto slice = [&](std::size_t begin, std::size_t count, const char* tag) {
        Dataset ds;
        ds.split = tag;
        ds.features = DenseMatrix(count, D);
        ds.labels.assign(labels.begin() + begin, labels.begin() + begin + count);
        for (std::size_t i = 0; i < count; ++i) {
            auto dst = ds.features.row(i);
            auto src = features.row(begin + i);
            for (std::size_t c = 0; c < D; ++c) dst[c] = src[c];
        }
        ds.recount_frequencies(L);
        return ds;
    };

    DatasetSplits out;
    out.train = slice(0, cfg.n_train, "train");
    out.val = slice(cfg.n_train, cfg.n_val, "val");
    out.test = slice(cfg.n_train + cfg.n_val, cfg.n_test, "test");
    return out;
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset file: " + path);

    Dataset ds;
    std::vector<std::vector<double>> rows;
    std::vector<std::vector<std::size_t>> label_rows;
    std::size_t width = 0;
    std::size_t max_label = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::parse_error& e) {
            throw std::runtime_error("malformed dataset line " + std::to_string(line_no) + ": " +
                                     e.what());
        }
        if (!rec.contains("features") || !rec.contains("labels"))
            throw std::runtime_error("dataset line " + std::to_string(line_no) +
                                     ": missing features/labels");
        std::vector<double> feats = rec["features"].get<std::vector<double>>();
        std::vector<std::size_t> labs = rec["labels"].get<std::vector<std::size_t>>();
        if (labs.empty())
            throw std::runtime_error("dataset line " + std::to_string(line_no) +
                                     ": empty label set");
        for (std::size_t t = 1; t < labs.size(); ++t)
            if (labs[t] <= labs[t - 1])
                throw std::runtime_error("dataset line " + std::to_string(line_no) +
                                         ": labels not strictly increasing");
        if (rows.empty()) {
            width = feats.size();
        } else if (feats.size() != width) {
            throw std::runtime_error("dataset line " + std::to_string(line_no) +
                                     ": inconsistent feature width");
        }
        for (std::size_t l : labs) max_label = std::max(max_label, l);
        rows.push_back(std::move(feats));
        label_rows.push_back(std::move(labs));
    }
    if (rows.empty()) throw std::runtime_error("dataset file is empty: " + path);

    const std::size_t L = max_label + 1;
    ds.features = DenseMatrix(rows.size(), width);
    ds.labels.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto dst = ds.features.row(i);
        for (std::size_t c = 0; c < width; ++c) dst[c] = rows[i][c];
        ds.labels[i] = LabelVector(L, label_rows[i]);
    }
    ds.recount_frequencies(L);
    return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write dataset file: " + path);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        json rec;
        rec["features"] = std::vector<double>(ds.features.row(i).begin(), ds.features.row(i).end());
        rec["labels"] = ds.labels[i].positive_indices();
        out << rec.dump() << '\n';
    }
}

std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, std::size_t batch_size,
                                                    std::uint64_t seed, std::size_t epoch) {
    if (batch_size < 2) throw std::invalid_argument("batch size must be >= 2");
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    SeededRng rng = SeededRng(seed).fork(0x6261746368ULL + epoch);
    rng.shuffle(order);

    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t end = std::min(n, start + batch_size);
        if (end - start < 2) break;  // drop the undersized remainder
        batches.emplace_back(order.begin() + start, order.begin() + end);
    }
    return batches;
}

}  // namespace mlcl
