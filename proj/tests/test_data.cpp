#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>

#include "mlcl/data.hpp"

using namespace mlcl;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) : path("/tmp/mlcl_test_" + name) {}
    ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("generator produces the requested shapes with at least one label each") {
    GeneratorConfig cfg;
    cfg.n_train = 300;
    cfg.n_val = 60;
    cfg.n_test = 50;
    cfg.feature_dim = 12;
    cfg.num_labels = 8;
    const DatasetSplits s = generate_longtail_dataset(cfg);
    CHECK(s.train.size() == 300);
    CHECK(s.val.size() == 60);
    CHECK(s.test.size() == 50);
    CHECK(s.train.feature_dim() == 12);
    CHECK(s.train.num_labels() == 8);
    CHECK(s.train.split == "train");
    CHECK(s.test.split == "test");
    for (const auto& y : s.train.labels) CHECK(y.popcount() >= 1);
    for (const auto& y : s.val.labels) CHECK(y.popcount() >= 1);
}

TEST_CASE("generator is deterministic in the seed") {
    GeneratorConfig cfg;
    cfg.n_train = 100;
    cfg.n_val = 20;
    cfg.n_test = 20;
    cfg.feature_dim = 8;
    cfg.num_labels = 6;
    const DatasetSplits a = generate_longtail_dataset(cfg);
    const DatasetSplits b = generate_longtail_dataset(cfg);
    CHECK(a.train.features.values == b.train.features.values);
    CHECK(a.test.features.values == b.test.features.values);
    cfg.seed = 2;
    const DatasetSplits c = generate_longtail_dataset(cfg);
    CHECK(a.train.features.values != c.train.features.values);
}

TEST_CASE("label marginals follow the long-tailed profile") {
    GeneratorConfig cfg;
    cfg.n_train = 3000;
    cfg.n_val = 10;
    cfg.n_test = 10;
    cfg.feature_dim = 8;
    cfg.num_labels = 10;
    const DatasetSplits s = generate_longtail_dataset(cfg);
    const auto& freq = s.train.label_frequencies;
    // head dominates tail under the Zipf prior
    CHECK(freq[0] > freq[9]);
    CHECK(freq[0] > 2 * freq[5]);
    // mean label count near the configured mean
    double mean = 0.0;
    for (const auto& y : s.train.labels) mean += static_cast<double>(y.popcount());
    mean /= static_cast<double>(s.train.size());
    CHECK(mean == doctest::Approx(cfg.mean_labels).epsilon(0.25));
}

TEST_CASE("frequencies recount matches stored labels") {
    GeneratorConfig cfg;
    cfg.n_train = 200;
    cfg.n_val = 20;
    cfg.n_test = 20;
    cfg.num_labels = 6;
    cfg.feature_dim = 4;
    DatasetSplits s = generate_longtail_dataset(cfg);
    const auto stored = s.train.label_frequencies;
    s.train.recount_frequencies(6);
    CHECK(s.train.label_frequencies == stored);
}

TEST_CASE("infeasible configurations are rejected") {
    GeneratorConfig cfg;
    cfg.num_labels = 3;
    cfg.mean_labels = 5.0;  // more labels per example than exist
    CHECK_THROWS_AS(generate_longtail_dataset(cfg), std::invalid_argument);
    GeneratorConfig zero;
    zero.n_train = 0;
    CHECK_THROWS_AS(generate_longtail_dataset(zero), std::invalid_argument);
}

TEST_CASE("jsonl round trip is exact") {
    GeneratorConfig cfg;
    cfg.n_train = 40;
    cfg.n_val = 10;
    cfg.n_test = 10;
    cfg.feature_dim = 5;
    cfg.num_labels = 4;
    const DatasetSplits s = generate_longtail_dataset(cfg);
    TempFile f("roundtrip.jsonl");
    save_dataset(s.train, f.path);
    const Dataset loaded = load_dataset(f.path);
    CHECK(loaded.size() == s.train.size());
    CHECK(loaded.features.values == s.train.features.values);
    for (std::size_t i = 0; i < loaded.size(); ++i) CHECK(loaded.labels[i] == s.train.labels[i]);
}

TEST_CASE("loader errors carry line numbers") {
    TempFile f("bad.jsonl");
    {
        std::ofstream out(f.path);
        out << R"({"features":[1.0,2.0],"labels":[0]})" << "\n";
        out << "not json\n";
    }
    try {
        load_dataset(f.path);
        FAIL("expected an exception");
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("loader rejects empty and non-increasing label lists") {
    TempFile f("labels.jsonl");
    {
        std::ofstream out(f.path);
        out << R"({"features":[1.0],"labels":[]})" << "\n";
    }
    CHECK_THROWS(load_dataset(f.path));
    {
        std::ofstream out(f.path);
        out << R"({"features":[1.0],"labels":[2,1]})" << "\n";
    }
    CHECK_THROWS(load_dataset(f.path));
    {
        std::ofstream out(f.path);
        out << R"({"features":[1.0,2.0],"labels":[0]})" << "\n";
        out << R"({"features":[1.0],"labels":[0]})" << "\n";  // width change
    }
    CHECK_THROWS(load_dataset(f.path));
}

TEST_CASE("batch indices partition the data and drop undersized remainders") {
    const auto batches = batch_indices(10, 4, 1, 0);
    // 4 + 4 + 2: the remainder of size 2 is kept (>= 2)
    REQUIRE(batches.size() == 3);
    CHECK(batches[2].size() == 2);
    std::vector<bool> seen(10, false);
    for (const auto& b : batches)
        for (std::size_t i : b) {
            CHECK(!seen[i]);
            seen[i] = true;
        }

    const auto with_singleton = batch_indices(9, 4, 1, 0);
    REQUIRE(with_singleton.size() == 2);  // trailing singleton dropped
}

TEST_CASE("batch order is deterministic per epoch and varies across epochs") {
    const auto a = batch_indices(32, 8, 5, 3);
    const auto b = batch_indices(32, 8, 5, 3);
    const auto c = batch_indices(32, 8, 5, 4);
    CHECK(a == b);
    CHECK(a != c);
    CHECK_THROWS_AS(batch_indices(10, 1, 1, 0), std::invalid_argument);
}
