#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mlcl/label.hpp"

using namespace mlcl;

TEST_CASE("construction from positive indices") {
    LabelVector y(6, {0, 3, 5});
    CHECK(y.popcount() == 3);
    CHECK(y.has(0));
    CHECK(!y.has(1));
    CHECK(y.has(5));
    CHECK(y.positive_indices() == std::vector<std::size_t>{0, 3, 5});
}

TEST_CASE("out-of-range positive index is rejected") {
    CHECK_THROWS_AS(LabelVector(4, {4}), std::out_of_range);
}

TEST_CASE("set operations match hand counts") {
    LabelVector a(5, {0, 1, 3});
    LabelVector b(5, {1, 3, 4});
    CHECK(intersection_count(a, b) == 2);
    CHECK(union_count(a, b) == 4);
    CHECK(label_dot(a, b) == 2);
    CHECK(jaccard(a, b) == doctest::Approx(0.5));
}

TEST_CASE("jaccard is symmetric, bounded, and 1 on itself") {
    LabelVector a(5, {0, 2});
    LabelVector b(5, {2, 3, 4});
    CHECK(jaccard(a, b) == jaccard(b, a));
    CHECK(jaccard(a, a) == doctest::Approx(1.0));
    const double j = jaccard(a, b);
    CHECK(j >= 0.0);
    CHECK(j <= 1.0);
}

TEST_CASE("jaccard of two empty vectors is 0 by convention") {
    LabelVector a(5), b(5);
    CHECK(jaccard(a, b) == 0.0);
}

TEST_CASE("disjoint labels have zero overlap") {
    LabelVector a(6, {0, 1});
    LabelVector b(6, {4, 5});
    CHECK(jaccard(a, b) == 0.0);
    CHECK(label_dot(a, b) == 0);
}
