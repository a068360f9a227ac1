#include "doctest.h"

#include "qig/rng.hpp"

#include <cmath>

using qig::Rng;

TEST_CASE("same seed gives an identical stream") {
    Rng a(42);
    Rng b(42);
    for (int i = 0; i < 1000; ++i) {
        CHECK(a.next_u64() == b.next_u64());
    }
}

TEST_CASE("serialize roundtrips mid-stream") {
    Rng a(7);
    for (int i = 0; i < 17; ++i) {
        a.next_u64();
    }
    Rng b = Rng::deserialize(a.serialize());
    CHECK(a == b);
    for (int i = 0; i < 100; ++i) {
        CHECK(a.normal() == b.normal());
    }
}

TEST_CASE("uniform stays in [0,1) and below() in range") {
    Rng rng(3);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        CHECK(rng.below(7) < 7);
    }
}

TEST_CASE("normal moments look gaussian") {
    Rng rng(11);
    const int n = 200000;
    double sum = 0.0;
    double sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sum_sq += x * x;
    }
    const double mean = sum / n;
    const double var = sum_sq / n - mean * mean;
    CHECK(std::abs(mean) < 0.01);
    CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("split streams are independent of later parent draws") {
    Rng parent1(5);
    Rng parent2(5);
    Rng child1 = parent1.split();
    Rng child2 = parent2.split();
    parent1.next_u64(); // advancing a parent must not affect its child
    for (int i = 0; i < 50; ++i) {
        CHECK(child1.next_u64() == child2.next_u64());
    }
}
