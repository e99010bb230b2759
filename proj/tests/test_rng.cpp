#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <vector>

#include "pessilab/rng.hpp"

using pessilab::Rng;

TEST_CASE("equal seeds give equal streams") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("different seeds diverge") {
    Rng a(1), b(2);
    int equal = 0;
    for (int i = 0; i < 64; ++i)
        if (a.next_u64() == b.next_u64()) ++equal;
    REQUIRE(equal == 0);
}

TEST_CASE("uniform stays in [0,1)") {
    Rng rng(7);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
    }
}

TEST_CASE("uniform range endpoints map correctly") {
    Rng rng(11);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform(-3.0, 5.0);
        REQUIRE(u >= -3.0);
        REQUIRE(u < 5.0);
    }
}

TEST_CASE("uniform_int covers all buckets near-uniformly") {
    Rng rng(13);
    const int n = 10;
    const int draws = 100000;
    std::vector<int> counts(n, 0);
    for (int i = 0; i < draws; ++i) ++counts[static_cast<int>(rng.uniform_int(n))];
    const double expected = static_cast<double>(draws) / n;
    const double sigma = std::sqrt(expected * (1.0 - 1.0 / n));
    for (int c : counts) REQUIRE(std::abs(c - expected) <= 4.0 * sigma);
}

TEST_CASE("normal has roughly standard moments") {
    Rng rng(17);
    const int draws = 100000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < draws; ++i) {
        const double x = rng.normal();
        sum += x;
        sum_sq += x * x;
    }
    const double mean = sum / draws;
    const double var = sum_sq / draws - mean * mean;
    // 3 standard errors: se(mean) = 1/sqrt(n), se(var) ~ sqrt(2/n)
    REQUIRE(std::abs(mean) <= 3.0 / std::sqrt(static_cast<double>(draws)));
    REQUIRE(std::abs(var - 1.0) <= 3.0 * std::sqrt(2.0 / draws));
}

TEST_CASE("dirichlet rows are distributions") {
    Rng rng(19);
    for (int i = 0; i < 100; ++i) {
        const auto row = rng.dirichlet_uniform(6);
        double total = 0.0;
        for (double x : row) {
            REQUIRE(x >= 0.0);
            total += x;
        }
        REQUIRE(std::abs(total - 1.0) < 1e-12);
    }
}

TEST_CASE("derived substreams are reproducible and distinct") {
    Rng base(23);
    Rng d1 = base.derive(1);
    Rng d1_again = Rng(23).derive(1);
    Rng d2 = base.derive(2);
    REQUIRE(d1.next_u64() == d1_again.next_u64());
    REQUIRE(Rng(23).derive(1).next_u64() != d2.next_u64());
}

TEST_CASE("deriving does not advance the parent stream") {
    Rng a(29);
    Rng b(29);
    (void)a.derive(5);
    REQUIRE(a.next_u64() == b.next_u64());
}
