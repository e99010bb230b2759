#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <set>

#include "pessilab/replay.hpp"

using namespace pessilab;

namespace {

Transition make_transition(std::uint64_t id) {
    Transition t;
    t.s = Vector::Constant(2, static_cast<double>(id));
    t.a = Vector::Constant(1, 0.0);
    t.r = static_cast<double>(id);
    t.s_next = t.s;
    t.id = id;
    return t;
}

}  // namespace

TEST_CASE("ring buffer evicts the oldest records first") {
    ReplayBuffer buf(3);
    for (std::uint64_t i = 0; i < 5; ++i) buf.add(make_transition(i));
    REQUIRE(buf.size() == 3);
    REQUIRE(buf.insertions() == 5);
    std::set<std::uint64_t> ids;
    for (std::size_t i = 0; i < buf.size(); ++i) ids.insert(buf.at(i).id);
    REQUIRE(ids == std::set<std::uint64_t>{2, 3, 4});
}

TEST_CASE("sampling from an empty buffer is an error") {
    ReplayBuffer buf(4);
    Rng rng(1);
    REQUIRE_THROWS_AS(buf.sample(2, rng), ParameterError);
}

TEST_CASE("sampling is uniform over stored records") {
    ReplayBuffer buf(100);
    for (std::uint64_t i = 0; i < 100; ++i) buf.add(make_transition(i));
    Rng rng(2);
    const int draws = 100000;
    std::vector<int> counts(100, 0);
    for (const Transition* t : buf.sample(draws, rng)) ++counts[static_cast<int>(t->id)];
    const double expected = draws / 100.0;
    const double sigma = std::sqrt(draws * 0.01 * 0.99);
    for (int c : counts) REQUIRE(std::abs(c - expected) <= 3.5 * sigma);
}

TEST_CASE("zero split ratio sends everything to training") {
    Rng rng(3);
    for (int i = 0; i < 1000; ++i)
        REQUIRE(route_transition(0.0, rng) == BufferDestination::kTraining);
}

TEST_CASE("split fractions follow the requested ratio") {
    for (double v : {1.0 / 128.0, 1.0 / 32.0, 1.0 / 8.0, 0.5}) {
        Rng rng(static_cast<std::uint64_t>(v * 1e6));
        const int n = 64000;
        int validation = 0;
        for (int i = 0; i < n; ++i)
            if (route_transition(v, rng) == BufferDestination::kValidation) ++validation;
        const double sigma = std::sqrt(n * v * (1.0 - v));
        REQUIRE(std::abs(validation - n * v) <= 3.0 * sigma);
    }
}

TEST_CASE("routing consumes one draw regardless of the ratio") {
    // two streams with the same seed but different ratios stay aligned
    Rng a(7), b(7);
    for (int i = 0; i < 100; ++i) {
        (void)route_transition(0.0, a);
        (void)route_transition(0.25, b);
    }
    REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("routing rejects ratios outside the half-open unit interval") {
    Rng rng(8);
    REQUIRE_THROWS_AS(route_transition(-0.1, rng), ParameterError);
    REQUIRE_THROWS_AS(route_transition(1.0, rng), ParameterError);
}

TEST_CASE("exclusive routing never duplicates a record") {
    ReplayBuffer train(100000), val(100000);
    Rng rng(9);
    for (std::uint64_t i = 0; i < 20000; ++i) {
        const Transition t = make_transition(i);
        if (route_transition(0.25, rng) == BufferDestination::kValidation)
            val.add(t);
        else
            train.add(t);
    }
    std::set<std::uint64_t> train_ids, val_ids;
    for (std::size_t i = 0; i < train.size(); ++i) train_ids.insert(train.at(i).id);
    for (std::size_t i = 0; i < val.size(); ++i) val_ids.insert(val.at(i).id);
    REQUIRE(train_ids.size() + val_ids.size() == 20000);
    for (std::uint64_t id : val_ids) REQUIRE(train_ids.count(id) == 0);
}
