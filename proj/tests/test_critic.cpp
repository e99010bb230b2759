#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "pessilab/critic.hpp"

using namespace pessilab;

namespace {

CriticEnsembleNet make_nets(int k, std::uint64_t seed) {
    Rng rng(seed);
    return CriticEnsembleNet::create(3, 1, {8, 8}, Activation::kRelu, k, rng);
}

}  // namespace

TEST_CASE("two members with unit gap reproduce the pairwise minimum") {
    // member outputs (1, 3) at beta 1 must produce lower bound 1
    CriticEnsembleNet nets = make_nets(2, 1);
    // zero out the networks and set the output biases to fixed values
    for (auto& p : nets.online) p.setZero();
    bias_view(nets.spec, nets.online[0], nets.spec.n_layers() - 1)(0) = 1.0;
    bias_view(nets.spec, nets.online[1], nets.spec.n_layers() - 1)(0) = 3.0;
    const Matrix s = Matrix::Zero(3, 1), a = Matrix::Zero(1, 1);
    const EnsembleForward fwd = ensemble_forward(nets, s, a, 1.0, false);
    REQUIRE(fwd.mean(0) == 2.0);
    REQUIRE(fwd.std(0) == 1.0);
    REQUIRE(fwd.lower_bound(0) == 1.0);
}

TEST_CASE("beta zero gives the plain mean") {
    CriticEnsembleNet nets = make_nets(3, 2);
    Rng rng(3);
    Matrix s(3, 5), a(1, 5);
    for (int i = 0; i < s.size(); ++i) s(i / 5, i % 5) = rng.uniform(-1.0, 1.0);
    for (int i = 0; i < 5; ++i) a(0, i) = rng.uniform(-1.0, 1.0);
    const EnsembleForward fwd = ensemble_forward(nets, s, a, 0.0, false);
    REQUIRE((fwd.lower_bound - fwd.mean).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("fresh targets equal the online networks") {
    CriticEnsembleNet nets = make_nets(2, 4);
    Rng rng(5);
    Matrix s(3, 4), a(1, 4);
    for (int i = 0; i < s.size(); ++i) s(i / 4, i % 4) = rng.uniform(-1.0, 1.0);
    for (int i = 0; i < 4; ++i) a(0, i) = rng.uniform(-1.0, 1.0);
    const EnsembleForward online = ensemble_forward(nets, s, a, 0.5, false);
    const EnsembleForward target = ensemble_forward(nets, s, a, 0.5, true);
    REQUIRE((online.member_values - target.member_values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("statistics match a direct per-column computation") {
    CriticEnsembleNet nets = make_nets(4, 6);
    Rng rng(7);
    Matrix s(3, 6), a(1, 6);
    for (int i = 0; i < s.size(); ++i) s(i / 6, i % 6) = rng.uniform(-1.0, 1.0);
    for (int i = 0; i < 6; ++i) a(0, i) = rng.uniform(-1.0, 1.0);
    const double beta = 0.7;
    const EnsembleForward fwd = ensemble_forward(nets, s, a, beta, false);
    for (int b = 0; b < 6; ++b) {
        double mean = 0.0;
        for (int i = 0; i < 4; ++i) mean += fwd.member_values(i, b);
        mean /= 4.0;
        double var = 0.0;
        for (int i = 0; i < 4; ++i) var += std::pow(fwd.member_values(i, b) - mean, 2);
        var /= 4.0;  // population form
        REQUIRE(fwd.mean(b) == Catch::Approx(mean).margin(1e-12));
        REQUIRE(fwd.std(b) == Catch::Approx(std::sqrt(var)).margin(1e-12));
        REQUIRE(fwd.lower_bound(b) == Catch::Approx(mean - beta * std::sqrt(var)).margin(1e-12));
    }
}

TEST_CASE("member weights differentiate the lower bound") {
    // finite differences on the member values themselves
    CriticEnsembleNet nets = make_nets(3, 8);
    Rng rng(9);
    Matrix s(3, 2), a(1, 2);
    for (int i = 0; i < s.size(); ++i) s(i / 2, i % 2) = rng.uniform(-1.0, 1.0);
    for (int i = 0; i < 2; ++i) a(0, i) = rng.uniform(-1.0, 1.0);
    const double beta = 1.3;
    const EnsembleForward fwd = ensemble_forward(nets, s, a, beta, false);
    const Matrix weights = lower_bound_member_weights(fwd, beta);

    auto lb_of = [&](const Matrix& member_values, int b) {
        double mean = 0.0;
        for (int i = 0; i < 3; ++i) mean += member_values(i, b);
        mean /= 3.0;
        double var = 0.0;
        for (int i = 0; i < 3; ++i) var += std::pow(member_values(i, b) - mean, 2);
        return mean - beta * std::sqrt(var / 3.0);
    };
    const double h = 1e-7;
    for (int b = 0; b < 2; ++b)
        for (int i = 0; i < 3; ++i) {
            Matrix plus = fwd.member_values, minus = fwd.member_values;
            plus(i, b) += h;
            minus(i, b) -= h;
            const double fd = (lb_of(plus, b) - lb_of(minus, b)) / (2.0 * h);
            REQUIRE(weights(i, b) == Catch::Approx(fd).margin(1e-6));
        }
}

TEST_CASE("member weights fall back to the mean when the spread vanishes") {
    CriticEnsembleNet nets = make_nets(2, 10);
    nets.online[1] = nets.online[0];
    const Matrix s = Matrix::Zero(3, 1), a = Matrix::Zero(1, 1);
    const EnsembleForward fwd = ensemble_forward(nets, s, a, 2.0, false);
    const Matrix weights = lower_bound_member_weights(fwd, 2.0);
    REQUIRE(weights(0, 0) == 0.5);
    REQUIRE(weights(1, 0) == 0.5);
}

TEST_CASE("negative beta is rejected") {
    CriticEnsembleNet nets = make_nets(2, 11);
    const Matrix s = Matrix::Zero(3, 1), a = Matrix::Zero(1, 1);
    REQUIRE_THROWS_AS(ensemble_forward(nets, s, a, -0.1, false), ParameterError);
}
