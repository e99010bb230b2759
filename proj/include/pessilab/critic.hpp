#ifndef PESSILAB_CRITIC_HPP_
#define PESSILAB_CRITIC_HPP_

#include <Eigen/Dense>
#include <vector>

#include "pessilab/mlp.hpp"

namespace pessilab {

// k independent (state, action) -> scalar networks plus target copies.
struct CriticEnsembleNet {
    MlpSpec spec;
    std::vector<Vector> online;
    std::vector<Vector> target;

    int size() const { return static_cast<int>(online.size()); }

    static CriticEnsembleNet create(int obs_dim, int action_dim, const std::vector<int>& hidden,
                                    Activation activation, int k, Rng& rng) {
        CriticEnsembleNet nets;
        nets.spec.layer_sizes.push_back(obs_dim + action_dim);
        for (int h : hidden) nets.spec.layer_sizes.push_back(h);
        nets.spec.layer_sizes.push_back(1);
        nets.spec.activation = activation;
        for (int i = 0; i < k; ++i) nets.online.push_back(init_params(nets.spec, rng));
        nets.target = nets.online;
        return nets;
    }

    void hard_copy_targets() { target = online; }
};

struct EnsembleForward {
    Matrix member_values;          // k x B
    Eigen::RowVectorXd mean;
    Eigen::RowVectorXd std;        // population standard deviation
    Eigen::RowVectorXd lower_bound;
    std::vector<MlpCache> caches;  // per member, only when requested
};

inline Matrix stack_inputs(const Matrix& states, const Matrix& actions) {
    Matrix input(states.rows() + actions.rows(), states.cols());
    input.topRows(states.rows()) = states;
    input.bottomRows(actions.rows()) = actions;
    return input;
}

inline EnsembleForward ensemble_forward(const CriticEnsembleNet& nets, const Matrix& states, const Matrix& actions,
                                        double beta, bool use_target, bool keep_cache = false) {
    if (beta < 0.0) throw ParameterError("ensemble_forward: beta must be nonnegative");
    const Matrix input = stack_inputs(states, actions);
    const auto& params = use_target ? nets.target : nets.online;
    const int k = nets.size();
    EnsembleForward out;
    out.member_values = Matrix(k, input.cols());
    if (keep_cache) out.caches.resize(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        MlpCache* cache = keep_cache ? &out.caches[static_cast<std::size_t>(i)] : nullptr;
        out.member_values.row(i) = mlp_forward(nets.spec, params[static_cast<std::size_t>(i)], input, cache).row(0);
    }
    out.mean = out.member_values.colwise().mean();
    Eigen::RowVectorXd variance = Eigen::RowVectorXd::Zero(input.cols());
    for (int i = 0; i < k; ++i) {
        const Eigen::RowVectorXd dev = out.member_values.row(i) - out.mean;
        variance += dev.cwiseProduct(dev);
    }
    variance /= static_cast<double>(k);
    out.std = variance.cwiseSqrt();
    out.lower_bound = out.mean - beta * out.std;
    return out;
}

// Per-member upstream weights for d(lower_bound)/d(member value):
//   1/k - beta * (Q_i - mean) / (k * std), with the std = 0 subgradient 1/k.
inline Matrix lower_bound_member_weights(const EnsembleForward& fwd, double beta) {
    const int k = static_cast<int>(fwd.member_values.rows());
    Matrix weights(k, fwd.member_values.cols());
    for (Eigen::Index b = 0; b < fwd.member_values.cols(); ++b) {
        for (int i = 0; i < k; ++i) {
            double w = 1.0 / k;
            if (fwd.std(b) > 0.0) w -= beta * (fwd.member_values(i, b) - fwd.mean(b)) / (k * fwd.std(b));
            weights(i, b) = w;
        }
    }
    return weights;
}

}  // namespace pessilab

#endif  // PESSILAB_CRITIC_HPP_
