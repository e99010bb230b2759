#ifndef PESSILAB_POLICY_HPP_
#define PESSILAB_POLICY_HPP_

#include <Eigen/Dense>
#include <cmath>

#include "pessilab/mlp.hpp"
#include "pessilab/rng.hpp"

namespace pessilab {

constexpr double kLogStdMin = -20.0;
constexpr double kLogStdMax = 2.0;
constexpr double kTanhGuard = 1e-6;
constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // 0.5 * log(2*pi)

enum class SampleMode { kStochastic, kGreedy };

// Squashed-Gaussian policy: the network emits (mean, log-std) per action
// dimension; actions are tanh(mean + std * eps) with the change-of-variables
// log-density correction.
struct GaussianPolicyHead {
    MlpSpec spec;
    Vector params;
    int action_dim = 0;

    static GaussianPolicyHead create(int obs_dim, int action_dim, const std::vector<int>& hidden,
                                     Activation activation, Rng& rng) {
        GaussianPolicyHead head;
        head.action_dim = action_dim;
        head.spec.layer_sizes.push_back(obs_dim);
        for (int h : hidden) head.spec.layer_sizes.push_back(h);
        head.spec.layer_sizes.push_back(2 * action_dim);
        head.spec.activation = activation;
        head.params = init_params(head.spec, rng);
        // log-std output biases start at -1
        auto bias = bias_view(head.spec, head.params, head.spec.n_layers() - 1);
        for (int d = 0; d < action_dim; ++d) bias(action_dim + d) = -1.0;
        return head;
    }
};

// Everything needed to evaluate and differentiate a batch of sampled actions.
struct PolicyBatch {
    Matrix actions;        // action_dim x B, strictly inside (-1, 1)
    Eigen::RowVectorXd log_probs;
    Matrix mu;             // action_dim x B
    Matrix log_std;        // clamped
    Matrix clamp_mask;     // 1 where the clamp is inactive (gradient passes)
    Matrix eps;            // standard normal draws (zero in greedy mode)
    MlpCache cache;
};

inline PolicyBatch policy_sample_batch(const GaussianPolicyHead& head, const Matrix& states, Rng& rng,
                                       SampleMode mode) {
    PolicyBatch out;
    const Matrix raw = mlp_forward(head.spec, head.params, states, &out.cache);
    if (!raw.allFinite()) throw NumericError("policy_sample: non-finite head output");
    const int ad = head.action_dim;
    const Eigen::Index batch = states.cols();
    out.mu = raw.topRows(ad);
    out.log_std = raw.bottomRows(ad);
    out.clamp_mask = Matrix::Ones(ad, batch);
    for (Eigen::Index b = 0; b < batch; ++b) {
        for (int d = 0; d < ad; ++d) {
            double& ls = out.log_std(d, b);
            if (ls < kLogStdMin || ls > kLogStdMax) {
                ls = std::clamp(ls, kLogStdMin, kLogStdMax);
                out.clamp_mask(d, b) = 0.0;
            }
        }
    }
    out.eps = Matrix::Zero(ad, batch);
    if (mode == SampleMode::kStochastic) {
        for (Eigen::Index b = 0; b < batch; ++b)
            for (int d = 0; d < ad; ++d) out.eps(d, b) = rng.normal();
    }
    const Matrix sigma = out.log_std.array().exp().matrix();
    const Matrix x = out.mu + sigma.cwiseProduct(out.eps);
    out.actions = x.array().tanh().matrix();
    out.log_probs = Eigen::RowVectorXd::Zero(batch);
    for (Eigen::Index b = 0; b < batch; ++b) {
        double lp = 0.0;
        for (int d = 0; d < ad; ++d) {
            const double t = out.actions(d, b);
            lp += -0.5 * out.eps(d, b) * out.eps(d, b) - out.log_std(d, b) - kLogSqrt2Pi -
                  std::log(1.0 - t * t + kTanhGuard);
        }
        out.log_probs(b) = lp;
    }
    return out;
}

// Single-state convenience wrapper for environment interaction.
inline std::pair<Vector, double> policy_sample(const GaussianPolicyHead& head, const Vector& state, Rng& rng,
                                               SampleMode mode) {
    const PolicyBatch batch = policy_sample_batch(head, state, rng, mode);
    return {batch.actions.col(0), batch.log_probs(0)};
}

// Gradient of sum_b [logp_weight(b) * log_prob(b) + action_grad(:,b) . a(:,b)]
// w.r.t. the head parameters, reparameterized through x = mu + sigma * eps.
// The Gaussian term -0.5*eps^2 is constant under reparameterization, so only
// the tanh correction couples log_prob to x.
inline Vector policy_backward(const GaussianPolicyHead& head, const PolicyBatch& batch,
                              const Eigen::RowVectorXd& logp_weight, const Matrix& action_grad) {
    const int ad = head.action_dim;
    const Eigen::Index n = batch.actions.cols();
    Matrix upstream(2 * ad, n);
    for (Eigen::Index b = 0; b < n; ++b) {
        for (int d = 0; d < ad; ++d) {
            const double t = batch.actions(d, b);
            const double one_minus_t2 = 1.0 - t * t;
            const double guard = one_minus_t2 + kTanhGuard;
            const double dlogp_dx = 2.0 * t * one_minus_t2 / guard;
            const double dx = logp_weight(b) * dlogp_dx + action_grad(d, b) * one_minus_t2;
            const double sigma_eps = std::exp(batch.log_std(d, b)) * batch.eps(d, b);
            upstream(d, b) = dx;
            upstream(ad + d, b) = (dx * sigma_eps - logp_weight(b)) * batch.clamp_mask(d, b);
        }
    }
    return mlp_backward(head.spec, head.params, batch.cache, upstream);
}

}  // namespace pessilab

#endif  // PESSILAB_POLICY_HPP_
