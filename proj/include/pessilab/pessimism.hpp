#ifndef PESSILAB_PESSIMISM_HPP_
#define PESSILAB_PESSIMISM_HPP_

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "pessilab/mdp.hpp"
#include "pessilab/rng.hpp"

namespace pessilab {

// Scalar pessimism plus its learning rate. Updates clamp at min_beta, which
// stays 0 unless negative beta is explicitly enabled.
struct PessimismState {
    double beta = 1.0;
    double pessimism_lr = 5e-5;
    double min_beta = 0.0;

    void apply_gradient(double grad) {
        beta = std::max(min_beta, beta - pessimism_lr * grad);
    }
};

// Frozen per-sample quantities every gradient-based adjuster consumes. All
// values are detached critic/policy outputs; next-state entries use a single
// sampled action a' ~ pi(.|s').
struct PessimismBatch {
    Vector q_value;          // critic estimate of Q^pi(s,a): ensemble mean
    Vector reward;
    Vector q_mu_next;        // Q^mu(s', a')
    Vector q_sigma_next;     // Q^sigma(s', a')
    Vector alpha_logpi_next; // alpha * log pi(a'|s')
    double gamma = 0.99;

    Eigen::Index size() const { return q_value.size(); }

    // residual delta(beta) = q - r - gamma * (Q^mu' - beta Q^sigma' - alpha log pi')
    Vector residual(double beta) const {
        return q_value - reward -
               gamma * (q_mu_next - beta * q_sigma_next - alpha_logpi_next);
    }
};

// Squared-residual loss the VPL rule descends; exposed for finite-difference
// checks of the analytic gradient.
inline double vpl_loss(const PessimismBatch& batch, double beta) {
    return batch.residual(beta).squaredNorm() / static_cast<double>(batch.size());
}

// d/d beta of vpl_loss: mean of 2 * delta * gamma * Q^sigma(s',a').
inline double vpl_gradient(const PessimismBatch& batch, double beta) {
    const Vector delta = batch.residual(beta);
    return 2.0 * batch.gamma * delta.dot(batch.q_sigma_next) / static_cast<double>(batch.size());
}

// Dual-form gradient: the detached residual itself, not scaled by the critic
// disagreement.
inline double dual_gradient(const PessimismBatch& batch, double beta) {
    return batch.residual(beta).mean();
}

inline void vpl_update(PessimismState& state, const PessimismBatch& batch) {
    state.apply_gradient(vpl_gradient(batch, state.beta));
}

inline void gpl_update(PessimismState& state, const PessimismBatch& batch) {
    state.apply_gradient(dual_gradient(batch, state.beta));
}

// ---------------------------------------------------------------------------
// OPL: lambda-returns over a short on-policy window.

struct OplEntry {
    double reward = 0.0;
    double q_value = 0.0;     // critic estimate at (s_t, a_t), used as Q^mu(s,a)
    double v_lb_next = 0.0;   // lower-bound value estimate at s_{t+1}
};

struct OplState {
    std::vector<OplEntry> window;  // arrival order, at most max_length entries
    int max_length = 8;
    double lambda = 0.95;

    void push(OplEntry e) {
        window.push_back(e);
        if (static_cast<int>(window.size()) > max_length) window.erase(window.begin());
    }
    void clear() { window.clear(); }
};

// Truncated TD(lambda) targets via the backward recursion
//   Qhat_t = r_t + gamma * ((1 - lambda) * V_{t+1} + lambda * Qhat_{t+1}),
// with the tail Qhat_{n-1} = r_{n-1} + gamma * V_n.
inline std::vector<double> opl_lambda_return(const OplState& state, double gamma) {
    if (state.window.empty()) throw ParameterError("opl_lambda_return: empty window");
    const std::size_t n = state.window.size();
    std::vector<double> q_hat(n);
    q_hat[n - 1] = state.window[n - 1].reward + gamma * state.window[n - 1].v_lb_next;
    for (std::size_t t = n - 1; t-- > 0;) {
        q_hat[t] = state.window[t].reward +
                   gamma * ((1.0 - state.lambda) * state.window[t].v_lb_next + state.lambda * q_hat[t + 1]);
    }
    return q_hat;
}

// Dual-form update with the lambda-return replacing the one-step target:
// residual_t = Q^mu(s_t, a_t) - Qhat_t. At lambda = 0 the lambda-return is
// r_t + gamma * V^lb(s_{t+1}), recovering the one-step dual residual exactly.
// Empty window: skipped.
inline bool opl_update(PessimismState& state, const OplState& opl, double gamma) {
    if (opl.window.empty()) return false;
    const auto q_hat = opl_lambda_return(opl, gamma);
    double acc = 0.0;
    for (std::size_t t = 0; t < opl.window.size(); ++t) {
        acc += opl.window[t].q_value - q_hat[t];
    }
    state.apply_gradient(acc / static_cast<double>(opl.window.size()));
    return true;
}

// ---------------------------------------------------------------------------
// TOP: two-armed softmax bandit over beta in {0, 1}, EMA arm values fed by
// min-max normalized episode returns.

struct TopBanditState {
    double arm_values[2] = {0.0, 0.0};
    double bandit_lr = 0.1;
    int current_arm = -1;
    double running_min = 0.0;
    double running_max = 0.0;
    bool seen_return = false;
};

inline int top_select(TopBanditState& bandit, Rng& rng) {
    const double hi = std::max(bandit.arm_values[0], bandit.arm_values[1]);
    const double e0 = std::exp(bandit.arm_values[0] - hi);
    const double e1 = std::exp(bandit.arm_values[1] - hi);
    bandit.current_arm = rng.uniform() < e1 / (e0 + e1) ? 1 : 0;
    return bandit.current_arm;
}

inline void top_update(TopBanditState& bandit, double episode_return) {
    if (bandit.current_arm < 0) throw ParameterError("top_update: no arm selected this episode");
    if (!bandit.seen_return) {
        bandit.running_min = bandit.running_max = episode_return;
        bandit.seen_return = true;
    } else {
        bandit.running_min = std::min(bandit.running_min, episode_return);
        bandit.running_max = std::max(bandit.running_max, episode_return);
    }
    const double span = bandit.running_max - bandit.running_min;
    const double normalized = span > 0.0 ? (episode_return - bandit.running_min) / span : 0.5;
    double& value = bandit.arm_values[bandit.current_arm];
    value = (1.0 - bandit.bandit_lr) * value + bandit.bandit_lr * normalized;
    bandit.current_arm = -1;
}

// ---------------------------------------------------------------------------
// Adjuster configuration. The ablation grid composes a gradient form with a
// data source; the named algorithms are fixed points of that grid.

enum class AdjusterKind { kFixed, kVpl, kGpl, kOpl, kTop, kAblation };
enum class PessimismLoss { kDual, kVpl };
enum class PessimismSource { kReplay, kValidation, kOnline };

struct AdjusterConfig {
    AdjusterKind kind = AdjusterKind::kFixed;
    PessimismLoss loss = PessimismLoss::kVpl;       // ablation only
    PessimismSource source = PessimismSource::kValidation;
    double pessimism_lr = 5e-5;
    double initial_beta = 1.0;
    bool allow_negative_beta = false;
    int opl_window = 8;
    double opl_lambda = 0.95;
    double bandit_lr = 0.1;

    // effective (loss, source) pair after resolving the named algorithms
    PessimismLoss effective_loss() const {
        switch (kind) {
            case AdjusterKind::kVpl: return PessimismLoss::kVpl;
            case AdjusterKind::kGpl:
            case AdjusterKind::kOpl: return PessimismLoss::kDual;
            default: return loss;
        }
    }
    PessimismSource effective_source() const {
        switch (kind) {
            case AdjusterKind::kVpl: return PessimismSource::kValidation;
            case AdjusterKind::kGpl: return PessimismSource::kReplay;
            case AdjusterKind::kOpl: return PessimismSource::kOnline;
            default: return source;
        }
    }
};

inline AdjusterKind adjuster_kind_from_string(const std::string& name) {
    if (name == "fixed") return AdjusterKind::kFixed;
    if (name == "vpl") return AdjusterKind::kVpl;
    if (name == "gpl") return AdjusterKind::kGpl;
    if (name == "opl") return AdjusterKind::kOpl;
    if (name == "top") return AdjusterKind::kTop;
    if (name == "ablation") return AdjusterKind::kAblation;
    throw ParameterError("unknown adjuster: " + name);
}

inline std::string adjuster_kind_to_string(AdjusterKind kind) {
    switch (kind) {
        case AdjusterKind::kFixed: return "fixed";
        case AdjusterKind::kVpl: return "vpl";
        case AdjusterKind::kGpl: return "gpl";
        case AdjusterKind::kOpl: return "opl";
        case AdjusterKind::kTop: return "top";
        case AdjusterKind::kAblation: return "ablation";
    }
    return "fixed";
}

// One gradient-form step on a frozen batch; shared by GPL, VPL and the
// ablation grid.
inline void pessimism_gradient_update(PessimismState& state, PessimismLoss loss, const PessimismBatch& batch) {
    const double grad = loss == PessimismLoss::kVpl ? vpl_gradient(batch, state.beta)
                                                    : dual_gradient(batch, state.beta);
    state.apply_gradient(grad);
}

}  // namespace pessilab

#endif  // PESSILAB_PESSIMISM_HPP_
