#ifndef PESSILAB_ADAM_HPP_
#define PESSILAB_ADAM_HPP_

#include <Eigen/Dense>
#include <cmath>

#include "pessilab/mdp.hpp"

namespace pessilab {

struct AdamState {
    long step_count = 0;
    Vector first_moment;
    Vector second_moment;
    double learning_rate = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static AdamState create(Eigen::Index dim, double learning_rate) {
        AdamState s;
        s.first_moment = Vector::Zero(dim);
        s.second_moment = Vector::Zero(dim);
        s.learning_rate = learning_rate;
        return s;
    }

    void reset() {
        step_count = 0;
        first_moment.setZero();
        second_moment.setZero();
    }
};

// Standard bias-corrected Adam update, in place. Refuses non-finite gradients.
inline void adam_step(AdamState& state, Vector& params, const Vector& grad) {
    if (params.size() != grad.size() || state.first_moment.size() != grad.size())
        throw ParameterError("adam_step: shape mismatch");
    if (!grad.allFinite()) throw NumericError("adam_step: non-finite gradient, update refused");
    state.step_count += 1;
    state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * grad;
    state.second_moment = state.beta2 * state.second_moment + (1.0 - state.beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
    params -= (state.learning_rate / c1) * state.first_moment.cwiseQuotient(
                  ((state.second_moment / c2).cwiseSqrt().array() + state.epsilon).matrix());
}

// target <- (1 - tau) * target + tau * online
inline void polyak_update(Vector& target, const Vector& online, double tau) {
    if (tau < 0.0 || tau > 1.0) throw ParameterError("polyak_update: tau must be in [0,1]");
    target = (1.0 - tau) * target + tau * online;
}

}  // namespace pessilab

#endif  // PESSILAB_ADAM_HPP_
