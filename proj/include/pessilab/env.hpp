#ifndef PESSILAB_ENV_HPP_
#define PESSILAB_ENV_HPP_

#include <cmath>
#include <memory>
#include <utility>

#include "pessilab/mdp.hpp"
#include "pessilab/rng.hpp"

namespace pessilab {

struct PendulumSpec {
    double gravity = 10.0;
    double mass = 1.0;
    double length = 1.0;
    double dt = 0.05;
    double max_torque = 2.0;
    double max_speed = 8.0;
    int episode_length = 200;
};

inline double wrap_angle(double theta) {
    theta = std::fmod(theta + M_PI, 2.0 * M_PI);
    if (theta < 0.0) theta += 2.0 * M_PI;
    return theta - M_PI;
}

struct PendulumState {
    double theta = 0.0;
    double theta_dot = 0.0;
};

// Semi-implicit Euler step; torque clamped before integration.
inline std::pair<PendulumState, double> pendulum_step(const PendulumSpec& spec, PendulumState state, double torque) {
    if (!std::isfinite(state.theta) || !std::isfinite(state.theta_dot) || !std::isfinite(torque))
        throw NumericError("pendulum_step: non-finite state or torque");
    const double u = std::clamp(torque, -spec.max_torque, spec.max_torque);
    const double wrapped = wrap_angle(state.theta);
    const double reward = -(wrapped * wrapped + 0.1 * state.theta_dot * state.theta_dot + 0.001 * u * u);

    const double g = spec.gravity;
    const double m = spec.mass;
    const double l = spec.length;
    double theta_dot = state.theta_dot + spec.dt * (3.0 * g / (2.0 * l) * std::sin(state.theta) + 3.0 / (m * l * l) * u);
    theta_dot = std::clamp(theta_dot, -spec.max_speed, spec.max_speed);
    const double theta = state.theta + spec.dt * theta_dot;
    return {PendulumState{theta, theta_dot}, reward};
}

struct EnvStep {
    Vector obs;
    double reward = 0.0;
    bool terminal = false;      // MDP termination; never set by the built-in tasks
    bool episode_end = false;   // fixed-length time limit, bootstrap still applies
};

// Minimal environment surface shared by the pendulum and tabular tasks.
class Environment {
  public:
    virtual ~Environment() = default;
    virtual int obs_dim() const = 0;
    virtual int action_dim() const = 0;
    virtual int episode_length() const = 0;
    virtual Vector reset(Rng& rng) = 0;
    virtual EnvStep step(const Vector& action) = 0;  // action in (-1, 1)^d
    virtual std::unique_ptr<Environment> clone() const = 0;
};

// Swing-up task; observation (cos theta, sin theta, theta_dot), torque scaled
// from the (-1, 1) policy action.
class PendulumEnv final : public Environment {
  public:
    explicit PendulumEnv(PendulumSpec spec = {}) : spec_(spec) {}

    int obs_dim() const override { return 3; }
    int action_dim() const override { return 1; }
    int episode_length() const override { return spec_.episode_length; }

    Vector reset(Rng& rng) override {
        state_.theta = rng.uniform(-M_PI, M_PI);
        state_.theta_dot = rng.uniform(-1.0, 1.0);
        steps_ = 0;
        return observe();
    }

    EnvStep step(const Vector& action) override {
        const double torque = action(0) * spec_.max_torque;
        auto [next, reward] = pendulum_step(spec_, state_, torque);
        state_ = next;
        ++steps_;
        return EnvStep{observe(), reward, false, steps_ >= spec_.episode_length};
    }

    std::unique_ptr<Environment> clone() const override { return std::make_unique<PendulumEnv>(*this); }

    const PendulumState& state() const { return state_; }

  private:
    Vector observe() const {
        Vector obs(3);
        obs << std::cos(state_.theta), std::sin(state_.theta), state_.theta_dot;
        return obs;
    }

    PendulumSpec spec_;
    PendulumState state_{};
    int steps_ = 0;
};

// Finite MDP wrapped for the continuous-action agent: one-hot observations and
// a scalar action in (-1, 1) binned into the discrete action set. Episodes are
// fixed-length segments with bootstrap-on-timeout; terminal is never set.
class TabularEnv final : public Environment {
  public:
    explicit TabularEnv(MdpSpec mdp, int episode_length = 200)
        : mdp_(std::move(mdp)), episode_length_(episode_length) {}

    int obs_dim() const override { return mdp_.n_states; }
    int action_dim() const override { return 1; }
    int episode_length() const override { return episode_length_; }

    Vector reset(Rng& rng) override {
        const double u = rng.uniform();
        double cumulative = 0.0;
        state_ = mdp_.n_states - 1;
        for (int s = 0; s < mdp_.n_states; ++s) {
            cumulative += mdp_.p0(s);
            if (u < cumulative) {
                state_ = s;
                break;
            }
        }
        steps_ = 0;
        rng_ = rng.derive(0x7AB);
        return observe();
    }

    EnvStep step(const Vector& action) override {
        const int a = bin_action(action(0));
        const auto t = sample_transition(mdp_, state_, a, rng_);
        state_ = t.s_next;
        ++steps_;
        return EnvStep{observe(), t.r, false, steps_ >= episode_length_};
    }

    std::unique_ptr<Environment> clone() const override { return std::make_unique<TabularEnv>(*this); }

    int bin_action(double a) const {
        const double x = std::clamp((a + 1.0) / 2.0, 0.0, 1.0);
        return std::min(mdp_.n_actions - 1, static_cast<int>(x * mdp_.n_actions));
    }

    const MdpSpec& mdp() const { return mdp_; }
    int state() const { return state_; }

  private:
    Vector observe() const {
        Vector obs = Vector::Zero(mdp_.n_states);
        obs(state_) = 1.0;
        return obs;
    }

    MdpSpec mdp_;
    int episode_length_;
    int state_ = 0;
    int steps_ = 0;
    Rng rng_{0};
};

}  // namespace pessilab

#endif  // PESSILAB_ENV_HPP_
