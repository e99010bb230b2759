#ifndef PESSILAB_AGENT_HPP_
#define PESSILAB_AGENT_HPP_

#include <Eigen/Dense>
#include <cmath>
#include <deque>
#include <memory>
#include <optional>
#include <vector>

#include "pessilab/adam.hpp"
#include "pessilab/critic.hpp"
#include "pessilab/env.hpp"
#include "pessilab/pessimism.hpp"
#include "pessilab/policy.hpp"
#include "pessilab/replay.hpp"

namespace pessilab {

struct AgentConfig {
    double gamma = 0.99;
    int batch_size = 256;
    int replay_ratio = 2;
    double tau = 0.005;
    double actor_lr = 3e-4;
    double critic_lr = 3e-4;
    double alpha_lr = 3e-4;
    double initial_alpha = 1.0;
    // NaN resolves to -action_dim / 2 when the agent is built
    double target_entropy = std::numeric_limits<double>::quiet_NaN();
    int ensemble_size = 2;
    int initial_random_steps = 10000;
    std::vector<int> hidden = {64, 64};
    Activation activation = Activation::kRelu;
    std::size_t buffer_capacity = 0;  // 0 -> resolved to the total step budget

    void validate() const {
        if (!(gamma > 0.0 && gamma < 1.0)) throw ParameterError("AgentConfig: gamma must be in (0,1)");
        if (batch_size < 1 || replay_ratio < 1 || ensemble_size < 1)
            throw ParameterError("AgentConfig: sizes must be positive");
        if (tau < 0.0 || tau > 1.0) throw ParameterError("AgentConfig: tau must be in [0,1]");
        if (initial_alpha <= 0.0) throw ParameterError("AgentConfig: initial_alpha must be positive");
    }
};

struct TemperatureState {
    double log_alpha = 0.0;
    double target_entropy = -0.5;

    double alpha() const { return std::exp(log_alpha); }
};

struct BatchMatrices {
    Matrix states;
    Matrix actions;
    Vector rewards;
    Matrix next_states;
    Vector bootstrap_mask;  // 0 where terminal
};

inline BatchMatrices assemble_batch(const std::vector<const Transition*>& batch) {
    const Eigen::Index n = static_cast<Eigen::Index>(batch.size());
    BatchMatrices m;
    m.states = Matrix(batch[0]->s.size(), n);
    m.actions = Matrix(batch[0]->a.size(), n);
    m.rewards = Vector(n);
    m.next_states = Matrix(batch[0]->s_next.size(), n);
    m.bootstrap_mask = Vector(n);
    for (Eigen::Index b = 0; b < n; ++b) {
        const Transition& t = *batch[static_cast<std::size_t>(b)];
        m.states.col(b) = t.s;
        m.actions.col(b) = t.a;
        m.rewards(b) = t.r;
        m.next_states.col(b) = t.s_next;
        m.bootstrap_mask(b) = t.terminal ? 0.0 : 1.0;
    }
    return m;
}

// MaxEnt actor-critic with generalized pessimistic targets. Owns networks and
// optimizer state; the environment loop lives in TrainingSession.
class SacAgent {
  public:
    SacAgent(int obs_dim, int action_dim, AgentConfig cfg, std::uint64_t init_seed)
        : cfg_(std::move(cfg)), obs_dim_(obs_dim), action_dim_(action_dim) {
        cfg_.validate();
        if (std::isnan(cfg_.target_entropy)) cfg_.target_entropy = -0.5 * action_dim;
        initialize(init_seed);
    }

    // Re-initializes actor, critics, targets, temperature and optimizer state.
    // Replay buffers are owned by the session and untouched.
    void reset_parameters(std::uint64_t seed) { initialize(seed); }

    const AgentConfig& config() const { return cfg_; }
    const GaussianPolicyHead& actor() const { return actor_; }
    GaussianPolicyHead& actor() { return actor_; }
    const CriticEnsembleNet& critics() const { return critics_; }
    CriticEnsembleNet& critics() { return critics_; }
    const TemperatureState& temperature() const { return temp_; }
    void set_log_alpha(double value) { temp_.log_alpha = value; }
    double alpha() const { return temp_.alpha(); }
    long critic_step_count() const { return critic_opt_.step_count; }
    int obs_dim() const { return obs_dim_; }
    int action_dim() const { return action_dim_; }

    // TD targets y = r + gamma * (Q^lb_target(s',a') - alpha log pi(a'|s')),
    // a' ~ pi; detached by construction (plain values). Terminal transitions
    // drop the bootstrap term.
    Vector compute_targets(const BatchMatrices& batch, double beta, Rng& rng) const {
        const PolicyBatch next = policy_sample_batch(actor_, batch.next_states, rng, SampleMode::kStochastic);
        const EnsembleForward tf = ensemble_forward(critics_, batch.next_states, next.actions, beta, true);
        const Vector v_lb = tf.lower_bound.transpose() - temp_.alpha() * next.log_probs.transpose();
        return batch.rewards + cfg_.gamma * batch.bootstrap_mask.cwiseProduct(v_lb);
    }

    // Joint squared-error step on all critic members; returns the loss and
    // the batch-mean ensemble std (logged as critic disagreement).
    std::pair<double, double> critic_update(const BatchMatrices& batch, const Vector& targets) {
        const int k = critics_.size();
        const Eigen::Index n = targets.size();
        EnsembleForward fwd = ensemble_forward(critics_, batch.states, batch.actions, 0.0, false, true);
        double loss = 0.0;
        const int p = critics_.spec.param_count();
        Vector grad(k * p);
        Vector params(k * p);
        for (int i = 0; i < k; ++i) {
            const Eigen::RowVectorXd err = fwd.member_values.row(i) - targets.transpose();
            loss += err.squaredNorm();
            const Matrix upstream = (2.0 / static_cast<double>(n * k)) * err;
            grad.segment(i * p, p) =
                mlp_backward(critics_.spec, critics_.online[static_cast<std::size_t>(i)], fwd.caches[static_cast<std::size_t>(i)], upstream);
            params.segment(i * p, p) = critics_.online[static_cast<std::size_t>(i)];
        }
        loss /= static_cast<double>(n * k);
        if (!std::isfinite(loss)) throw NumericError("critic_update: non-finite loss");
        adam_step(critic_opt_, params, grad);
        for (int i = 0; i < k; ++i) {
            critics_.online[static_cast<std::size_t>(i)] = params.segment(i * p, p);
            polyak_update(critics_.target[static_cast<std::size_t>(i)], critics_.online[static_cast<std::size_t>(i)], cfg_.tau);
        }
        return {loss, fwd.std.mean()};
    }

    struct ActorResult {
        double loss = 0.0;
        Eigen::RowVectorXd log_probs;  // fresh on-policy log-probs, reused by the temperature step
    };

    // One ascent step on E[Q^lb_online(s, a_theta) - alpha log pi(a_theta|s)].
    ActorResult actor_update(const Matrix& states, double beta, Rng& rng) {
        const Eigen::Index n = states.cols();
        PolicyBatch cur = policy_sample_batch(actor_, states, rng, SampleMode::kStochastic);
        EnsembleForward fwd = ensemble_forward(critics_, states, cur.actions, beta, false, true);
        const double alpha = temp_.alpha();
        const double loss = (alpha * cur.log_probs - fwd.lower_bound).mean();
        if (!std::isfinite(loss)) throw NumericError("actor_update: non-finite loss");

        // d(loss)/d(action) accumulated through every ensemble member
        const Matrix member_w = lower_bound_member_weights(fwd, beta);
        Matrix action_grad = Matrix::Zero(action_dim_, n);
        for (int i = 0; i < critics_.size(); ++i) {
            Matrix input_grad;
            const Matrix upstream = (-1.0 / static_cast<double>(n)) * member_w.row(i);
            mlp_backward(critics_.spec, critics_.online[static_cast<std::size_t>(i)], fwd.caches[static_cast<std::size_t>(i)], upstream,
                         &input_grad);
            action_grad += input_grad.bottomRows(action_dim_);
        }
        const Eigen::RowVectorXd logp_weight =
            Eigen::RowVectorXd::Constant(n, alpha / static_cast<double>(n));
        const Vector actor_grad = policy_backward(actor_, cur, logp_weight, action_grad);
        adam_step(actor_opt_, actor_.params, actor_grad);
        return ActorResult{loss, std::move(cur.log_probs)};
    }

    // Gradient step on log alpha of alpha * (-log pi - H*); alpha stays
    // positive by parameterization.
    double temperature_update(const Eigen::RowVectorXd& log_probs) {
        const double gap = (-log_probs.array() - temp_.target_entropy).mean();
        Vector grad(1);
        grad(0) = temp_.alpha() * gap;
        Vector param(1);
        param(0) = temp_.log_alpha;
        adam_step(alpha_opt_, param, grad);
        temp_.log_alpha = param(0);
        return temp_.alpha();
    }

    // Detached per-sample statistics for the pessimism adjusters; a' ~ pi,
    // online parameters throughout.
    PessimismBatch make_pessimism_batch(const BatchMatrices& batch, Rng& rng) const {
        const EnsembleForward cur = ensemble_forward(critics_, batch.states, batch.actions, 0.0, false);
        const PolicyBatch next = policy_sample_batch(actor_, batch.next_states, rng, SampleMode::kStochastic);
        const EnsembleForward nxt = ensemble_forward(critics_, batch.next_states, next.actions, 0.0, false);
        PessimismBatch p;
        p.q_value = cur.mean.transpose();
        p.reward = batch.rewards;
        p.q_mu_next = nxt.mean.transpose();
        p.q_sigma_next = nxt.std.transpose();
        p.alpha_logpi_next = temp_.alpha() * next.log_probs.transpose();
        p.gamma = cfg_.gamma;
        return p;
    }

    // Single-sample lower-bound value estimate V^lb(s) with online critics.
    double value_lower_bound(const Vector& state, double beta, Rng& rng) const {
        const PolicyBatch act = policy_sample_batch(actor_, state, rng, SampleMode::kStochastic);
        const EnsembleForward fwd = ensemble_forward(critics_, state, act.actions, beta, false);
        return fwd.lower_bound(0) - temp_.alpha() * act.log_probs(0);
    }

    double q_mean(const Vector& state, const Vector& action) const {
        const EnsembleForward fwd = ensemble_forward(critics_, state, action, 0.0, false);
        return fwd.mean(0);
    }

  private:
    void initialize(std::uint64_t seed) {
        Rng rng(seed);
        Rng actor_rng = rng.derive(1);
        Rng critic_rng = rng.derive(2);
        actor_ = GaussianPolicyHead::create(obs_dim_, action_dim_, cfg_.hidden, cfg_.activation, actor_rng);
        critics_ = CriticEnsembleNet::create(obs_dim_, action_dim_, cfg_.hidden, cfg_.activation,
                                             cfg_.ensemble_size, critic_rng);
        temp_.log_alpha = std::log(cfg_.initial_alpha);
        temp_.target_entropy = cfg_.target_entropy;
        actor_opt_ = AdamState::create(actor_.params.size(), cfg_.actor_lr);
        critic_opt_ = AdamState::create(static_cast<Eigen::Index>(cfg_.ensemble_size) * critics_.spec.param_count(),
                                        cfg_.critic_lr);
        alpha_opt_ = AdamState::create(1, cfg_.alpha_lr);
    }

    AgentConfig cfg_;
    int obs_dim_;
    int action_dim_;
    GaussianPolicyHead actor_;
    CriticEnsembleNet critics_;
    TemperatureState temp_;
    AdamState actor_opt_;
    AdamState critic_opt_;
    AdamState alpha_opt_;
};

struct StepReport {
    long env_step = 0;
    int updates_run = 0;
    double critic_loss = std::numeric_limits<double>::quiet_NaN();
    double actor_loss = std::numeric_limits<double>::quiet_NaN();
    double alpha = std::numeric_limits<double>::quiet_NaN();
    double beta = std::numeric_limits<double>::quiet_NaN();
    double critic_disagreement = std::numeric_limits<double>::quiet_NaN();
    bool adjuster_skipped = false;
    bool episode_finished = false;
    double episode_return = 0.0;
};

// One training run: environment interaction, exclusive buffer routing and the
// per-step update loop (critic -> actor -> temperature -> beta per iteration).
class TrainingSession {
  public:
    TrainingSession(std::unique_ptr<Environment> env, AgentConfig agent_cfg, AdjusterConfig adjuster_cfg,
                    double validation_ratio, std::size_t buffer_capacity, std::uint64_t seed)
        : env_(std::move(env)),
          agent_(env_->obs_dim(), env_->action_dim(), agent_cfg, Rng(seed).derive(0x01).next_u64()),
          adjuster_(adjuster_cfg),
          validation_ratio_(validation_ratio),
          train_buffer_(buffer_capacity),
          val_buffer_(buffer_capacity),
          env_rng_(Rng(seed).derive(0x02)),
          action_rng_(Rng(seed).derive(0x03)),
          route_rng_(Rng(seed).derive(0x04)),
          sample_rng_(Rng(seed).derive(0x05)),
          update_rng_(Rng(seed).derive(0x06)),
          adjuster_rng_(Rng(seed).derive(0x07)) {
        if (validation_ratio_ < 0.0 || validation_ratio_ >= 1.0)
            throw ParameterError("TrainingSession: validation_ratio must be in [0,1)");
        pessimism_.beta = adjuster_.initial_beta;
        pessimism_.pessimism_lr = adjuster_.pessimism_lr;
        pessimism_.min_beta = adjuster_.allow_negative_beta ? -std::numeric_limits<double>::infinity() : 0.0;
        bandit_.bandit_lr = adjuster_.bandit_lr;
        obs_ = env_->reset(env_rng_);
        if (adjuster_.kind == AdjusterKind::kTop) pessimism_.beta = top_select(bandit_, adjuster_rng_);
    }

    SacAgent& agent() { return agent_; }
    const SacAgent& agent() const { return agent_; }
    const Environment& env() const { return *env_; }
    double beta() const { return pessimism_.beta; }
    double validation_ratio() const { return validation_ratio_; }
    const ReplayBuffer& train_buffer() const { return train_buffer_; }
    const ReplayBuffer& validation_buffer() const { return val_buffer_; }
    long env_steps() const { return env_steps_; }

    void reset_parameters(std::uint64_t seed) {
        agent_.reset_parameters(seed);
        recent_window_.clear();
    }

    StepReport train_step() {
        StepReport report;
        report.env_step = env_steps_ + 1;

        // --- environment interaction
        Vector action;
        if (env_steps_ < agent_.config().initial_random_steps) {
            action = Vector(env_->action_dim());
            for (Eigen::Index d = 0; d < action.size(); ++d) action(d) = action_rng_.uniform(-1.0, 1.0);
        } else {
            action = policy_sample(agent_.actor(), obs_, action_rng_, SampleMode::kStochastic).first;
        }
        const EnvStep step = env_->step(action);
        ++env_steps_;
        episode_return_ += step.reward;

        Transition t{obs_, action, step.reward, step.obs, step.terminal, next_transition_id_++};

        // --- exclusive routing
        if (route_transition(validation_ratio_, route_rng_) == BufferDestination::kValidation) {
            val_buffer_.add(t);
        } else {
            train_buffer_.add(t);
        }
        recent_window_.push_back(t);
        while (static_cast<int>(recent_window_.size()) > adjuster_.opl_window) recent_window_.pop_front();

        obs_ = step.obs;
        if (step.episode_end || step.terminal) {
            report.episode_finished = true;
            report.episode_return = episode_return_;
            if (adjuster_.kind == AdjusterKind::kTop) {
                top_update(bandit_, episode_return_);
                pessimism_.beta = top_select(bandit_, adjuster_rng_);
            }
            episode_return_ = 0.0;
            recent_window_.clear();
            obs_ = env_->reset(env_rng_);
        }

        // --- update gate
        const int B = agent_.config().batch_size;
        const bool needs_validation =
            adjuster_.kind != AdjusterKind::kFixed && adjuster_.kind != AdjusterKind::kTop &&
            adjuster_.effective_source() == PessimismSource::kValidation && validation_ratio_ > 0.0;
        const std::size_t val_floor =
            std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(validation_ratio_ * B)));
        if (env_steps_ <= agent_.config().initial_random_steps ||
            train_buffer_.size() < static_cast<std::size_t>(B) ||
            (needs_validation && val_buffer_.size() < val_floor)) {
            report.beta = pessimism_.beta;
            report.alpha = agent_.alpha();
            return report;
        }

        for (int i = 0; i < agent_.config().replay_ratio; ++i) {
            const auto batch_ptrs = train_buffer_.sample(static_cast<std::size_t>(B), sample_rng_);
            const BatchMatrices batch = assemble_batch(batch_ptrs);
            const Vector y = agent_.compute_targets(batch, pessimism_.beta, update_rng_);
            auto [closs, sigma] = agent_.critic_update(batch, y);
            const auto actor_result = agent_.actor_update(batch.states, pessimism_.beta, update_rng_);
            agent_.temperature_update(actor_result.log_probs);
            report.adjuster_skipped = !update_pessimism(batch);
            report.critic_loss = closs;
            report.actor_loss = actor_result.loss;
            report.critic_disagreement = sigma;
            ++report.updates_run;
        }
        report.alpha = agent_.alpha();
        report.beta = pessimism_.beta;
        return report;
    }

    // batch-mean ensemble disagreement on a fresh training batch; NaN before
    // the buffer can serve one
    double probe_disagreement() {
        const int B = agent_.config().batch_size;
        if (train_buffer_.size() < static_cast<std::size_t>(B)) return std::numeric_limits<double>::quiet_NaN();
        const BatchMatrices batch = assemble_batch(train_buffer_.sample(static_cast<std::size_t>(B), sample_rng_));
        return ensemble_forward(agent_.critics(), batch.states, batch.actions, 0.0, false).std.mean();
    }

    std::optional<BatchMatrices> sample_batch(const ReplayBuffer& buffer, std::size_t n, Rng& rng) {
        if (buffer.size() == 0) return std::nullopt;
        return assemble_batch(buffer.sample(n, rng));
    }

  private:
    // Returns false when the adjuster had to skip (no data for its source).
    bool update_pessimism(const BatchMatrices& replay_batch) {
        switch (adjuster_.kind) {
            case AdjusterKind::kFixed:
            case AdjusterKind::kTop:
                return true;  // nothing to do per update iteration
            default:
                break;
        }
        const PessimismLoss loss = adjuster_.effective_loss();
        switch (adjuster_.effective_source()) {
            case PessimismSource::kReplay:
                pessimism_gradient_update(pessimism_, loss, agent_.make_pessimism_batch(replay_batch, adjuster_rng_));
                return true;
            case PessimismSource::kValidation: {
                if (val_buffer_.size() == 0) return false;
                const std::size_t n = std::max<std::size_t>(
                    1, static_cast<std::size_t>(
                           std::ceil(validation_ratio_ * agent_.config().batch_size)));
                const BatchMatrices vb = assemble_batch(val_buffer_.sample(n, adjuster_rng_));
                pessimism_gradient_update(pessimism_, loss, agent_.make_pessimism_batch(vb, adjuster_rng_));
                return true;
            }
            case PessimismSource::kOnline: {
                if (recent_window_.empty()) return false;
                if (loss == PessimismLoss::kDual) {
                    OplState opl;
                    opl.max_length = adjuster_.opl_window;
                    opl.lambda = adjuster_.opl_lambda;
                    for (const auto& t : recent_window_) {
                        OplEntry e;
                        e.reward = t.r;
                        e.q_value = agent_.q_mean(t.s, t.a);
                        e.v_lb_next = t.terminal ? 0.0 : agent_.value_lower_bound(t.s_next, pessimism_.beta, adjuster_rng_);
                        opl.push(e);
                    }
                    return opl_update(pessimism_, opl, agent_.config().gamma);
                }
                std::vector<const Transition*> ptrs;
                for (const auto& t : recent_window_) ptrs.push_back(&t);
                const BatchMatrices wb = assemble_batch(ptrs);
                pessimism_gradient_update(pessimism_, loss, agent_.make_pessimism_batch(wb, adjuster_rng_));
                return true;
            }
        }
        return true;
    }

    std::unique_ptr<Environment> env_;
    SacAgent agent_;
    AdjusterConfig adjuster_;
    double validation_ratio_;
    ReplayBuffer train_buffer_;
    ReplayBuffer val_buffer_;
    PessimismState pessimism_;
    TopBanditState bandit_;
    std::deque<Transition> recent_window_;

    Rng env_rng_;
    Rng action_rng_;
    Rng route_rng_;
    Rng sample_rng_;
    Rng update_rng_;
    Rng adjuster_rng_;

    Vector obs_;
    long env_steps_ = 0;
    double episode_return_ = 0.0;
    std::uint64_t next_transition_id_ = 0;
};

}  // namespace pessilab

#endif  // PESSILAB_AGENT_HPP_
