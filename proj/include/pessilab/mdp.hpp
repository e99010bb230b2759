#ifndef PESSILAB_MDP_HPP_
#define PESSILAB_MDP_HPP_

#include <Eigen/Dense>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <string>
#include <vector>

#include "pessilab/rng.hpp"

namespace pessilab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct ParameterError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Finite MDP as explicit tensors. transition[s] is an (n_actions x n_states)
// matrix of next-state probabilities; reward(s, a) is deterministic.
struct MdpSpec {
    int n_states = 0;
    int n_actions = 0;
    std::vector<Matrix> transition;  // per state: n_actions x n_states
    Matrix reward;                   // n_states x n_actions
    double gamma = 0.0;
    Vector p0;

    void validate() const {
        if (n_states < 1 || n_actions < 1) throw ParameterError("MdpSpec: sizes must be positive");
        if (!(gamma > 0.0 && gamma < 1.0)) throw ParameterError("MdpSpec: gamma must be in (0,1)");
        if (static_cast<int>(transition.size()) != n_states) throw ParameterError("MdpSpec: transition shape");
        if (reward.rows() != n_states || reward.cols() != n_actions) throw ParameterError("MdpSpec: reward shape");
        if (p0.size() != n_states) throw ParameterError("MdpSpec: p0 shape");
        if (std::abs(p0.sum() - 1.0) > 1e-12 || p0.minCoeff() < 0.0) throw ParameterError("MdpSpec: p0 not a distribution");
        for (const auto& rows : transition) {
            if (rows.rows() != n_actions || rows.cols() != n_states) throw ParameterError("MdpSpec: transition shape");
            for (int a = 0; a < n_actions; ++a) {
                if (std::abs(rows.row(a).sum() - 1.0) > 1e-12 || rows.row(a).minCoeff() < 0.0)
                    throw ParameterError("MdpSpec: transition row not a distribution");
            }
        }
    }
};

// Row-stochastic policy over a finite MDP.
struct TabularPolicy {
    Matrix probs;  // n_states x n_actions

    void validate() const {
        for (int s = 0; s < probs.rows(); ++s) {
            if (std::abs(probs.row(s).sum() - 1.0) > 1e-12 || probs.row(s).minCoeff() < 0.0)
                throw ParameterError("TabularPolicy: row not a distribution");
        }
    }

    static TabularPolicy uniform(int n_states, int n_actions) {
        TabularPolicy pi;
        pi.probs = Matrix::Constant(n_states, n_actions, 1.0 / n_actions);
        return pi;
    }

    // entropy with the 0*log 0 := 0 convention
    double entropy(int s) const {
        double h = 0.0;
        for (int a = 0; a < probs.cols(); ++a) {
            const double p = probs(s, a);
            if (p > 0.0) h -= p * std::log(p);
        }
        return h;
    }
};

struct TabularTransition {
    int s = 0;
    int a = 0;
    double r = 0.0;
    int s_next = 0;
    bool terminal = false;
};

inline MdpSpec make_random_mdp(int n_states, int n_actions, double gamma, std::uint64_t seed) {
    if (n_states < 1 || n_actions < 1) throw ParameterError("make_random_mdp: sizes must be positive");
    if (!(gamma > 0.0 && gamma < 1.0)) throw ParameterError("make_random_mdp: gamma must be in (0,1)");
    Rng rng(seed);
    MdpSpec mdp;
    mdp.n_states = n_states;
    mdp.n_actions = n_actions;
    mdp.gamma = gamma;
    mdp.reward = Matrix(n_states, n_actions);
    mdp.transition.resize(n_states, Matrix(n_actions, n_states));
    for (int s = 0; s < n_states; ++s) {
        for (int a = 0; a < n_actions; ++a) {
            const auto row = rng.dirichlet_uniform(static_cast<std::size_t>(n_states));
            for (int s2 = 0; s2 < n_states; ++s2) mdp.transition[s](a, s2) = row[static_cast<std::size_t>(s2)];
            mdp.reward(s, a) = rng.uniform();
        }
    }
    const auto p0 = rng.dirichlet_uniform(static_cast<std::size_t>(n_states));
    mdp.p0 = Eigen::Map<const Vector>(p0.data(), n_states);
    mdp.validate();
    return mdp;
}

// Soft state value V(s) = E_pi[Q(s,a) - alpha log pi(a|s)] for a given Q table.
inline Vector soft_state_value(const MdpSpec& mdp, const TabularPolicy& pi, const Matrix& q, double alpha) {
    Vector v(mdp.n_states);
    for (int s = 0; s < mdp.n_states; ++s) {
        double acc = 0.0;
        for (int a = 0; a < mdp.n_actions; ++a) {
            const double p = pi.probs(s, a);
            if (p > 0.0) acc += p * (q(s, a) - alpha * std::log(p));
        }
        v(s) = acc;
    }
    return v;
}

// Unique fixed point of Q = r + gamma * P * (Pi Q + alpha * H), solved directly.
// The entropy term is constant in Q, so the system is affine with matrix
// (I - gamma * P * Pi), nonsingular for gamma < 1.
inline Matrix exact_soft_q(const MdpSpec& mdp, const TabularPolicy& pi, double alpha) {
    if (alpha < 0.0) throw ParameterError("exact_soft_q: alpha must be nonnegative");
    const int n = mdp.n_states;
    const int m = mdp.n_actions;
    const int dim = n * m;
    const auto idx = [m](int s, int a) { return s * m + a; };

    Matrix system = Matrix::Identity(dim, dim);
    Vector rhs(dim);
    Vector entropy(n);
    for (int s = 0; s < n; ++s) entropy(s) = pi.entropy(s);

    for (int s = 0; s < n; ++s) {
        for (int a = 0; a < m; ++a) {
            const int row = idx(s, a);
            rhs(row) = mdp.reward(s, a);
            for (int s2 = 0; s2 < n; ++s2) {
                const double p = mdp.transition[s](a, s2);
                if (p == 0.0) continue;
                rhs(row) += mdp.gamma * p * alpha * entropy(s2);
                for (int a2 = 0; a2 < m; ++a2) {
                    system(row, idx(s2, a2)) -= mdp.gamma * p * pi.probs(s2, a2);
                }
            }
        }
    }

    const Vector flat = system.partialPivLu().solve(rhs);
    Matrix q(n, m);
    for (int s = 0; s < n; ++s)
        for (int a = 0; a < m; ++a) q(s, a) = flat(idx(s, a));

    // Bellman residual guard
    const Vector v = soft_state_value(mdp, pi, q, alpha);
    double residual = 0.0;
    for (int s = 0; s < n; ++s) {
        for (int a = 0; a < m; ++a) {
            double target = mdp.reward(s, a);
            for (int s2 = 0; s2 < n; ++s2) target += mdp.gamma * mdp.transition[s](a, s2) * v(s2);
            residual = std::max(residual, std::abs(q(s, a) - target));
        }
    }
    if (residual > 1e-10) throw NumericError("exact_soft_q: Bellman residual " + std::to_string(residual));
    return q;
}

inline TabularTransition sample_transition(const MdpSpec& mdp, int s, int a, Rng& rng) {
    if (s < 0 || s >= mdp.n_states || a < 0 || a >= mdp.n_actions)
        throw ParameterError("sample_transition: index out of range");
    const double u = rng.uniform();
    double cumulative = 0.0;
    int s_next = mdp.n_states - 1;
    for (int s2 = 0; s2 < mdp.n_states; ++s2) {
        cumulative += mdp.transition[s](a, s2);
        if (u < cumulative) {
            s_next = s2;
            break;
        }
    }
    return TabularTransition{s, a, mdp.reward(s, a), s_next, false};
}

inline nlohmann::json mdp_to_json(const MdpSpec& mdp) {
    nlohmann::json j;
    j["n_states"] = mdp.n_states;
    j["n_actions"] = mdp.n_actions;
    j["gamma"] = mdp.gamma;
    j["p0"] = std::vector<double>(mdp.p0.data(), mdp.p0.data() + mdp.p0.size());
    auto reward = nlohmann::json::array();
    for (int s = 0; s < mdp.n_states; ++s) {
        auto row = nlohmann::json::array();
        for (int a = 0; a < mdp.n_actions; ++a) row.push_back(mdp.reward(s, a));
        reward.push_back(row);
    }
    j["reward"] = reward;
    auto transition = nlohmann::json::array();
    for (int s = 0; s < mdp.n_states; ++s) {
        auto per_action = nlohmann::json::array();
        for (int a = 0; a < mdp.n_actions; ++a) {
            auto row = nlohmann::json::array();
            for (int s2 = 0; s2 < mdp.n_states; ++s2) row.push_back(mdp.transition[s](a, s2));
            per_action.push_back(row);
        }
        transition.push_back(per_action);
    }
    j["transition"] = transition;
    return j;
}

inline MdpSpec mdp_from_json(const nlohmann::json& j) {
    MdpSpec mdp;
    mdp.n_states = j.at("n_states").get<int>();
    mdp.n_actions = j.at("n_actions").get<int>();
    mdp.gamma = j.at("gamma").get<double>();
    const auto p0 = j.at("p0").get<std::vector<double>>();
    mdp.p0 = Eigen::Map<const Vector>(p0.data(), static_cast<Eigen::Index>(p0.size()));
    mdp.reward = Matrix(mdp.n_states, mdp.n_actions);
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a) mdp.reward(s, a) = j.at("reward").at(s).at(a).get<double>();
    mdp.transition.resize(mdp.n_states, Matrix(mdp.n_actions, mdp.n_states));
    for (int s = 0; s < mdp.n_states; ++s)
        for (int a = 0; a < mdp.n_actions; ++a)
            for (int s2 = 0; s2 < mdp.n_states; ++s2)
                mdp.transition[s](a, s2) = j.at("transition").at(s).at(a).at(s2).get<double>();
    mdp.validate();
    return mdp;
}

}  // namespace pessilab

#endif  // PESSILAB_MDP_HPP_
