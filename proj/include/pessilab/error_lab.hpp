#ifndef PESSILAB_ERROR_LAB_HPP_
#define PESSILAB_ERROR_LAB_HPP_

#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "pessilab/mdp.hpp"
#include "pessilab/rng.hpp"

namespace pessilab {

struct ConvergenceError : std::runtime_error {
    double final_residual;
    ConvergenceError(const std::string& msg, double residual)
        : std::runtime_error(msg), final_residual(residual) {}
};

// k tabular critics sharing one (n_states x n_actions) shape.
struct EnsembleTable {
    std::vector<Matrix> members;

    int size() const { return static_cast<int>(members.size()); }

    static EnsembleTable replicate(const Matrix& q, int k) {
        EnsembleTable e;
        e.members.assign(static_cast<std::size_t>(k), q);
        return e;
    }

    static EnsembleTable random(int n_states, int n_actions, int k, Rng& rng, double lo = -10.0, double hi = 10.0) {
        EnsembleTable e;
        for (int i = 0; i < k; ++i) {
            Matrix q(n_states, n_actions);
            for (int s = 0; s < n_states; ++s)
                for (int a = 0; a < n_actions; ++a) q(s, a) = rng.uniform(lo, hi);
            e.members.push_back(std::move(q));
        }
        return e;
    }
};

struct EnsembleStats {
    Matrix mean;
    Matrix std;          // population standard deviation (divide by k)
    Matrix lower_bound;  // mean - beta * std
    double beta = 0.0;
};

inline EnsembleStats ensemble_stats(const EnsembleTable& ensemble, double beta) {
    if (ensemble.members.empty()) throw ParameterError("ensemble_stats: empty ensemble");
    if (beta < 0.0) throw ParameterError("ensemble_stats: beta must be nonnegative");
    const int k = ensemble.size();
    EnsembleStats stats;
    stats.beta = beta;
    stats.mean = ensemble.members[0];
    for (int i = 1; i < k; ++i) stats.mean += ensemble.members[static_cast<std::size_t>(i)];
    stats.mean /= static_cast<double>(k);
    Matrix variance = Matrix::Zero(stats.mean.rows(), stats.mean.cols());
    for (const auto& q : ensemble.members) {
        const Matrix dev = q - stats.mean;
        variance += dev.cwiseProduct(dev);
    }
    variance /= static_cast<double>(k);
    stats.std = variance.cwiseSqrt();
    stats.lower_bound = stats.mean - beta * stats.std;
    return stats;
}

// f(s,a) estimates the approximation error; plain matrix with shape checks.
struct ErrorField {
    Matrix values;

    double inf_norm() const { return values.cwiseAbs().maxCoeff(); }

    static ErrorField zeros(int n_states, int n_actions) { return ErrorField{Matrix::Zero(n_states, n_actions)}; }

    static ErrorField random(int n_states, int n_actions, Rng& rng, double lo = -10.0, double hi = 10.0) {
        Matrix f(n_states, n_actions);
        for (int s = 0; s < n_states; ++s)
            for (int a = 0; a < n_actions; ++a) f(s, a) = rng.uniform(lo, hi);
        return ErrorField{std::move(f)};
    }
};

struct TemporalErrorTable {
    Matrix u_mean;
    Matrix u_lb;
};

// Expectation over next states of a state-value vector: (P v)(s,a).
inline Matrix next_state_expectation(const MdpSpec& mdp, const Vector& v) {
    Matrix out(mdp.n_states, mdp.n_actions);
    for (int s = 0; s < mdp.n_states; ++s) out.row(s) = (mdp.transition[s] * v).transpose();
    return out;
}

// One-step temporal critic errors in exact expectation form:
//   u_mean = r + gamma * E_s' V_mean(s') - Q_mean
//   u_lb   = r + gamma * E_s' V_lb(s')   - Q_mean
inline TemporalErrorTable temporal_errors(const MdpSpec& mdp, const TabularPolicy& pi, const EnsembleTable& ensemble,
                                          double beta, double alpha) {
    const EnsembleStats stats = ensemble_stats(ensemble, beta);
    const Vector v_mean = soft_state_value(mdp, pi, stats.mean, alpha);
    const Vector v_lb = soft_state_value(mdp, pi, stats.lower_bound, alpha);
    TemporalErrorTable t;
    t.u_mean = mdp.reward + mdp.gamma * next_state_expectation(mdp, v_mean) - stats.mean;
    t.u_lb = mdp.reward + mdp.gamma * next_state_expectation(mdp, v_lb) - stats.mean;
    return t;
}

enum class ErrorVariant { kMean, kLowerBound };

// Expectation of an error field at the next step: E_{s'~P, a'~pi} f(s',a').
inline Matrix propagate_field(const MdpSpec& mdp, const TabularPolicy& pi, const Matrix& f) {
    const Vector per_state = (f.cwiseProduct(pi.probs)).rowwise().sum();
    return next_state_expectation(mdp, per_state);
}

inline ErrorField apply_error_operator(const ErrorField& field, const TemporalErrorTable& temporal,
                                       const EnsembleStats& stats, const MdpSpec& mdp, const TabularPolicy& pi,
                                       ErrorVariant variant, double beta) {
    if (field.values.rows() != mdp.n_states || field.values.cols() != mdp.n_actions)
        throw ParameterError("apply_error_operator: field shape mismatch");
    if (variant == ErrorVariant::kLowerBound && beta < 0.0)
        throw ParameterError("apply_error_operator: beta must be nonnegative");
    Matrix next = mdp.gamma * propagate_field(mdp, pi, field.values);
    if (variant == ErrorVariant::kMean) return ErrorField{temporal.u_mean + next};
    return ErrorField{temporal.u_lb + beta * stats.std + next};
}

struct FixedPointResult {
    ErrorField field;
    int iterations = 0;
    double final_residual = 0.0;
};

inline FixedPointResult fixed_point_iterate(const ErrorField& start, const TemporalErrorTable& temporal,
                                            const EnsembleStats& stats, const MdpSpec& mdp, const TabularPolicy& pi,
                                            ErrorVariant variant, double beta, double tol = 1e-10,
                                            int max_iters = 100000) {
    if (tol <= 0.0) throw ParameterError("fixed_point_iterate: tol must be positive");
    if (max_iters < 1) throw ParameterError("fixed_point_iterate: max_iters must be positive");
    ErrorField current = start;
    double residual = 0.0;
    for (int it = 1; it <= max_iters; ++it) {
        ErrorField next = apply_error_operator(current, temporal, stats, mdp, pi, variant, beta);
        residual = (next.values - current.values).cwiseAbs().maxCoeff();
        current = std::move(next);
        if (residual <= tol) return FixedPointResult{std::move(current), it, residual};
    }
    throw ConvergenceError("fixed_point_iterate: no convergence after " + std::to_string(max_iters) + " iterations",
                           residual);
}

struct ContractionReport {
    int n_trials = 0;
    double max_ratio = 0.0;          // sup ||U f1 - U f2|| / ||f1 - f2||
    bool contraction_holds = true;
    // monotonicity tested on ordered pairs (f1 <= f2 pointwise), reported
    // separately from the contraction pass/fail
    bool monotone_holds = true;
    double max_monotonicity_violation = 0.0;
    std::vector<std::string> violations;
};

inline ContractionReport contraction_certificate(const TemporalErrorTable& temporal, const EnsembleStats& stats,
                                                 const MdpSpec& mdp, const TabularPolicy& pi, ErrorVariant variant,
                                                 double beta, int n_trials, Rng& rng) {
    if (n_trials < 1) throw ParameterError("contraction_certificate: n_trials must be positive");
    ContractionReport report;
    report.n_trials = n_trials;
    for (int trial = 0; trial < n_trials; ++trial) {
        const ErrorField f1 = ErrorField::random(mdp.n_states, mdp.n_actions, rng);
        const ErrorField f2 = ErrorField::random(mdp.n_states, mdp.n_actions, rng);
        const ErrorField g1 = apply_error_operator(f1, temporal, stats, mdp, pi, variant, beta);
        const ErrorField g2 = apply_error_operator(f2, temporal, stats, mdp, pi, variant, beta);
        const double gap = (f1.values - f2.values).cwiseAbs().maxCoeff();
        const double image_gap = (g1.values - g2.values).cwiseAbs().maxCoeff();
        if (gap > 0.0) report.max_ratio = std::max(report.max_ratio, image_gap / gap);
        if (image_gap > mdp.gamma * gap + 1e-9) {
            report.contraction_holds = false;
            report.violations.push_back("trial " + std::to_string(trial) + ": image gap " + std::to_string(image_gap) +
                                        " vs bound " + std::to_string(mdp.gamma * gap));
        }

        // ordered pair: lo <= hi pointwise
        const Matrix lo = f1.values.cwiseMin(f2.values);
        const Matrix hi = f1.values.cwiseMax(f2.values);
        const ErrorField ulo = apply_error_operator(ErrorField{lo}, temporal, stats, mdp, pi, variant, beta);
        const ErrorField uhi = apply_error_operator(ErrorField{hi}, temporal, stats, mdp, pi, variant, beta);
        const double violation = (ulo.values - uhi.values).maxCoeff();
        report.max_monotonicity_violation = std::max(report.max_monotonicity_violation, violation);
        if (violation > 1e-9) report.monotone_holds = false;
    }
    return report;
}

struct ZeroErrorWitness {
    int s = 0;
    int a = 0;
    double magnitude = 0.0;
    std::string condition;
};

struct ZeroErrorReport {
    bool holds = false;
    std::vector<ZeroErrorWitness> witnesses;
    bool underestimation_ok = true;  // U_mean > 0 and beta > 0  =>  |U_mean| <= |U_lb|
};

// Checks the two zero-error conditions (Q_mean is a soft Bellman fixed point
// and beta * Q_sigma vanishes) plus the underestimation implication against
// the exact soft Q solve.
inline ZeroErrorReport zero_error_check(const MdpSpec& mdp, const TabularPolicy& pi, const EnsembleTable& ensemble,
                                        double beta, double alpha) {
    const EnsembleStats stats = ensemble_stats(ensemble, beta);
    const Vector v_mean = soft_state_value(mdp, pi, stats.mean, alpha);
    const Matrix bellman_gap = mdp.reward + mdp.gamma * next_state_expectation(mdp, v_mean) - stats.mean;
    const Matrix pessimism_gap = beta * stats.std;

    ZeroErrorReport report;
    report.holds = true;
    for (int s = 0; s < mdp.n_states && report.witnesses.size() < 10; ++s) {
        for (int a = 0; a < mdp.n_actions && report.witnesses.size() < 10; ++a) {
            if (std::abs(bellman_gap(s, a)) > 1e-9)
                report.witnesses.push_back({s, a, std::abs(bellman_gap(s, a)), "bellman"});
            else if (pessimism_gap(s, a) > 1e-9)
                report.witnesses.push_back({s, a, pessimism_gap(s, a), "pessimism"});
        }
    }
    if (bellman_gap.cwiseAbs().maxCoeff() > 1e-9 || pessimism_gap.maxCoeff() > 1e-9) report.holds = false;

    const Matrix q_exact = exact_soft_q(mdp, pi, alpha);
    const Matrix u_mean = q_exact - stats.mean;
    const Matrix u_lb = q_exact - stats.lower_bound;
    for (int s = 0; s < mdp.n_states; ++s) {
        for (int a = 0; a < mdp.n_actions; ++a) {
            if (u_mean(s, a) > 0.0 && beta > 0.0 && std::abs(u_mean(s, a)) > std::abs(u_lb(s, a)))
                report.underestimation_ok = false;
        }
    }
    return report;
}

// Full certificate suite over one MDP: the beta*sigma gap identity, fixed-point vs direct
// difference, contraction/monotonicity, and the zero-error cases. Powers the
// `verify` CLI subcommand.
inline nlohmann::json verify_report(const MdpSpec& mdp, int trials, std::uint64_t seed) {
    Rng rng(seed);
    const TabularPolicy pi = TabularPolicy::uniform(mdp.n_states, mdp.n_actions);
    const double alpha = 0.1;
    const double beta = rng.uniform(0.0, 2.0);
    const int k = 2 + static_cast<int>(rng.uniform_int(3));
    const EnsembleTable ensemble = EnsembleTable::random(mdp.n_states, mdp.n_actions, k, rng);
    const EnsembleStats stats = ensemble_stats(ensemble, beta);
    const TemporalErrorTable temporal = temporal_errors(mdp, pi, ensemble, beta, alpha);
    const ErrorField zero = ErrorField::zeros(mdp.n_states, mdp.n_actions);

    const auto fp_mean = fixed_point_iterate(zero, temporal, stats, mdp, pi, ErrorVariant::kMean, beta);
    const auto fp_lb = fixed_point_iterate(zero, temporal, stats, mdp, pi, ErrorVariant::kLowerBound, beta);

    const double identity_max_gap =
        (fp_lb.field.values - fp_mean.field.values - beta * stats.std).cwiseAbs().maxCoeff();

    const Matrix q_exact = exact_soft_q(mdp, pi, alpha);
    const double fixedpoint_max_gap =
        std::max((fp_mean.field.values - (q_exact - stats.mean)).cwiseAbs().maxCoeff(),
                 (fp_lb.field.values - (q_exact - stats.lower_bound)).cwiseAbs().maxCoeff());

    const auto cert_mean = contraction_certificate(temporal, stats, mdp, pi, ErrorVariant::kMean, beta, trials, rng);
    const auto cert_lb = contraction_certificate(temporal, stats, mdp, pi, ErrorVariant::kLowerBound, beta, trials, rng);

    nlohmann::json zero_cases = nlohmann::json::array();
    {
        // exact critic, beta = 0: both conditions hold
        const EnsembleTable exact = EnsembleTable::replicate(q_exact, 2);
        const auto r0 = zero_error_check(mdp, pi, exact, 0.0, alpha);
        zero_cases.push_back({{"case", "exact_critic_beta0"}, {"holds", r0.holds},
                              {"underestimation_ok", r0.underestimation_ok}});
        // identical members, beta > 0: sigma = 0 branch
        const auto r1 = zero_error_check(mdp, pi, exact, 1.0, alpha);
        zero_cases.push_back({{"case", "exact_critic_sigma0"}, {"holds", r1.holds},
                              {"underestimation_ok", r1.underestimation_ok}});
        // underestimating critic with disagreement: conditions fail, inequality holds
        EnsembleTable shifted;
        shifted.members = {(q_exact.array() - 1.5).matrix(), (q_exact.array() - 0.5).matrix()};
        const auto r2 = zero_error_check(mdp, pi, shifted, 1.0, alpha);
        zero_cases.push_back({{"case", "shifted_critic"}, {"holds", r2.holds},
                              {"underestimation_ok", r2.underestimation_ok},
                              {"witnesses", r2.witnesses.size()}});
    }

    return nlohmann::json{{"n_states", mdp.n_states},
                          {"n_actions", mdp.n_actions},
                          {"gamma", mdp.gamma},
                          {"beta", beta},
                          {"ensemble_size", k},
                          {"trials", trials},
                          {"identity_max_gap", identity_max_gap},
                          {"fixedpoint_max_gap", fixedpoint_max_gap},
                          {"contraction_max_ratio", std::max(cert_mean.max_ratio, cert_lb.max_ratio)},
                          {"contraction_holds", cert_mean.contraction_holds && cert_lb.contraction_holds},
                          {"monotone_holds", cert_mean.monotone_holds && cert_lb.monotone_holds},
                          {"zero_error_cases", zero_cases}};
}

}  // namespace pessilab

#endif  // PESSILAB_ERROR_LAB_HPP_
