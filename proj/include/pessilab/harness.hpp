#ifndef PESSILAB_HARNESS_HPP_
#define PESSILAB_HARNESS_HPP_

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <nlohmann/json.hpp>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "pessilab/agent.hpp"
#include "pessilab/checkpoint.hpp"
#include "pessilab/env.hpp"

namespace pessilab {

// ---------------------------------------------------------------------------
// Configuration

struct ExperimentConfig {
    std::string env = "pendulum";
    int episode_length = 200;
    AgentConfig agent;
    AdjusterConfig adjuster;
    long total_steps = 50000;
    long eval_every = 1000;
    int eval_episodes = 5;
    // NaN resolves to 1/32 when the adjuster reads the validation buffer,
    // else 0.
    double validation_ratio = std::numeric_limits<double>::quiet_NaN();
    long reset_every = 0;
    std::uint64_t seed = 0;
    std::string out = ".";
    int approx_starts = 5;
    bool overfit_signed = false;

    void resolve() {
        if (std::isnan(validation_ratio)) {
            const bool uses_validation = adjuster.kind != AdjusterKind::kFixed &&
                                         adjuster.kind != AdjusterKind::kTop &&
                                         adjuster.effective_source() == PessimismSource::kValidation;
            validation_ratio = uses_validation ? 1.0 / 32.0 : 0.0;
        }
    }

    void validate() const {
        agent.validate();
        if (total_steps < 0) throw ParameterError("ExperimentConfig: total_steps must be nonnegative");
        if (eval_every < 1) throw ParameterError("ExperimentConfig: eval_every must be positive");
        if (total_steps % eval_every != 0)
            throw ParameterError("ExperimentConfig: eval_every must divide total_steps");
        if (eval_episodes < 1) throw ParameterError("ExperimentConfig: eval_episodes must be positive");
        if (!(validation_ratio >= 0.0 && validation_ratio < 1.0))
            throw ParameterError("ExperimentConfig: validation_ratio must be in [0,1)");
        if (reset_every < 0) throw ParameterError("ExperimentConfig: reset_every must be nonnegative");
        if (episode_length < 1) throw ParameterError("ExperimentConfig: episode_length must be positive");
        if (approx_starts < 1) throw ParameterError("ExperimentConfig: approx_starts must be positive");
    }

    std::size_t buffer_capacity() const {
        if (agent.buffer_capacity > 0) return agent.buffer_capacity;
        return static_cast<std::size_t>(std::max<long>(1, total_steps));
    }
};

inline PessimismLoss pessimism_loss_from_string(const std::string& name) {
    if (name == "dual") return PessimismLoss::kDual;
    if (name == "vpl") return PessimismLoss::kVpl;
    throw ParameterError("unknown pessimism loss: " + name);
}

inline PessimismSource pessimism_source_from_string(const std::string& name) {
    if (name == "replay") return PessimismSource::kReplay;
    if (name == "validation") return PessimismSource::kValidation;
    if (name == "online") return PessimismSource::kOnline;
    throw ParameterError("unknown pessimism source: " + name);
}

// Single flat JSON document; unknown keys are errors so typos never pass
// silently.
inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
    static const std::set<std::string> known = {
        "env",          "episode_length",  "total_steps",      "eval_every",
        "eval_episodes", "validation_ratio", "reset_every",     "seed",
        "out",          "approx_starts",   "overfit_signed",
        // adjuster
        "adjuster",     "loss",            "source",           "pessimism_lr",
        "initial_beta", "allow_negative_beta", "opl_window",   "opl_lambda",
        "bandit_lr",
        // agent
        "gamma",        "batch_size",      "replay_ratio",     "tau",
        "actor_lr",     "critic_lr",       "alpha_lr",         "initial_alpha",
        "target_entropy", "ensemble_size", "initial_random_steps", "hidden",
        "activation",   "buffer_capacity"};
    if (!j.is_object()) throw ParameterError("config: expected a JSON object");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (!known.count(key)) throw ParameterError("config: unknown key '" + key + "'");
    }
    ExperimentConfig cfg;
    cfg.agent = agent_config_from_json(j);
    if (j.contains("env")) cfg.env = j.at("env").get<std::string>();
    if (j.contains("episode_length")) cfg.episode_length = j.at("episode_length").get<int>();
    if (j.contains("total_steps")) cfg.total_steps = j.at("total_steps").get<long>();
    if (j.contains("eval_every")) cfg.eval_every = j.at("eval_every").get<long>();
    if (j.contains("eval_episodes")) cfg.eval_episodes = j.at("eval_episodes").get<int>();
    if (j.contains("validation_ratio")) cfg.validation_ratio = j.at("validation_ratio").get<double>();
    if (j.contains("reset_every")) cfg.reset_every = j.at("reset_every").get<long>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("out")) cfg.out = j.at("out").get<std::string>();
    if (j.contains("approx_starts")) cfg.approx_starts = j.at("approx_starts").get<int>();
    if (j.contains("overfit_signed")) cfg.overfit_signed = j.at("overfit_signed").get<bool>();
    if (j.contains("adjuster")) cfg.adjuster.kind = adjuster_kind_from_string(j.at("adjuster").get<std::string>());
    if (j.contains("loss")) cfg.adjuster.loss = pessimism_loss_from_string(j.at("loss").get<std::string>());
    if (j.contains("source")) cfg.adjuster.source = pessimism_source_from_string(j.at("source").get<std::string>());
    if (j.contains("pessimism_lr")) cfg.adjuster.pessimism_lr = j.at("pessimism_lr").get<double>();
    if (j.contains("initial_beta")) cfg.adjuster.initial_beta = j.at("initial_beta").get<double>();
    if (j.contains("allow_negative_beta")) cfg.adjuster.allow_negative_beta = j.at("allow_negative_beta").get<bool>();
    if (j.contains("opl_window")) cfg.adjuster.opl_window = j.at("opl_window").get<int>();
    if (j.contains("opl_lambda")) cfg.adjuster.opl_lambda = j.at("opl_lambda").get<double>();
    if (j.contains("bandit_lr")) cfg.adjuster.bandit_lr = j.at("bandit_lr").get<double>();
    cfg.resolve();
    return cfg;
}

// env ids: "pendulum", "mdp:<path.json>", "random-mdp:<states>,<actions>,<seed>"
// (random MDPs take gamma from the agent config).
inline std::unique_ptr<Environment> make_environment(const ExperimentConfig& cfg) {
    if (cfg.env == "pendulum") {
        PendulumSpec spec;
        spec.episode_length = cfg.episode_length;
        return std::make_unique<PendulumEnv>(spec);
    }
    if (cfg.env.rfind("mdp:", 0) == 0) {
        const std::string path = cfg.env.substr(4);
        std::ifstream in(path);
        if (!in) throw ParameterError("config: cannot open MDP file " + path);
        return std::make_unique<TabularEnv>(mdp_from_json(nlohmann::json::parse(in)), cfg.episode_length);
    }
    if (cfg.env.rfind("random-mdp:", 0) == 0) {
        const std::string args = cfg.env.substr(11);
        int n = 0, m = 0;
        unsigned long long seed = 0;
        if (std::sscanf(args.c_str(), "%d,%d,%llu", &n, &m, &seed) != 3)
            throw ParameterError("config: random-mdp wants '<states>,<actions>,<seed>'");
        return std::make_unique<TabularEnv>(make_random_mdp(n, m, cfg.agent.gamma, seed), cfg.episode_length);
    }
    throw ParameterError("config: unknown env '" + cfg.env + "'");
}

// ---------------------------------------------------------------------------
// Metrics CSV

inline constexpr const char* kMetricsHeader =
    "step,eval_return,beta,alpha,critic_disagreement,approx_error,overfit_ratio,critic_loss,wall_ms";

struct MetricsRow {
    long step = 0;
    double eval_return = std::numeric_limits<double>::quiet_NaN();
    double beta = std::numeric_limits<double>::quiet_NaN();
    double alpha = std::numeric_limits<double>::quiet_NaN();
    double critic_disagreement = std::numeric_limits<double>::quiet_NaN();
    double approx_error = std::numeric_limits<double>::quiet_NaN();
    double overfit_ratio = std::numeric_limits<double>::quiet_NaN();
    double critic_loss = std::numeric_limits<double>::quiet_NaN();
    double wall_ms = std::numeric_limits<double>::quiet_NaN();
};

inline std::string format_metric(double x) {
    if (std::isnan(x)) return "NaN";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", x);
    return buf;
}

inline std::string format_row(const MetricsRow& row) {
    std::string line = std::to_string(row.step);
    for (double x : {row.eval_return, row.beta, row.alpha, row.critic_disagreement, row.approx_error,
                     row.overfit_ratio, row.critic_loss, row.wall_ms}) {
        line += ',';
        line += format_metric(x);
    }
    return line;
}

inline void write_metrics(const std::vector<MetricsRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_metrics: cannot open " + path);
    out << kMetricsHeader << '\n';
    for (const auto& row : rows) out << format_row(row) << '\n';
    if (!out) throw std::runtime_error("write_metrics: write failed for " + path);
}

// ---------------------------------------------------------------------------
// Evaluation and the diagnostic metrics

// Mean undiscounted return over greedy episodes. When a collector is given,
// every evaluation transition is added to it; with v=0 this stream stands in
// for validation data in the overfitting diagnostic.
inline double evaluate(const SacAgent& agent, const Environment& env_proto, int episodes, Rng& rng,
                       ReplayBuffer* collector = nullptr) {
    if (episodes < 1) throw ParameterError("evaluate: episodes must be positive");
    double total = 0.0;
    for (int e = 0; e < episodes; ++e) {
        auto env = env_proto.clone();
        Vector obs = env->reset(rng);
        while (true) {
            const Vector action = policy_sample(agent.actor(), obs, rng, SampleMode::kGreedy).first;
            const EnvStep step = env->step(action);
            total += step.reward;
            if (collector) collector->add(Transition{obs, action, step.reward, step.obs, step.terminal, 0});
            obs = step.obs;
            if (step.terminal || step.episode_end) break;
        }
    }
    return total / episodes;
}

// Geometric-series approximation error, averaged over fresh starting states:
//   Qhat = (Rbar - alpha * mean log pi) / (1 - gamma)
// from a stochastic-policy rollout, compared against the critic mean at the
// first (state, action). Positive values mean the critic overestimates.
inline double approx_error_metric(const SacAgent& agent, const Environment& env_proto, int n_starts,
                                  int rollout_len, Rng& rng) {
    if (n_starts < 1 || rollout_len < 1) throw ParameterError("approx_error_metric: sizes must be positive");
    const double gamma = agent.config().gamma;
    const double alpha = agent.alpha();
    double total = 0.0;
    for (int i = 0; i < n_starts; ++i) {
        auto env = env_proto.clone();
        Vector obs = env->reset(rng);
        double reward_sum = 0.0;
        double logp_sum = 0.0;
        double q_mu = 0.0;
        for (int t = 0; t < rollout_len; ++t) {
            const auto [action, logp] = policy_sample(agent.actor(), obs, rng, SampleMode::kStochastic);
            if (t == 0) q_mu = agent.q_mean(obs, action);
            const EnvStep step = env->step(action);
            reward_sum += step.reward;
            logp_sum += logp;
            obs = step.obs;
        }
        const double q_hat = (reward_sum / rollout_len - alpha * logp_sum / rollout_len) / (1.0 - gamma);
        total += -(q_hat - q_mu);
    }
    return total / n_starts;
}

// Per-sample pessimistic temporal error u^lb with online critics and a single
// a' ~ pi per next state.
inline Vector pessimistic_td_errors(const SacAgent& agent, double beta, const BatchMatrices& batch, Rng rng) {
    const EnsembleForward cur =
        ensemble_forward(agent.critics(), batch.states, batch.actions, 0.0, false);
    const PolicyBatch next = policy_sample_batch(agent.actor(), batch.next_states, rng, SampleMode::kStochastic);
    const EnsembleForward nxt =
        ensemble_forward(agent.critics(), batch.next_states, next.actions, beta, false);
    const Vector v_lb = nxt.lower_bound.transpose() - agent.alpha() * next.log_probs.transpose();
    return batch.rewards + agent.config().gamma * batch.bootstrap_mask.cwiseProduct(v_lb) -
           cur.mean.transpose();
}

// Validation-to-training ratio of mean squared pessimistic TD errors; ~1 means
// the critic generalizes. Both batches share one rng state so identical
// batches give exactly 1. The signed variant divides plain means instead.
inline double overfit_metric(const SacAgent& agent, double beta, const BatchMatrices& train_batch,
                             const BatchMatrices& val_batch, Rng& rng, bool squared = true) {
    if (train_batch.rewards.size() == 0 || val_batch.rewards.size() == 0)
        throw ParameterError("overfit_metric: batches must be nonempty");
    const Rng frozen = rng.derive(0x0F);
    const Vector u_train = pessimistic_td_errors(agent, beta, train_batch, frozen);
    const Vector u_val = pessimistic_td_errors(agent, beta, val_batch, frozen);
    double num, den;
    if (squared) {
        num = u_val.squaredNorm() / static_cast<double>(u_val.size());
        den = u_train.squaredNorm() / static_cast<double>(u_train.size());
    } else {
        num = u_val.mean();
        den = u_train.mean();
    }
    if (std::abs(den) < 1e-12) return std::numeric_limits<double>::quiet_NaN();
    return num / den;
}

// ---------------------------------------------------------------------------
// Experiment driver

struct RunResult {
    std::vector<MetricsRow> rows;
    bool failed = false;
    std::string error;
};

// Mean eval_return of the last (up to) 10 evaluation rows.
inline double final_performance(const std::vector<MetricsRow>& rows) {
    if (rows.empty()) return std::numeric_limits<double>::quiet_NaN();
    const std::size_t n = std::min<std::size_t>(10, rows.size());
    double total = 0.0;
    for (std::size_t i = rows.size() - n; i < rows.size(); ++i) total += rows[i].eval_return;
    return total / static_cast<double>(n);
}

inline bool wallclock_enabled() {
    const char* flag = std::getenv("PESSILAB_WALLCLOCK");
    return flag && std::string(flag) == "1";
}

// One full training run. Rows stream to csv_path as they are produced; a
// numeric failure leaves the partial CSV plus one all-NaN row and returns
// failed=true. Every CSV byte is a function of (cfg, seed); wall_ms is 0
// unless PESSILAB_WALLCLOCK=1 opts into measured (nondeterministic) timings.
inline RunResult run_experiment(const ExperimentConfig& cfg, const std::string& csv_path,
                                const std::string& checkpoint_path = "") {
    cfg.validate();
    RunResult result;
    std::ofstream csv(csv_path, std::ios::binary);
    if (!csv) throw std::runtime_error("run_experiment: cannot open " + csv_path);
    csv << kMetricsHeader << '\n';
    csv.flush();

    auto proto_copy = make_environment(cfg);
    const Environment& env_proto = *proto_copy;

    TrainingSession session(make_environment(cfg), cfg.agent, cfg.adjuster, cfg.validation_ratio,
                            cfg.buffer_capacity(), cfg.seed);
    Rng eval_rng = Rng(cfg.seed).derive(0x08);
    Rng metric_rng = Rng(cfg.seed).derive(0x09);
    Rng reset_rng = Rng(cfg.seed).derive(0x0A);
    Rng overfit_rng = Rng(cfg.seed).derive(0x0B);
    ReplayBuffer eval_stream(static_cast<std::size_t>(
        std::max(1, cfg.eval_episodes * cfg.episode_length)));

    const bool timed = wallclock_enabled();
    auto last_wall = std::chrono::steady_clock::now();
    StepReport last_report;

    for (long step = 1; step <= cfg.total_steps; ++step) {
        try {
            const StepReport rep = session.train_step();
            if (rep.updates_run > 0) last_report = rep;
        } catch (const NumericError& err) {
            MetricsRow bad;
            bad.step = step;
            csv << format_row(bad) << '\n';
            csv.flush();
            result.rows.push_back(bad);
            result.failed = true;
            result.error = err.what();
            return result;
        }
        if (cfg.reset_every > 0 && step % cfg.reset_every == 0 && step < cfg.total_steps) {
            session.reset_parameters(reset_rng.next_u64());
        }
        if (step % cfg.eval_every == 0) {
            MetricsRow row;
            row.step = step;
            row.eval_return = evaluate(session.agent(), env_proto, cfg.eval_episodes, eval_rng, &eval_stream);
            row.beta = session.beta();
            row.alpha = session.agent().alpha();
            row.critic_disagreement = session.probe_disagreement();
            row.approx_error = approx_error_metric(session.agent(), env_proto, cfg.approx_starts,
                                                   cfg.episode_length, metric_rng);
            row.critic_loss = last_report.critic_loss;
            const std::size_t B = static_cast<std::size_t>(cfg.agent.batch_size);
            const ReplayBuffer& val_source =
                cfg.validation_ratio > 0.0 ? session.validation_buffer() : eval_stream;
            if (session.train_buffer().size() > 0 && val_source.size() > 0) {
                const BatchMatrices tb = assemble_batch(session.train_buffer().sample(B, overfit_rng));
                const BatchMatrices vb = assemble_batch(val_source.sample(B, overfit_rng));
                row.overfit_ratio =
                    overfit_metric(session.agent(), session.beta(), tb, vb, overfit_rng, !cfg.overfit_signed);
            }
            if (timed) {
                const auto now = std::chrono::steady_clock::now();
                row.wall_ms = std::chrono::duration<double, std::milli>(now - last_wall).count();
                last_wall = now;
            } else {
                row.wall_ms = 0.0;
            }
            csv << format_row(row) << '\n';
            csv.flush();
            result.rows.push_back(row);
        }
    }
    if (!checkpoint_path.empty()) {
        save_agent_checkpoint(checkpoint_path, session.agent(), cfg.env, cfg.episode_length);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Sweeps

struct BootstrapCi {
    double mean = std::numeric_limits<double>::quiet_NaN();
    double lo = std::numeric_limits<double>::quiet_NaN();
    double hi = std::numeric_limits<double>::quiet_NaN();
};

// Percentile bootstrap over per-seed values; a constant column collapses to a
// zero-width interval.
inline BootstrapCi bootstrap_ci(const std::vector<double>& values, int resamples, Rng& rng) {
    BootstrapCi ci;
    if (values.empty()) return ci;
    double total = 0.0;
    for (double v : values) total += v;
    ci.mean = total / static_cast<double>(values.size());
    std::vector<double> means(static_cast<std::size_t>(resamples));
    for (auto& m : means) {
        double acc = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i)
            acc += values[static_cast<std::size_t>(rng.uniform_int(values.size()))];
        m = acc / static_cast<double>(values.size());
    }
    std::sort(means.begin(), means.end());
    const std::size_t lo_idx = static_cast<std::size_t>(std::floor(0.025 * (resamples - 1)));
    const std::size_t hi_idx = static_cast<std::size_t>(std::ceil(0.975 * (resamples - 1)));
    ci.lo = means[lo_idx];
    ci.hi = means[hi_idx];
    return ci;
}

// Applies one sweep-axis value on top of the base config. The
// validation_ratio axis maps v=0 to the regret arm: buffer routing kept as-is
// in code (it is a no-op at v=0) with the adjuster frozen. ablation_grid
// values look like "loss:source", e.g. "vpl:replay".
inline ExperimentConfig apply_sweep_value(ExperimentConfig cfg, const std::string& axis, const std::string& value) {
    if (axis == "validation_ratio") {
        cfg.validation_ratio = std::stod(value);
        if (cfg.validation_ratio == 0.0) cfg.adjuster.kind = AdjusterKind::kFixed;
    } else if (axis == "pessimism_lr") {
        cfg.adjuster.pessimism_lr = std::stod(value);
    } else if (axis == "adjuster") {
        cfg.adjuster.kind = adjuster_kind_from_string(value);
        cfg.validation_ratio = std::numeric_limits<double>::quiet_NaN();
        cfg.resolve();
    } else if (axis == "ablation_grid") {
        const auto colon = value.find(':');
        if (colon == std::string::npos)
            throw ParameterError("sweep: ablation_grid values look like 'loss:source'");
        cfg.adjuster.kind = AdjusterKind::kAblation;
        cfg.adjuster.loss = pessimism_loss_from_string(value.substr(0, colon));
        cfg.adjuster.source = pessimism_source_from_string(value.substr(colon + 1));
        cfg.validation_ratio = std::numeric_limits<double>::quiet_NaN();
        cfg.resolve();
    } else {
        throw ParameterError("sweep: unknown axis '" + axis + "'");
    }
    return cfg;
}

inline int sweep_thread_cap() {
    if (const char* env = std::getenv("PESSILAB_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

struct SweepSummaryRow {
    std::string value;
    int n_seeds = 0;
    int n_failed = 0;
    BootstrapCi final_return;
};

struct SweepResult {
    std::vector<SweepSummaryRow> summary;
    bool any_failed = false;
};

inline std::string sweep_file_token(std::string s) {
    for (char& c : s)
        if (c == '/' || c == ':' || c == ' ') c = '-';
    return s;
}

// Cross product of values x seeds; each run owns its state and CSV, failures
// are recorded and the sweep continues. Summary aggregation is a
// single-threaded reduction once the workers drain the job queue.
inline SweepResult sweep(const ExperimentConfig& base, const std::string& axis,
                         const std::vector<std::string>& values, const std::vector<std::uint64_t>& seeds,
                         const std::string& out_dir) {
    if (values.empty() || seeds.empty()) throw ParameterError("sweep: values and seeds must be nonempty");
    std::filesystem::create_directories(out_dir);

    struct Job {
        ExperimentConfig cfg;
        std::string csv_path;
        std::size_t value_idx;
        double final_return = std::numeric_limits<double>::quiet_NaN();
        bool failed = false;
    };
    std::vector<Job> jobs;
    for (std::size_t vi = 0; vi < values.size(); ++vi) {
        for (std::uint64_t seed : seeds) {
            Job job;
            job.cfg = apply_sweep_value(base, axis, values[vi]);
            job.cfg.seed = seed;
            job.cfg.validate();
            job.csv_path = out_dir + "/" + axis + "=" + sweep_file_token(values[vi]) + "_seed" +
                           std::to_string(seed) + ".csv";
            job.value_idx = vi;
            jobs.push_back(std::move(job));
        }
    }

    const int n_threads = std::min<int>(sweep_thread_cap(), static_cast<int>(jobs.size()));
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            Job& job = jobs[i];
            try {
                const RunResult run = run_experiment(job.cfg, job.csv_path);
                job.failed = run.failed;
                if (!run.failed) job.final_return = final_performance(run.rows);
            } catch (const std::exception&) {
                job.failed = true;
            }
        }
    };
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    SweepResult result;
    Rng boot_rng(0xB007);
    std::ofstream summary(out_dir + "/summary.csv", std::ios::binary);
    if (!summary) throw std::runtime_error("sweep: cannot open summary.csv in " + out_dir);
    summary << "value,n_seeds,n_failed,mean_final,ci_lo,ci_hi\n";
    for (std::size_t vi = 0; vi < values.size(); ++vi) {
        SweepSummaryRow row;
        row.value = values[vi];
        std::vector<double> finals;
        for (const Job& job : jobs) {
            if (job.value_idx != vi) continue;
            ++row.n_seeds;
            if (job.failed) {
                ++row.n_failed;
                result.any_failed = true;
            } else {
                finals.push_back(job.final_return);
            }
        }
        row.final_return = bootstrap_ci(finals, 10000, boot_rng);
        summary << row.value << ',' << row.n_seeds << ',' << row.n_failed << ','
                << format_metric(row.final_return.mean) << ',' << format_metric(row.final_return.lo) << ','
                << format_metric(row.final_return.hi) << '\n';
        result.summary.push_back(std::move(row));
    }
    return result;
}

}  // namespace pessilab

#endif  // PESSILAB_HARNESS_HPP_
