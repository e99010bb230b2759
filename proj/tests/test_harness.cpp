#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pessilab/harness.hpp"

using namespace pessilab;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

std::string tmp_path(const std::string& name) {
    return (fs::temp_directory_path() / name).string();
}

ExperimentConfig small_run_config() {
    ExperimentConfig cfg;
    cfg.env = "pendulum";
    cfg.episode_length = 40;
    cfg.total_steps = 200;
    cfg.eval_every = 50;
    cfg.eval_episodes = 2;
    cfg.approx_starts = 2;
    cfg.agent.hidden = {8, 8};
    cfg.agent.batch_size = 16;
    cfg.agent.initial_random_steps = 40;
    cfg.agent.replay_ratio = 1;
    cfg.resolve();
    return cfg;
}

BatchMatrices constant_reward_batch(double reward, int n) {
    std::vector<Transition> storage;
    for (int i = 0; i < n; ++i) {
        Transition t;
        t.s = Vector::Zero(3);
        t.a = Vector::Zero(1);
        t.r = reward;
        t.s_next = Vector::Zero(3);
        t.terminal = false;
        storage.push_back(std::move(t));
    }
    std::vector<const Transition*> ptrs;
    for (const auto& t : storage) ptrs.push_back(&t);
    return assemble_batch(ptrs);
}

}  // namespace

TEST_CASE("config parsing fills fields and resolves the split ratio") {
    nlohmann::json j = {{"env", "pendulum"}, {"total_steps", 400},  {"eval_every", 100},
                        {"adjuster", "vpl"}, {"batch_size", 32},    {"gamma", 0.95},
                        {"hidden", {8, 8}},  {"seed", 7}};
    const ExperimentConfig cfg = experiment_config_from_json(j);
    REQUIRE(cfg.total_steps == 400);
    REQUIRE(cfg.agent.batch_size == 32);
    REQUIRE(cfg.agent.gamma == 0.95);
    REQUIRE(cfg.seed == 7);
    REQUIRE(cfg.adjuster.kind == AdjusterKind::kVpl);
    REQUIRE(cfg.validation_ratio == 1.0 / 32.0);
    cfg.validate();
}

TEST_CASE("adjusters that never read validation data default to no split") {
    for (const char* name : {"fixed", "gpl", "opl", "top"}) {
        nlohmann::json j = {{"adjuster", name}};
        const ExperimentConfig cfg = experiment_config_from_json(j);
        INFO(name);
        REQUIRE(cfg.validation_ratio == 0.0);
    }
}

TEST_CASE("unknown config keys are rejected") {
    nlohmann::json j = {{"total_stepz", 100}};
    REQUIRE_THROWS_WITH(experiment_config_from_json(j), "config: unknown key 'total_stepz'");
}

TEST_CASE("eval cadence must divide the run length") {
    ExperimentConfig cfg = small_run_config();
    cfg.total_steps = 201;
    REQUIRE_THROWS_AS(cfg.validate(), ParameterError);
}

TEST_CASE("metric formatting uses nine significant digits and a NaN literal") {
    REQUIRE(format_metric(std::numeric_limits<double>::quiet_NaN()) == "NaN");
    REQUIRE(format_metric(0.0) == "0");
    REQUIRE(format_metric(-123.456789123) == "-123.456789");
    REQUIRE(format_metric(1e-9) == "1e-09");
    MetricsRow row;
    row.step = 5;
    row.eval_return = 1.5;
    row.wall_ms = 0.0;
    REQUIRE(format_row(row) == "5,1.5,NaN,NaN,NaN,NaN,NaN,NaN,0");
}

TEST_CASE("an empty row set writes only the header") {
    const std::string path = tmp_path("pessilab_empty.csv");
    write_metrics({}, path);
    REQUIRE(slurp(path) == std::string(kMetricsHeader) + "\n");
    fs::remove(path);
}

TEST_CASE("a zero-step run produces a header-only CSV") {
    ExperimentConfig cfg = small_run_config();
    cfg.total_steps = 0;
    const std::string path = tmp_path("pessilab_zero.csv");
    const RunResult result = run_experiment(cfg, path);
    REQUIRE_FALSE(result.failed);
    REQUIRE(result.rows.empty());
    REQUIRE(slurp(path) == std::string(kMetricsHeader) + "\n");
    fs::remove(path);
}

TEST_CASE("identical configurations produce byte-identical CSVs") {
    const ExperimentConfig cfg = small_run_config();
    const std::string p1 = tmp_path("pessilab_det1.csv");
    const std::string p2 = tmp_path("pessilab_det2.csv");
    run_experiment(cfg, p1);
    run_experiment(cfg, p2);
    REQUIRE(slurp(p1) == slurp(p2));
    REQUIRE(slurp(p1).rfind(kMetricsHeader, 0) == 0);
    fs::remove(p1);
    fs::remove(p2);
}

TEST_CASE("different seeds produce different trajectories") {
    ExperimentConfig cfg = small_run_config();
    const std::string p1 = tmp_path("pessilab_seed0.csv");
    const std::string p2 = tmp_path("pessilab_seed1.csv");
    run_experiment(cfg, p1);
    cfg.seed = 1;
    run_experiment(cfg, p2);
    REQUIRE(slurp(p1) != slurp(p2));
    fs::remove(p1);
    fs::remove(p2);
}

TEST_CASE("a reset cadence equal to the run length never fires") {
    // the reset at the final step is suppressed, so reset_every == total_steps
    // must match the no-reset run byte for byte
    ExperimentConfig cfg = small_run_config();
    const std::string p1 = tmp_path("pessilab_noreset.csv");
    const std::string p2 = tmp_path("pessilab_lastreset.csv");
    const std::string p3 = tmp_path("pessilab_midreset.csv");
    run_experiment(cfg, p1);
    cfg.reset_every = cfg.total_steps;
    run_experiment(cfg, p2);
    cfg.reset_every = cfg.total_steps / 2;
    run_experiment(cfg, p3);
    REQUIRE(slurp(p1) == slurp(p2));
    REQUIRE(slurp(p1) != slurp(p3));
    fs::remove(p1);
    fs::remove(p2);
    fs::remove(p3);
}

TEST_CASE("evaluation matches an independent greedy re-simulation") {
    ExperimentConfig cfg = small_run_config();
    SacAgent agent(3, 1, cfg.agent, 5);
    PendulumSpec spec;
    spec.episode_length = 25;
    const PendulumEnv proto(spec);
    Rng rng_eval(42), rng_check(42);
    const double reported = evaluate(agent, proto, 3, rng_eval);
    double total = 0.0;
    for (int e = 0; e < 3; ++e) {
        auto env = proto.clone();
        Vector obs = env->reset(rng_check);
        while (true) {
            const Vector a = policy_sample(agent.actor(), obs, rng_check, SampleMode::kGreedy).first;
            const EnvStep step = env->step(a);
            total += step.reward;
            obs = step.obs;
            if (step.terminal || step.episode_end) break;
        }
    }
    REQUIRE(reported == total / 3.0);
}

TEST_CASE("the evaluation collector stores every transition") {
    ExperimentConfig cfg = small_run_config();
    SacAgent agent(3, 1, cfg.agent, 6);
    PendulumSpec spec;
    spec.episode_length = 15;
    const PendulumEnv proto(spec);
    ReplayBuffer collector(1000);
    Rng rng(1);
    evaluate(agent, proto, 4, rng, &collector);
    REQUIRE(collector.size() == 60);
}

TEST_CASE("the approximation gap metric matches a manual geometric estimate") {
    ExperimentConfig cfg = small_run_config();
    SacAgent agent(3, 1, cfg.agent, 7);
    PendulumSpec spec;
    spec.episode_length = 20;
    const PendulumEnv proto(spec);
    Rng rng_metric(9), rng_check(9);
    const double reported = approx_error_metric(agent, proto, 3, 20, rng_metric);

    const double gamma = cfg.agent.gamma;
    const double alpha = agent.alpha();
    double total = 0.0;
    for (int i = 0; i < 3; ++i) {
        auto env = proto.clone();
        Vector obs = env->reset(rng_check);
        double rsum = 0.0, lsum = 0.0, q_mu = 0.0;
        for (int t = 0; t < 20; ++t) {
            const auto [a, logp] = policy_sample(agent.actor(), obs, rng_check, SampleMode::kStochastic);
            if (t == 0) q_mu = agent.q_mean(obs, a);
            const EnvStep step = env->step(a);
            rsum += step.reward;
            lsum += logp;
            obs = step.obs;
        }
        total += -((rsum / 20 - alpha * lsum / 20) / (1.0 - gamma) - q_mu);
    }
    REQUIRE(reported == Catch::Approx(total / 3.0).margin(1e-12));
}

TEST_CASE("identical train and validation batches score exactly one") {
    ExperimentConfig cfg = small_run_config();
    SacAgent agent(3, 1, cfg.agent, 10);
    Rng aux(11);
    std::vector<Transition> storage;
    for (int i = 0; i < 12; ++i) {
        Transition t;
        t.s = Vector::NullaryExpr(3, [&](Eigen::Index) { return aux.uniform(-1.0, 1.0); });
        t.a = Vector::Constant(1, aux.uniform(-0.9, 0.9));
        t.r = aux.uniform(-1.0, 1.0);
        t.s_next = Vector::NullaryExpr(3, [&](Eigen::Index) { return aux.uniform(-1.0, 1.0); });
        storage.push_back(std::move(t));
    }
    std::vector<const Transition*> ptrs;
    for (const auto& t : storage) ptrs.push_back(&t);
    const BatchMatrices batch = assemble_batch(ptrs);
    Rng rng(12);
    REQUIRE(overfit_metric(agent, 1.0, batch, batch, rng) == 1.0);
}

TEST_CASE("a synthetic residual split gives the squared-error ratio four") {
    // critics zeroed and temperature sent to zero so the pessimistic temporal
    // error reduces to the reward itself: (4^2) / (2^2) = 4
    ExperimentConfig cfg = small_run_config();
    SacAgent agent(3, 1, cfg.agent, 13);
    for (auto& p : agent.critics().online) p.setZero();
    agent.set_log_alpha(-745.0);  // exp underflows to zero
    const BatchMatrices train = constant_reward_batch(2.0, 8);
    const BatchMatrices val = constant_reward_batch(4.0, 8);
    Rng rng(14);
    REQUIRE(overfit_metric(agent, 1.0, train, val, rng) == Catch::Approx(4.0).margin(1e-12));
    Rng rng2(14);
    REQUIRE(overfit_metric(agent, 1.0, train, val, rng2, false) == Catch::Approx(2.0).margin(1e-12));
}

TEST_CASE("a vanishing training residual reports NaN instead of exploding") {
    ExperimentConfig cfg = small_run_config();
    SacAgent agent(3, 1, cfg.agent, 15);
    for (auto& p : agent.critics().online) p.setZero();
    agent.set_log_alpha(-745.0);
    const BatchMatrices train = constant_reward_batch(0.0, 8);
    const BatchMatrices val = constant_reward_batch(1.0, 8);
    Rng rng(16);
    REQUIRE(std::isnan(overfit_metric(agent, 1.0, train, val, rng)));
}

TEST_CASE("checkpoints round trip bit for bit") {
    ExperimentConfig cfg = small_run_config();
    const std::string csv = tmp_path("pessilab_ckpt_run.csv");
    const std::string ckpt_path = tmp_path("pessilab_ckpt.bin");
    run_experiment(cfg, csv, ckpt_path);
    const Checkpoint ckpt = read_checkpoint(ckpt_path);
    REQUIRE(ckpt.manifest.at("format") == "pessilab-checkpoint-v1");
    REQUIRE(ckpt.manifest.at("env") == "pendulum");
    const SacAgent restored = restore_agent(ckpt);
    REQUIRE(restored.actor().params == ckpt.blob("actor"));
    REQUIRE(restored.critics().online[0] == ckpt.blob("critic_online_0"));
    REQUIRE(restored.critics().target[1] == ckpt.blob("critic_target_1"));

    // writing the restored agent back must reproduce the file exactly
    const std::string ckpt2 = tmp_path("pessilab_ckpt2.bin");
    save_agent_checkpoint(ckpt2, restored, "pendulum", cfg.episode_length);
    REQUIRE(slurp(ckpt_path) == slurp(ckpt2));
    fs::remove(csv);
    fs::remove(ckpt_path);
    fs::remove(ckpt2);
}

TEST_CASE("final performance averages the last ten evaluation rows") {
    std::vector<MetricsRow> rows;
    for (int i = 0; i < 14; ++i) {
        MetricsRow r;
        r.step = i;
        r.eval_return = static_cast<double>(i);
        rows.push_back(r);
    }
    REQUIRE(final_performance(rows) == Catch::Approx((4 + 13) / 2.0).margin(1e-12));
    rows.resize(3);
    REQUIRE(final_performance(rows) == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(std::isnan(final_performance({})));
}

TEST_CASE("bootstrap intervals collapse for constant data and bracket the mean") {
    Rng rng(17);
    const BootstrapCi flat = bootstrap_ci({2.5, 2.5, 2.5, 2.5}, 1000, rng);
    REQUIRE(flat.mean == 2.5);
    REQUIRE(flat.lo == 2.5);
    REQUIRE(flat.hi == 2.5);

    std::vector<double> spread;
    Rng data_rng(18);
    for (int i = 0; i < 30; ++i) spread.push_back(data_rng.normal());
    const BootstrapCi ci = bootstrap_ci(spread, 10000, rng);
    REQUIRE(ci.lo <= ci.mean);
    REQUIRE(ci.mean <= ci.hi);
    // roughly 2 * 1.96 * s / sqrt(30) for the sample deviation s
    double s = 0.0;
    for (double v : spread) s += (v - ci.mean) * (v - ci.mean);
    s = std::sqrt(s / 30.0);
    REQUIRE(ci.hi - ci.lo < 5.0 * s / std::sqrt(30.0));
}

TEST_CASE("sweep axis application covers every supported axis") {
    ExperimentConfig base = small_run_config();

    const ExperimentConfig lr = apply_sweep_value(base, "pessimism_lr", "0.05");
    REQUIRE(lr.adjuster.pessimism_lr == 0.05);

    const ExperimentConfig vr = apply_sweep_value(base, "validation_ratio", "0.125");
    REQUIRE(vr.validation_ratio == 0.125);

    // the zero split is the baseline arm: pessimism is frozen
    const ExperimentConfig regret = apply_sweep_value(base, "validation_ratio", "0");
    REQUIRE(regret.validation_ratio == 0.0);
    REQUIRE(regret.adjuster.kind == AdjusterKind::kFixed);

    const ExperimentConfig adj = apply_sweep_value(base, "adjuster", "vpl");
    REQUIRE(adj.adjuster.kind == AdjusterKind::kVpl);
    REQUIRE(adj.validation_ratio == 1.0 / 32.0);

    const ExperimentConfig cell = apply_sweep_value(base, "ablation_grid", "vpl:replay");
    REQUIRE(cell.adjuster.kind == AdjusterKind::kAblation);
    REQUIRE(cell.adjuster.loss == PessimismLoss::kVpl);
    REQUIRE(cell.adjuster.source == PessimismSource::kReplay);
    REQUIRE(cell.validation_ratio == 0.0);

    REQUIRE_THROWS_AS(apply_sweep_value(base, "bogus", "1"), ParameterError);
    REQUIRE_THROWS_AS(apply_sweep_value(base, "ablation_grid", "vpl-replay"), ParameterError);
}

TEST_CASE("a sweep writes one CSV per job plus a summary") {
    ExperimentConfig base = small_run_config();
    base.total_steps = 100;
    base.eval_every = 50;
    const std::string dir = tmp_path("pessilab_sweep_test");
    fs::remove_all(dir);
    const SweepResult result = sweep(base, "pessimism_lr", {"0.01", "0.1"}, {0, 1}, dir);
    REQUIRE_FALSE(result.any_failed);
    REQUIRE(result.summary.size() == 2);
    REQUIRE(result.summary[0].n_seeds == 2);
    REQUIRE(result.summary[0].n_failed == 0);
    for (const char* name : {"pessimism_lr=0.01_seed0.csv", "pessimism_lr=0.01_seed1.csv",
                             "pessimism_lr=0.1_seed0.csv", "pessimism_lr=0.1_seed1.csv", "summary.csv"})
        REQUIRE(fs::exists(dir + "/" + name));
    const std::string summary = slurp(dir + "/summary.csv");
    REQUIRE(summary.rfind("value,n_seeds,n_failed,mean_final,ci_lo,ci_hi\n", 0) == 0);

    // the sweep run must agree byte for byte with a direct run of the same job
    const std::string direct = tmp_path("pessilab_sweep_direct.csv");
    ExperimentConfig one = apply_sweep_value(base, "pessimism_lr", "0.01");
    one.seed = 1;
    run_experiment(one, direct);
    REQUIRE(slurp(direct) == slurp(dir + "/pessimism_lr=0.01_seed1.csv"));
    fs::remove(direct);
    fs::remove_all(dir);
}

TEST_CASE("environment factory understands all three id forms") {
    ExperimentConfig cfg = small_run_config();
    REQUIRE(make_environment(cfg)->obs_dim() == 3);
    cfg.env = "random-mdp:4,2,9";
    auto env = make_environment(cfg);
    REQUIRE(env->obs_dim() == 4);
    REQUIRE(env->action_dim() == 1);
    cfg.env = "nonsense";
    REQUIRE_THROWS_AS(make_environment(cfg), ParameterError);
    cfg.env = "mdp:/no/such/file.json";
    REQUIRE_THROWS_AS(make_environment(cfg), ParameterError);
}
