// pessilab command line: certificate suite, single training runs, sweeps and
// checkpoint evaluation. Exit codes: 0 success, 1 run failure, 2 config error.
#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "pessilab/checkpoint.hpp"
#include "pessilab/error_lab.hpp"
#include "pessilab/harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRunFailure = 1;
constexpr int kExitConfigError = 2;

pessilab::ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw pessilab::ParameterError("cannot open config file " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw pessilab::ParameterError(std::string("config parse error: ") + e.what());
    }
    return pessilab::experiment_config_from_json(doc);
}

std::vector<std::string> split_csv_list(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

// "1..10" expands inclusively; otherwise a comma list of integers.
std::vector<std::uint64_t> parse_seeds(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    const auto dots = text.find("..");
    if (dots != std::string::npos) {
        const std::uint64_t lo = std::stoull(text.substr(0, dots));
        const std::uint64_t hi = std::stoull(text.substr(dots + 2));
        if (hi < lo) throw pessilab::ParameterError("seeds: empty range " + text);
        for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
        return seeds;
    }
    for (const auto& tok : split_csv_list(text)) seeds.push_back(std::stoull(tok));
    return seeds;
}

int cmd_verify(const std::string& mdp_path, int trials, std::uint64_t seed) {
    pessilab::MdpSpec mdp;
    if (!mdp_path.empty()) {
        std::ifstream in(mdp_path);
        if (!in) throw pessilab::ParameterError("cannot open MDP file " + mdp_path);
        mdp = pessilab::mdp_from_json(nlohmann::json::parse(in));
    } else {
        mdp = pessilab::make_random_mdp(6, 3, 0.9, seed);
    }
    const nlohmann::json report = pessilab::verify_report(mdp, trials, seed);
    std::cout << report.dump(2) << '\n';
    const bool ok = report.at("identity_max_gap").get<double>() <= 1e-10 &&
                    report.at("fixedpoint_max_gap").get<double>() <= 1e-8 &&
                    report.at("contraction_holds").get<bool>() && report.at("monotone_holds").get<bool>();
    return ok ? kExitOk : kExitRunFailure;
}

int cmd_eval(const std::string& checkpoint_path, int episodes, std::uint64_t seed) {
    const pessilab::Checkpoint ckpt = pessilab::read_checkpoint(checkpoint_path);
    pessilab::SacAgent agent = pessilab::restore_agent(ckpt);
    pessilab::ExperimentConfig env_cfg;
    env_cfg.env = ckpt.manifest.value("env", "pendulum");
    env_cfg.episode_length = ckpt.manifest.value("episode_length", 200);
    env_cfg.agent = agent.config();
    const auto env = pessilab::make_environment(env_cfg);
    pessilab::Rng rng = pessilab::Rng(seed).derive(0x08);
    const double mean_return = pessilab::evaluate(agent, *env, episodes, rng);
    std::printf("mean_return %.9g over %d episodes\n", mean_return, episodes);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pessimistic actor-critic laboratory"};
    app.require_subcommand(1);

    auto* verify = app.add_subcommand("verify", "run the tabular error-calculus certificate suite");
    std::string verify_mdp;
    int verify_trials = 1000;
    std::uint64_t verify_seed = 0;
    verify->add_option("--mdp", verify_mdp, "MDP spec JSON file (omit for a random MDP)");
    verify->add_option("--trials", verify_trials, "random field pairs for the contraction check");
    verify->add_option("--seed", verify_seed, "random seed");

    auto* train = app.add_subcommand("train", "one training run, CSV metrics + checkpoint");
    std::string train_config, train_out, train_adjuster;
    std::uint64_t train_seed = 0;
    long train_steps = -1;
    int train_rr = -1;
    double train_vr = -1.0;
    bool has_seed = false;
    train->add_option("--config", train_config, "experiment config JSON")->required();
    train->add_option("--seed", train_seed)->each([&](const std::string&) { has_seed = true; });
    train->add_option("--out", train_out, "output directory");
    train->add_option("--adjuster", train_adjuster, "fixed|vpl|gpl|opl|top|ablation");
    train->add_option("--replay-ratio", train_rr);
    train->add_option("--validation-ratio", train_vr);
    train->add_option("--steps", train_steps);

    auto* sweep = app.add_subcommand("sweep", "values x seeds grid of training runs");
    std::string sweep_config, sweep_axis, sweep_values, sweep_seeds, sweep_out;
    sweep->add_option("--config", sweep_config)->required();
    sweep->add_option("--axis", sweep_axis, "validation_ratio|pessimism_lr|ablation_grid|adjuster")->required();
    sweep->add_option("--values", sweep_values, "comma-separated axis values")->required();
    sweep->add_option("--seeds", sweep_seeds, "comma list or lo..hi range")->required();
    sweep->add_option("--out", sweep_out, "output directory")->required();

    auto* eval = app.add_subcommand("eval", "greedy evaluation of a checkpoint");
    std::string eval_checkpoint;
    int eval_episodes = 10;
    std::uint64_t eval_seed = 0;
    eval->add_option("--checkpoint", eval_checkpoint)->required();
    eval->add_option("--episodes", eval_episodes);
    eval->add_option("--seed", eval_seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfigError;
    }

    try {
        if (verify->parsed()) return cmd_verify(verify_mdp, verify_trials, verify_seed);

        if (train->parsed()) {
            pessilab::ExperimentConfig cfg = load_config(train_config);
            if (has_seed) cfg.seed = train_seed;
            if (!train_out.empty()) cfg.out = train_out;
            if (!train_adjuster.empty()) {
                cfg.adjuster.kind = pessilab::adjuster_kind_from_string(train_adjuster);
                cfg.validation_ratio = std::numeric_limits<double>::quiet_NaN();
                cfg.resolve();
            }
            if (train_rr >= 0) cfg.agent.replay_ratio = train_rr;
            if (train_vr >= 0.0) cfg.validation_ratio = train_vr;
            if (train_steps >= 0) cfg.total_steps = train_steps;
            cfg.validate();
            std::filesystem::create_directories(cfg.out);
            const std::string csv_path = cfg.out + "/metrics.csv";
            const std::string ckpt_path = cfg.out + "/checkpoint.bin";
            const pessilab::RunResult result = pessilab::run_experiment(cfg, csv_path, ckpt_path);
            if (result.failed) {
                std::cerr << "run failed: " << result.error << '\n';
                return kExitRunFailure;
            }
            std::printf("final_performance %.9g (%zu evaluation rows)\n",
                        pessilab::final_performance(result.rows), result.rows.size());
            return kExitOk;
        }

        if (sweep->parsed()) {
            const pessilab::ExperimentConfig base = load_config(sweep_config);
            const auto values = split_csv_list(sweep_values);
            const auto seeds = parse_seeds(sweep_seeds);
            const pessilab::SweepResult result = pessilab::sweep(base, sweep_axis, values, seeds, sweep_out);
            for (const auto& row : result.summary) {
                std::printf("%s: mean %.9g  ci [%.9g, %.9g]  seeds %d  failed %d\n", row.value.c_str(),
                            row.final_return.mean, row.final_return.lo, row.final_return.hi, row.n_seeds,
                            row.n_failed);
            }
            return result.any_failed ? kExitRunFailure : kExitOk;
        }

        if (eval->parsed()) return cmd_eval(eval_checkpoint, eval_episodes, eval_seed);
    } catch (const pessilab::ParameterError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "run failed: " << e.what() << '\n';
        return kExitRunFailure;
    }
    return kExitConfigError;
}
