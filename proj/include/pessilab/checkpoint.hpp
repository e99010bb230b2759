#ifndef PESSILAB_CHECKPOINT_HPP_
#define PESSILAB_CHECKPOINT_HPP_

#include <cstdint>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "pessilab/agent.hpp"

namespace pessilab {

inline nlohmann::json agent_config_to_json(const AgentConfig& cfg) {
    return nlohmann::json{{"gamma", cfg.gamma},
                          {"batch_size", cfg.batch_size},
                          {"replay_ratio", cfg.replay_ratio},
                          {"tau", cfg.tau},
                          {"actor_lr", cfg.actor_lr},
                          {"critic_lr", cfg.critic_lr},
                          {"alpha_lr", cfg.alpha_lr},
                          {"initial_alpha", cfg.initial_alpha},
                          {"target_entropy", std::isnan(cfg.target_entropy) ? nlohmann::json() : nlohmann::json(cfg.target_entropy)},
                          {"ensemble_size", cfg.ensemble_size},
                          {"initial_random_steps", cfg.initial_random_steps},
                          {"hidden", cfg.hidden},
                          {"activation", cfg.activation == Activation::kRelu ? "relu" : "tanh"},
                          {"buffer_capacity", cfg.buffer_capacity}};
}

inline AgentConfig agent_config_from_json(const nlohmann::json& j) {
    AgentConfig cfg;
    if (j.contains("gamma")) cfg.gamma = j.at("gamma").get<double>();
    if (j.contains("batch_size")) cfg.batch_size = j.at("batch_size").get<int>();
    if (j.contains("replay_ratio")) cfg.replay_ratio = j.at("replay_ratio").get<int>();
    if (j.contains("tau")) cfg.tau = j.at("tau").get<double>();
    if (j.contains("actor_lr")) cfg.actor_lr = j.at("actor_lr").get<double>();
    if (j.contains("critic_lr")) cfg.critic_lr = j.at("critic_lr").get<double>();
    if (j.contains("alpha_lr")) cfg.alpha_lr = j.at("alpha_lr").get<double>();
    if (j.contains("initial_alpha")) cfg.initial_alpha = j.at("initial_alpha").get<double>();
    if (j.contains("target_entropy") && !j.at("target_entropy").is_null())
        cfg.target_entropy = j.at("target_entropy").get<double>();
    if (j.contains("ensemble_size")) cfg.ensemble_size = j.at("ensemble_size").get<int>();
    if (j.contains("initial_random_steps")) cfg.initial_random_steps = j.at("initial_random_steps").get<int>();
    if (j.contains("hidden")) cfg.hidden = j.at("hidden").get<std::vector<int>>();
    if (j.contains("activation"))
        cfg.activation = j.at("activation").get<std::string>() == "tanh" ? Activation::kTanh : Activation::kRelu;
    if (j.contains("buffer_capacity")) cfg.buffer_capacity = j.at("buffer_capacity").get<std::size_t>();
    return cfg;
}

// Checkpoint layout: 8-byte little-endian manifest length, the JSON manifest,
// then every parameter blob as consecutive little-endian 8-byte floats.
// Round trip is bit-exact.
struct Checkpoint {
    nlohmann::json manifest;
    std::vector<std::pair<std::string, Vector>> blobs;

    const Vector& blob(const std::string& name) const {
        for (const auto& [n, v] : blobs)
            if (n == name) return v;
        throw ParameterError("checkpoint: missing blob " + name);
    }
};

inline void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    nlohmann::json manifest = ckpt.manifest;
    auto blob_list = nlohmann::json::array();
    for (const auto& [name, v] : ckpt.blobs) blob_list.push_back({{"name", name}, {"size", v.size()}});
    manifest["blobs"] = blob_list;
    const std::string text = manifest.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    const std::uint64_t len = text.size();
    char header[8];
    for (int i = 0; i < 8; ++i) header[i] = static_cast<char>((len >> (8 * i)) & 0xFF);
    out.write(header, 8);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, v] : ckpt.blobs)
        out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * 8));
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

inline Checkpoint read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    char header[8];
    in.read(header, 8);
    std::uint64_t len = 0;
    for (int i = 0; i < 8; ++i) len |= static_cast<std::uint64_t>(static_cast<unsigned char>(header[i])) << (8 * i);
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    Checkpoint ckpt;
    ckpt.manifest = nlohmann::json::parse(text);
    for (const auto& entry : ckpt.manifest.at("blobs")) {
        Vector v(entry.at("size").get<Eigen::Index>());
        in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * 8));
        ckpt.blobs.emplace_back(entry.at("name").get<std::string>(), std::move(v));
    }
    if (!in) throw std::runtime_error("checkpoint: truncated file " + path);
    return ckpt;
}

inline void save_agent_checkpoint(const std::string& path, const SacAgent& agent, const std::string& env_id,
                                  int episode_length) {
    Checkpoint ckpt;
    ckpt.manifest = {{"format", "pessilab-checkpoint-v1"},
                     {"env", env_id},
                     {"episode_length", episode_length},
                     {"obs_dim", agent.obs_dim()},
                     {"action_dim", agent.action_dim()},
                     {"agent_config", agent_config_to_json(agent.config())}};
    ckpt.blobs.emplace_back("actor", agent.actor().params);
    for (int i = 0; i < agent.critics().size(); ++i) {
        ckpt.blobs.emplace_back("critic_online_" + std::to_string(i), agent.critics().online[static_cast<std::size_t>(i)]);
        ckpt.blobs.emplace_back("critic_target_" + std::to_string(i), agent.critics().target[static_cast<std::size_t>(i)]);
    }
    Vector log_alpha(1);
    log_alpha(0) = agent.temperature().log_alpha;
    ckpt.blobs.emplace_back("log_alpha", log_alpha);
    write_checkpoint(path, ckpt);
}

inline SacAgent restore_agent(const Checkpoint& ckpt) {
    const auto& m = ckpt.manifest;
    if (m.value("format", "") != "pessilab-checkpoint-v1")
        throw ParameterError("checkpoint: unrecognized format");
    AgentConfig cfg = agent_config_from_json(m.at("agent_config"));
    SacAgent agent(m.at("obs_dim").get<int>(), m.at("action_dim").get<int>(), cfg, 0);
    agent.actor().params = ckpt.blob("actor");
    for (int i = 0; i < agent.critics().size(); ++i) {
        agent.critics().online[static_cast<std::size_t>(i)] = ckpt.blob("critic_online_" + std::to_string(i));
        agent.critics().target[static_cast<std::size_t>(i)] = ckpt.blob("critic_target_" + std::to_string(i));
    }
    agent.set_log_alpha(ckpt.blob("log_alpha")(0));
    return agent;
}

}  // namespace pessilab

#endif  // PESSILAB_CHECKPOINT_HPP_
