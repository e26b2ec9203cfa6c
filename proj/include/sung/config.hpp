#pragma once
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sung/agents.hpp"
#include "sung/explore.hpp"
#include "sung/exploit.hpp"

namespace sung {

// Flat "key = value" configuration with dotted keys. '#' starts a comment.
class FlatConfig {
public:
    static FlatConfig from_file(const std::string& path);
    static FlatConfig from_string(const std::string& text);

    void set(const std::string& key, const std::string& value) { kv_[key] = value; }
    bool has(const std::string& key) const { return kv_.count(key) != 0; }

    std::string str(const std::string& key, const std::string& fallback) const;
    double num(const std::string& key, double fallback) const;
    std::int64_t integer(const std::string& key, std::int64_t fallback) const;
    bool flag(const std::string& key, bool fallback) const;

    // "k=v" pairs, e.g. from command-line overrides.
    void apply_overrides(const std::vector<std::string>& overrides);

    const std::map<std::string, std::string>& entries() const { return kv_; }

private:
    std::map<std::string, std::string> kv_;
};

// Fully resolved run configuration. Defaults depend on the environment and
// backbone; the preset is expanded into concrete values before the run and
// the expansion is recorded in `resolved`.
struct RunConfig {
    std::string env_name;
    std::string dataset_path;
    std::string out_dir;
    std::string preset;
    std::uint64_t seed = 1;

    AgentConfig agent;
    ExplorationConfig explore;
    ExploitationConfig exploit;
    std::string estimator;  // "vae" | "q-std"

    double oorb_p = 0.1;
    std::size_t oorb_online_capacity = 5000;
    std::size_t oorb_offline_capacity = 200000;
    bool oorb_preload = true;

    std::size_t pretrain_steps = 50000;
    std::size_t finetune_steps = 20000;
    std::size_t eval_interval = 1000;
    std::size_t eval_episodes = 10;

    double vae_lr = 1e-3;
    double vae_kl_weight = 0.5;
    std::size_t vae_hidden = 64;
    std::size_t vae_latent_samples = 1;
    // Standalone train_vae() budget; runs themselves tie VAE updates 1:1 to
    // agent gradient steps.
    std::size_t vae_grad_steps = 20000;

    bool log_wallclock = true;

    FlatConfig resolved;  // every effective key, for the config echo

    void validate() const;
};

// Preset names: sung, offline-ft, online-ft, plus the ablation variants
// no-opt-explore, greedy-q, greedy-u, no-adp-exploit, q-std, random-ood,
// no-offline-data.
const std::vector<std::string>& ablation_names();
bool is_known_preset(const std::string& name);

RunConfig resolve_run_config(FlatConfig base);

void write_resolved_config(const RunConfig& cfg, const std::string& path);

}  // namespace sung
