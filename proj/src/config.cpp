#include "sung/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace sung {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

FlatConfig FlatConfig::from_file(const std::string& path) {
    std::ifstream is(path);
    check(is.good(), "config: cannot open '" + path + "'");
    std::stringstream ss;
    ss << is.rdbuf();
    return from_string(ss.str());
}

FlatConfig FlatConfig::from_string(const std::string& text) {
    FlatConfig cfg;
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        check(eq != std::string::npos, "config: line " + std::to_string(lineno) + " is not 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        check(!key.empty(), "config: empty key on line " + std::to_string(lineno));
        cfg.kv_[key] = value;
    }
    return cfg;
}

std::string FlatConfig::str(const std::string& key, const std::string& fallback) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
}

double FlatConfig::num(const std::string& key, double fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
        std::size_t pos = 0;
        const double v = std::stod(it->second, &pos);
        check(pos == it->second.size(), "");
        return v;
    } catch (...) {
        throw std::runtime_error("config: '" + key + "' is not a number: '" + it->second + "'");
    }
}

std::int64_t FlatConfig::integer(const std::string& key, std::int64_t fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
        std::size_t pos = 0;
        const double v = std::stod(it->second, &pos);
        check(pos == it->second.size() && v == static_cast<double>(static_cast<std::int64_t>(v)), "");
        return static_cast<std::int64_t>(v);
    } catch (...) {
        throw std::runtime_error("config: '" + key + "' is not an integer: '" + it->second + "'");
    }
}

bool FlatConfig::flag(const std::string& key, bool fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw std::runtime_error("config: '" + key + "' is not a boolean: '" + it->second + "'");
}

void FlatConfig::apply_overrides(const std::vector<std::string>& overrides) {
    for (const auto& ov : overrides) {
        const auto eq = ov.find('=');
        check(eq != std::string::npos, "override '" + ov + "' is not key=value");
        kv_[trim(ov.substr(0, eq))] = trim(ov.substr(eq + 1));
    }
}

const std::vector<std::string>& ablation_names() {
    static const std::vector<std::string> names = {
        "no-opt-explore", "greedy-q", "greedy-u", "no-adp-exploit",
        "q-std", "random-ood", "no-offline-data",
    };
    return names;
}

bool is_known_preset(const std::string& name) {
    if (name == "sung" || name == "offline-ft" || name == "online-ft") return true;
    const auto& abl = ablation_names();
    return std::find(abl.begin(), abl.end(), name) != abl.end();
}

namespace {

// Preset deltas override any user-provided values for the keys they pin;
// the resolved config echo is the record of what actually ran.
void apply_preset(FlatConfig& cfg, const std::string& preset) {
    if (preset == "sung") return;
    if (preset == "offline-ft") {
        // The offline objective everywhere: regularize every sample, keep
        // the backbone's own exploration.
        cfg.set("exploit.p", "100");
        cfg.set("explore.optimistic", "false");
    } else if (preset == "online-ft") {
        // The online objective everywhere: regularizer never applied.
        cfg.set("exploit.p", "0");
        cfg.set("explore.optimistic", "false");
    } else if (preset == "no-opt-explore") {
        cfg.set("explore.optimistic", "false");
    } else if (preset == "greedy-q") {
        cfg.set("explore.order", "qu");
        cfg.set("explore.k", "1");
    } else if (preset == "greedy-u") {
        cfg.set("explore.order", "uq");
        cfg.set("explore.k", "1");
    } else if (preset == "no-adp-exploit") {
        cfg.set("exploit.p", "0");
    } else if (preset == "q-std") {
        cfg.set("estimator", "q-std");
    } else if (preset == "random-ood") {
        cfg.set("exploit.mode", "uniform");
    } else if (preset == "no-offline-data") {
        cfg.set("oorb.preload", "false");
    } else {
        throw std::runtime_error("unknown preset '" + preset + "'");
    }
}

}  // namespace

RunConfig resolve_run_config(FlatConfig base) {
    RunConfig rc;
    rc.preset = base.str("preset", "sung");
    check(is_known_preset(rc.preset), "unknown preset '" + rc.preset + "'");
    apply_preset(base, rc.preset);

    rc.env_name = base.str("env", "pointmass-dense");
    const bool sparse = rc.env_name == "maze-sparse";
    rc.dataset_path = base.str("dataset", "");
    rc.out_dir = base.str("out", "out");
    rc.seed = static_cast<std::uint64_t>(base.integer("seed", 1));

    rc.agent.backbone = backbone_from_string(base.str("agent.backbone", "td3"));
    const std::string default_reg = rc.agent.backbone == Backbone::td3 ? "bc" : "cql";
    rc.agent.regularizer = regularizer_from_string(base.str("agent.regularizer", default_reg));
    const bool is_bc = rc.agent.regularizer == Regularizer::bc;
    rc.agent.gamma = base.num("agent.gamma", 0.99);
    rc.agent.tau = base.num("agent.tau", 5e-3);
    rc.agent.actor_lr = base.num("agent.actor_lr", rc.agent.backbone == Backbone::td3 ? 3e-4 : 1e-4);
    rc.agent.critic_lr = base.num("agent.critic_lr", 3e-4);
    rc.agent.batch_size = static_cast<std::size_t>(base.integer("agent.batch", 256));
    rc.agent.hidden = static_cast<std::size_t>(base.integer("agent.hidden", 32));
    rc.agent.layers = static_cast<std::size_t>(base.integer("agent.layers", 2));
    rc.agent.lambda = base.num("agent.lambda", is_bc ? 1.0 : 5.0);
    rc.agent.bc_normalize = base.flag("agent.bc_normalize", true);
    rc.agent.bc_alpha = base.num("agent.bc_alpha", 2.5);
    rc.agent.policy_noise = base.num("agent.policy_noise", 0.2);
    rc.agent.noise_clip = base.num("agent.noise_clip", 0.5);
    rc.agent.policy_delay = static_cast<int>(base.integer("agent.policy_delay", 2));
    rc.agent.cql_samples = static_cast<int>(base.integer("agent.cql_samples", 10));
    rc.agent.sac_entropy = base.num("agent.sac_entropy", 0.2);
    rc.agent.sac_auto_alpha = base.flag("agent.sac_auto_alpha", false);

    auto [def_order, def_k] = rc.agent.regularizer == Regularizer::none
                                  ? std::pair<RankOrder, std::size_t>{RankOrder::q_first, 10}
                                  : default_order_for(rc.agent.backbone, rc.agent.regularizer);
    rc.explore.n = static_cast<std::size_t>(base.integer("explore.n", 100));
    rc.explore.k = static_cast<std::size_t>(base.integer("explore.k", static_cast<std::int64_t>(def_k)));
    rc.explore.order = rank_order_from_string(base.str("explore.order", rank_order_to_string(def_order)));
    rc.explore.alpha = base.num("explore.alpha", 1.0);
    rc.explore.delta = base.num("explore.delta", 0.2);
    rc.explore.optimistic = base.flag("explore.optimistic", true);

    const double def_p = is_bc ? (sparse ? 99.0 : 5.0) : (sparse ? 90.0 : 10.0);
    rc.exploit.p = base.num("exploit.p", def_p);
    rc.exploit.mode = ood_mode_from_string(base.str("exploit.mode", "top"));
    rc.exploit.lambda_end_fraction = base.num("exploit.lambda_end_fraction", 1.0);
    rc.exploit.alpha = base.num("exploit.alpha", 1.0);

    rc.estimator = base.str("estimator", "vae");
    check(rc.estimator == "vae" || rc.estimator == "q-std", "estimator must be vae or q-std");

    const double def_oorb_p = sparse ? (is_bc ? 0.2 : 0.7) : 0.1;
    rc.oorb_p = base.num("oorb.p", def_oorb_p);
    rc.oorb_online_capacity = static_cast<std::size_t>(base.integer("oorb.online_capacity", 5000));
    rc.oorb_offline_capacity = static_cast<std::size_t>(base.integer("oorb.offline_capacity", 200000));
    rc.oorb_preload = base.flag("oorb.preload", true);

    rc.pretrain_steps = static_cast<std::size_t>(base.integer("run.pretrain_steps", 50000));
    rc.finetune_steps = static_cast<std::size_t>(base.integer("run.finetune_steps", 20000));
    rc.eval_interval = static_cast<std::size_t>(base.integer("run.eval_interval", 1000));
    rc.eval_episodes = static_cast<std::size_t>(base.integer("run.eval_episodes", 10));

    rc.vae_lr = base.num("vae.lr", 1e-3);
    rc.vae_kl_weight = base.num("vae.kl_weight", 0.5);
    rc.vae_hidden = static_cast<std::size_t>(base.integer("vae.hidden", 64));
    rc.vae_latent_samples = static_cast<std::size_t>(base.integer("vae.latent_samples", 1));
    rc.vae_grad_steps = static_cast<std::size_t>(base.integer("vae.grad_steps", 20000));

    rc.log_wallclock = base.flag("log.wallclock", true);

    rc.validate();

    // Echo of every effective value.
    FlatConfig& out = rc.resolved;
    out.set("preset", rc.preset);
    out.set("env", rc.env_name);
    out.set("dataset", rc.dataset_path);
    out.set("out", rc.out_dir);
    out.set("seed", std::to_string(rc.seed));
    out.set("agent.backbone", rc.agent.backbone == Backbone::td3 ? "td3" : "sac");
    out.set("agent.regularizer", rc.agent.regularizer == Regularizer::none
                                     ? "none"
                                     : (rc.agent.regularizer == Regularizer::bc ? "bc" : "cql"));
    auto fmt = [](double v) {
        std::ostringstream ss;
        ss << v;
        return ss.str();
    };
    out.set("agent.gamma", fmt(rc.agent.gamma));
    out.set("agent.tau", fmt(rc.agent.tau));
    out.set("agent.actor_lr", fmt(rc.agent.actor_lr));
    out.set("agent.critic_lr", fmt(rc.agent.critic_lr));
    out.set("agent.batch", std::to_string(rc.agent.batch_size));
    out.set("agent.hidden", std::to_string(rc.agent.hidden));
    out.set("agent.layers", std::to_string(rc.agent.layers));
    out.set("agent.lambda", fmt(rc.agent.lambda));
    out.set("agent.bc_normalize", rc.agent.bc_normalize ? "true" : "false");
    out.set("agent.bc_alpha", fmt(rc.agent.bc_alpha));
    out.set("agent.policy_noise", fmt(rc.agent.policy_noise));
    out.set("agent.noise_clip", fmt(rc.agent.noise_clip));
    out.set("agent.policy_delay", std::to_string(rc.agent.policy_delay));
    out.set("agent.cql_samples", std::to_string(rc.agent.cql_samples));
    out.set("agent.sac_entropy", fmt(rc.agent.sac_entropy));
    out.set("agent.sac_auto_alpha", rc.agent.sac_auto_alpha ? "true" : "false");
    out.set("explore.n", std::to_string(rc.explore.n));
    out.set("explore.k", std::to_string(rc.explore.k));
    out.set("explore.order", rank_order_to_string(rc.explore.order));
    out.set("explore.alpha", fmt(rc.explore.alpha));
    out.set("explore.delta", fmt(rc.explore.delta));
    out.set("explore.optimistic", rc.explore.optimistic ? "true" : "false");
    out.set("exploit.p", fmt(rc.exploit.p));
    out.set("exploit.mode", ood_mode_to_string(rc.exploit.mode));
    out.set("exploit.lambda_end_fraction", fmt(rc.exploit.lambda_end_fraction));
    out.set("exploit.alpha", fmt(rc.exploit.alpha));
    out.set("estimator", rc.estimator);
    out.set("oorb.p", fmt(rc.oorb_p));
    out.set("oorb.online_capacity", std::to_string(rc.oorb_online_capacity));
    out.set("oorb.offline_capacity", std::to_string(rc.oorb_offline_capacity));
    out.set("oorb.preload", rc.oorb_preload ? "true" : "false");
    out.set("run.pretrain_steps", std::to_string(rc.pretrain_steps));
    out.set("run.finetune_steps", std::to_string(rc.finetune_steps));
    out.set("run.eval_interval", std::to_string(rc.eval_interval));
    out.set("run.eval_episodes", std::to_string(rc.eval_episodes));
    out.set("vae.lr", fmt(rc.vae_lr));
    out.set("vae.kl_weight", fmt(rc.vae_kl_weight));
    out.set("vae.hidden", std::to_string(rc.vae_hidden));
    out.set("vae.latent_samples", std::to_string(rc.vae_latent_samples));
    out.set("vae.grad_steps", std::to_string(rc.vae_grad_steps));
    out.set("log.wallclock", rc.log_wallclock ? "true" : "false");
    return rc;
}

void RunConfig::validate() const {
    agent.validate();
    explore.validate();
    exploit.validate();
    check(pretrain_steps >= 1 && finetune_steps >= 1, "run config: step counts must be positive");
    check(eval_interval >= 1 && eval_episodes >= 1, "run config: eval settings must be positive");
    check(oorb_p >= 0.0 && oorb_p <= 1.0, "run config: oorb.p out of [0,1]");
}

void write_resolved_config(const RunConfig& cfg, const std::string& path) {
    std::ofstream os(path);
    check(os.good(), "config: cannot write '" + path + "'");
    os << "# resolved configuration (preset '" << cfg.preset << "' expanded)\n";
    for (const auto& [k, v] : cfg.resolved.entries()) os << k << " = " << v << "\n";
}

}  // namespace sung
