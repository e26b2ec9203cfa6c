#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sung/checkpoint.hpp"
#include "sung/runner.hpp"

namespace {

sung::FlatConfig build_config(const std::string& config_path, const std::vector<std::string>& overrides) {
    sung::FlatConfig cfg = config_path.empty() ? sung::FlatConfig{} : sung::FlatConfig::from_file(config_path);
    cfg.apply_overrides(overrides);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sung: offline-to-online RL laboratory"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "Generate an offline dataset");
    std::string gen_env = "pointmass-dense", gen_tier = "medium", gen_out = "dataset.ds";
    std::size_t gen_size = 10000;
    std::uint64_t gen_seed = 1;
    gen->add_option("--env", gen_env, "Environment name");
    gen->add_option("--tier", gen_tier, "random | medium | medium-replay | stitch");
    gen->add_option("--size", gen_size, "Number of transitions");
    gen->add_option("--seed", gen_seed, "Generation seed");
    gen->add_option("--out", gen_out, "Output path");

    // pretrain
    auto* pre = app.add_subcommand("pretrain", "Offline pretraining");
    std::string pre_config;
    std::vector<std::string> pre_set;
    pre->add_option("--config", pre_config, "Config file")->required();
    pre->add_option("--set", pre_set, "key=value overrides");

    // finetune
    auto* fin = app.add_subcommand("finetune", "Online finetuning");
    std::string fin_config, fin_agent, fin_vae;
    std::vector<std::string> fin_set;
    fin->add_option("--config", fin_config, "Config file")->required();
    fin->add_option("--agent-ckpt", fin_agent, "Pretrained agent checkpoint")->required();
    fin->add_option("--vae-ckpt", fin_vae, "Pretrained VAE checkpoint")->required();
    fin->add_option("--set", fin_set, "key=value overrides");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "Evaluate a checkpointed policy");
    std::string ev_config, ev_agent;
    std::size_t ev_episodes = 10;
    std::uint64_t ev_seed = 1;
    std::vector<std::string> ev_set;
    ev->add_option("--config", ev_config, "Config file")->required();
    ev->add_option("--agent-ckpt", ev_agent, "Agent checkpoint")->required();
    ev->add_option("--episodes", ev_episodes, "Evaluation episodes");
    ev->add_option("--seed", ev_seed, "Evaluation seed");
    ev->add_option("--set", ev_set, "key=value overrides");

    // ablate
    auto* ab = app.add_subcommand("ablate", "Run an ablation suite");
    std::string ab_config, ab_suite = "full", ab_out;
    std::size_t ab_jobs = 1;
    std::vector<std::string> ab_set;
    ab->add_option("--config", ab_config, "Config file")->required();
    ab->add_option("--suite", ab_suite, "'full' or comma-separated ablation names");
    ab->add_option("--out", ab_out, "Comparison CSV path (default <out>/ablations.csv)");
    ab->add_option("--jobs", ab_jobs, "Parallel finetune runs");
    ab->add_option("--set", ab_set, "key=value overrides");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            auto env = sung::make_env(gen_env);
            auto ds = sung::generate_dataset(*env, sung::tier_from_string(gen_tier), gen_size, gen_seed);
            sung::save_dataset(ds, gen_out);
            std::printf("wrote %zu %s transitions for %s to %s\n", ds.size(),
                        sung::tier_to_string(ds.tier).c_str(), ds.env_name.c_str(), gen_out.c_str());
        } else if (*pre) {
            auto cfg = sung::resolve_run_config(build_config(pre_config, pre_set));
            auto art = sung::pretrain(cfg);
            std::printf("pretrain done: %zu gradient steps, checkpoints %s / %s\n", art.grad_steps,
                        art.agent_ckpt.c_str(), art.vae_ckpt.c_str());
        } else if (*fin) {
            auto cfg = sung::resolve_run_config(build_config(fin_config, fin_set));
            auto art = sung::finetune(cfg, fin_agent, fin_vae);
            std::printf("finetune done: final score %.4f (normalized %.4f), metrics %s\n", art.final_score,
                        art.final_score_norm, art.metrics_csv.c_str());
        } else if (*ev) {
            auto cfg = sung::resolve_run_config(build_config(ev_config, ev_set));
            auto ds = sung::load_dataset(cfg.dataset_path);
            auto env = sung::make_env(cfg.env_name);
            sung::Agent agent(cfg.agent, env->spec(), sung::Rng::derive(cfg.seed, "agent.init"));
            agent.import_params(sung::load_checkpoint(ev_agent));
            auto res = sung::evaluate(agent, *env, ds.stats, ev_episodes, ev_seed);
            std::printf("return over %zu episodes: mean %.4f, std %.4f (normalized %.4f)\n", ev_episodes,
                        res.mean, res.stddev, sung::normalized_score(cfg.env_name, res.mean));
        } else if (*ab) {
            auto base = build_config(ab_config, ab_set);
            auto probe = sung::resolve_run_config(base);
            const std::string out_csv = ab_out.empty() ? probe.out_dir + "/ablations.csv" : ab_out;
            auto path = sung::run_ablation_suite(base, ab_suite, out_csv, ab_jobs);
            std::printf("ablation suite written to %s\n", path.c_str());
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
