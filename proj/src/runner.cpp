#include "sung/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include "sung/checkpoint.hpp"

namespace sung {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_seconds(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string csv_row(const std::string& phase, std::size_t step, double eval_mean, double eval_std,
                    double loss_l, double loss_r, double ood_fraction, double mean_u, double seconds) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s,%zu,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.3f\n", phase.c_str(), step,
                  eval_mean, eval_std, loss_l, loss_r, ood_fraction, mean_u, seconds);
    return buf;
}

constexpr const char* kCsvHeader =
    "phase,step,eval_return_mean,eval_return_std,loss_L,loss_R,ood_fraction,mean_uncertainty,seconds\n";

Batch sample_dataset_batch(const OfflineDataset& ds, std::size_t batch_size, Rng& rng) {
    std::vector<Transition> sampled(batch_size);
    for (auto& t : sampled) t = ds.transitions[rng.integer(ds.size())];
    return make_batch(sampled, ds.stats);
}

OfflineDataset load_and_validate_dataset(const RunConfig& cfg) {
    check(!cfg.dataset_path.empty(), "run: config has no dataset path");
    check(std::filesystem::exists(cfg.dataset_path), "run: missing dataset '" + cfg.dataset_path + "'");
    OfflineDataset ds = load_dataset(cfg.dataset_path);
    check(ds.env_name == cfg.env_name, "run: dataset was generated for '" + ds.env_name +
                                           "', config says '" + cfg.env_name + "'");
    check(ds.size() >= kMinDatasetSize,
          "run: dataset size >= " + std::to_string(kMinDatasetSize) + " violated");
    return ds;
}

ParamTree flatten_vae(const VaeModel& vae) {
    ParamTree flat;
    for (const auto& [name, p] : vae.enc) flat.add(name, p.value);
    for (const auto& [name, p] : vae.dec) flat.add(name, p.value);
    return flat;
}

void load_vae(VaeModel& vae, const std::string& path) {
    ParamTree flat = load_checkpoint(path);
    check(flat.size() == vae.enc.size() + vae.dec.size(),
          "vae checkpoint: parameter count mismatch (different architecture?)");
    auto absorb = [&flat](ParamTree& tree) {
        for (auto& [name, p] : tree) {
            check(flat.has(name), "vae checkpoint: missing parameter '" + name + "'");
            const Param& src = flat.at(name);
            check(src.value.same_shape(p.value), "vae checkpoint: shape mismatch for '" + name + "'");
            p.value = src.value;
        }
    };
    absorb(vae.enc);
    absorb(vae.dec);
}

double mean_of(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

// Mean over the last up-to-3 evaluation returns, the reported final score.
double final_score_from(const std::vector<double>& eval_means) {
    check(!eval_means.empty(), "run: no evaluation rows; finetune_steps < eval_interval?");
    const std::size_t n = std::min<std::size_t>(3, eval_means.size());
    double acc = 0.0;
    for (std::size_t i = eval_means.size() - n; i < eval_means.size(); ++i) acc += eval_means[i];
    return acc / static_cast<double>(n);
}

struct IntervalStats {
    double loss_l = 0.0, loss_r = 0.0, ood = 0.0, mean_u = 0.0;
    std::size_t count = 0, u_count = 0;

    void add(double l, double r, double o) {
        loss_l += l;
        loss_r += r;
        ood += o;
        ++count;
    }
    void add_u(double u) {
        mean_u += u;
        ++u_count;
    }
    void reset() { *this = IntervalStats{}; }
    double avg_l() const { return count ? loss_l / count : 0.0; }
    double avg_r() const { return count ? loss_r / count : 0.0; }
    double avg_ood() const { return count ? ood / count : 0.0; }
    double avg_u() const { return u_count ? mean_u / u_count : 0.0; }
};

}  // namespace

EvalResult evaluate_with_seeds(const Agent& agent, Env& env, const NormStats& stats,
                               const std::vector<std::uint64_t>& episode_seeds) {
    check(!episode_seeds.empty(), "evaluate: needs at least one episode");
    std::vector<double> returns;
    returns.reserve(episode_seeds.size());
    for (auto ep_seed : episode_seeds) {
        auto obs = env.reset(ep_seed);
        double ep = 0.0;
        while (true) {
            auto a = agent.act(normalize_state(stats, obs));
            StepResult res = env.step(a);
            ep += res.reward;
            if (res.done()) break;
            obs = res.obs;
        }
        returns.push_back(ep);
    }
    EvalResult out;
    out.mean = mean_of(returns);
    double var = 0.0;
    for (double r : returns) var += (r - out.mean) * (r - out.mean);
    out.stddev = std::sqrt(var / static_cast<double>(returns.size()));
    return out;
}

EvalResult evaluate(const Agent& agent, Env& env, const NormStats& stats, std::size_t episodes,
                    std::uint64_t seed) {
    std::vector<std::uint64_t> seeds(episodes);
    for (std::size_t i = 0; i < episodes; ++i) seeds[i] = Rng::derive(seed, i);
    return evaluate_with_seeds(agent, env, stats, seeds);
}

RunArtifacts pretrain(const RunConfig& cfg) {
    const auto start = Clock::now();
    std::filesystem::create_directories(cfg.out_dir);
    write_resolved_config(cfg, cfg.out_dir + "/config_resolved.txt");

    OfflineDataset ds = load_and_validate_dataset(cfg);
    auto env = make_env(cfg.env_name);
    Agent agent(cfg.agent, env->spec(), Rng::derive(cfg.seed, "agent.init"));
    VaeModel vae = make_vae(env->spec().state_dim, env->spec().action_dim, cfg.vae_hidden,
                            cfg.vae_kl_weight, Rng::derive(cfg.seed, "vae.init"));
    Adam vae_enc_opt(vae.enc, AdamConfig{cfg.vae_lr});
    Adam vae_dec_opt(vae.dec, AdamConfig{cfg.vae_lr});

    Rng batch_rng(Rng::derive(cfg.seed, "pretrain.batch"));
    Rng train_rng(Rng::derive(cfg.seed, "pretrain.train"));
    Rng vae_rng(Rng::derive(cfg.seed, "pretrain.vae"));
    Rng metrics_rng(Rng::derive(cfg.seed, "pretrain.metrics"));
    const std::uint64_t eval_seed = Rng::derive(cfg.seed, "pretrain.eval");

    std::ofstream csv(cfg.out_dir + "/metrics_pretrain.csv");
    check(csv.good(), "run: cannot write metrics CSV");
    csv << kCsvHeader;

    UncertaintyEstimator estimator = cfg.estimator == "q-std"
                                         ? UncertaintyEstimator::from_q_std(agent.critic())
                                         : UncertaintyEstimator::from_vae(vae, cfg.vae_latent_samples);

    IntervalStats stats;
    std::vector<double> eval_means;
    RunArtifacts out;
    for (std::size_t step = 1; step <= cfg.pretrain_steps; ++step) {
        Batch batch = sample_dataset_batch(ds, cfg.agent.batch_size, batch_rng);
        auto step_stats = agent.train_step(batch, nullptr, 1.0, train_rng);
        train_vae_step(vae, vae_enc_opt, vae_dec_opt, batch.s, batch.a, vae_rng);
        stats.add(step_stats.loss_standard, step_stats.loss_reg, 1.0);
        ++out.grad_steps;

        if (step % cfg.eval_interval == 0) {
            auto probe = env->clone();
            EvalResult ev = evaluate(agent, *probe, ds.stats, cfg.eval_episodes, Rng::derive(eval_seed, step));
            eval_means.push_back(ev.mean);
            stats.add_u(mean_of(estimator.score(batch.s, batch.a, metrics_rng)));
            const double secs = cfg.log_wallclock ? elapsed_seconds(start) : 0.0;
            csv << csv_row("pretrain", step, ev.mean, ev.stddev, stats.avg_l(), stats.avg_r(),
                           stats.avg_ood(), stats.avg_u(), secs);
            stats.reset();
        }
    }

    out.metrics_csv = cfg.out_dir + "/metrics_pretrain.csv";
    out.agent_ckpt = cfg.out_dir + "/agent.ckpt";
    out.vae_ckpt = cfg.out_dir + "/vae.ckpt";
    save_checkpoint(agent.export_params(), out.agent_ckpt);
    save_checkpoint(flatten_vae(vae), out.vae_ckpt);
    if (!eval_means.empty()) {
        out.final_score = final_score_from(eval_means);
        out.final_score_norm = normalized_score(cfg.env_name, out.final_score);
    }
    return out;
}

RunArtifacts finetune(const RunConfig& cfg, const std::string& agent_ckpt, const std::string& vae_ckpt) {
    const auto start = Clock::now();
    std::filesystem::create_directories(cfg.out_dir);
    write_resolved_config(cfg, cfg.out_dir + "/config_resolved.txt");

    OfflineDataset ds = load_and_validate_dataset(cfg);
    auto env = make_env(cfg.env_name);
    Agent agent(cfg.agent, env->spec(), Rng::derive(cfg.seed, "agent.init"));
    agent.import_params(load_checkpoint(agent_ckpt));
    VaeModel vae = make_vae(env->spec().state_dim, env->spec().action_dim, cfg.vae_hidden,
                            cfg.vae_kl_weight, Rng::derive(cfg.seed, "vae.init"));
    load_vae(vae, vae_ckpt);
    Adam vae_enc_opt(vae.enc, AdamConfig{cfg.vae_lr});
    Adam vae_dec_opt(vae.dec, AdamConfig{cfg.vae_lr});

    UncertaintyEstimator estimator = cfg.estimator == "q-std"
                                         ? UncertaintyEstimator::from_q_std(agent.critic())
                                         : UncertaintyEstimator::from_vae(vae, cfg.vae_latent_samples);

    Oorb oorb(cfg.oorb_online_capacity, cfg.oorb_offline_capacity, cfg.oorb_p);
    if (cfg.oorb_preload) oorb.preload(ds);

    Rng explore_rng(Rng::derive(cfg.seed, "finetune.explore"));
    Rng batch_rng(Rng::derive(cfg.seed, "finetune.batch"));
    Rng train_rng(Rng::derive(cfg.seed, "finetune.train"));
    Rng vae_rng(Rng::derive(cfg.seed, "finetune.vae"));
    Rng ood_rng(Rng::derive(cfg.seed, "finetune.ood"));
    const std::uint64_t eval_seed = Rng::derive(cfg.seed, "finetune.eval");
    const std::uint64_t episode_seed = Rng::derive(cfg.seed, "finetune.episode");

    std::ofstream csv(cfg.out_dir + "/metrics_finetune.csv");
    check(csv.good(), "run: cannot write metrics CSV");
    csv << kCsvHeader;

    IntervalStats stats;
    std::vector<double> eval_means;
    RunArtifacts out;
    std::uint64_t episode = 0;
    auto obs = env->reset(Rng::derive(episode_seed, episode));
    for (std::size_t step = 1; step <= cfg.finetune_steps; ++step) {
        // Behavior action.
        const auto s_norm = normalize_state(ds.stats, obs);
        std::vector<double> action;
        if (cfg.explore.optimistic) {
            CandidateSet cands = generate_candidates(agent.actor(), agent.critic(), estimator, s_norm,
                                                     cfg.explore, explore_rng);
            action = select_behavior_action(cands, cfg.explore, explore_rng);
        } else {
            action = agent.act_default_explore(s_norm, cfg.explore.delta, explore_rng);
        }
        StepResult res = env->step(action);
        oorb.push(Transition{obs, action, res.reward, res.obs, res.terminal});
        obs = res.done() ? env->reset(Rng::derive(episode_seed, ++episode)) : res.obs;
        ++out.env_steps;

        // Adaptive exploitation on one OORB batch.
        Batch batch = make_batch(oorb.sample(cfg.agent.batch_size, batch_rng), ds.stats);
        Tensor policy_actions = select_action(agent.actor(), batch.s);
        std::vector<double> u_scores;
        std::vector<double> mask = identify_ood(estimator, batch.s, policy_actions, cfg.exploit, ood_rng,
                                                &u_scores);
        const double lambda_factor =
            lambda_schedule(1.0, step, cfg.finetune_steps, cfg.exploit.lambda_end_fraction);
        auto step_stats = agent.train_step(batch, &mask, lambda_factor, train_rng);
        train_vae_step(vae, vae_enc_opt, vae_dec_opt, batch.s, batch.a, vae_rng);
        ++out.grad_steps;

        stats.add(step_stats.loss_standard, step_stats.loss_reg, mean_of(mask));
        stats.add_u(mean_of(u_scores));

        if (step % cfg.eval_interval == 0) {
            auto probe = env->clone();
            EvalResult ev = evaluate(agent, *probe, ds.stats, cfg.eval_episodes, Rng::derive(eval_seed, step));
            eval_means.push_back(ev.mean);
            const double secs = cfg.log_wallclock ? elapsed_seconds(start) : 0.0;
            csv << csv_row("finetune", step, ev.mean, ev.stddev, stats.avg_l(), stats.avg_r(),
                           stats.avg_ood(), stats.avg_u(), secs);
            stats.reset();
        }
    }

    out.metrics_csv = cfg.out_dir + "/metrics_finetune.csv";
    out.agent_ckpt = cfg.out_dir + "/agent_final.ckpt";
    out.vae_ckpt = cfg.out_dir + "/vae_final.ckpt";
    save_checkpoint(agent.export_params(), out.agent_ckpt);
    save_checkpoint(flatten_vae(vae), out.vae_ckpt);
    out.final_score = final_score_from(eval_means);
    out.final_score_norm = normalized_score(cfg.env_name, out.final_score);

    std::ofstream summary(cfg.out_dir + "/summary.txt");
    summary << "final_score_raw = " << out.final_score << "\n"
            << "final_score_normalized = " << out.final_score_norm << "\n"
            << "env_steps = " << out.env_steps << "\n"
            << "grad_steps = " << out.grad_steps << "\n";
    return out;
}

std::vector<std::string> parse_suite(const std::string& suite) {
    if (suite == "full") return ablation_names();
    std::vector<std::string> names;
    std::string cur;
    for (char c : suite + ",") {
        if (c == ',') {
            if (!cur.empty()) names.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    const auto& known = ablation_names();
    for (const auto& n : names)
        check(std::find(known.begin(), known.end(), n) != known.end(), "unknown ablation name '" + n + "'");
    check(!names.empty(), "ablation suite: empty name list");
    return names;
}

std::string run_ablation_suite(const FlatConfig& base, const std::string& suite, const std::string& out_csv,
                               std::size_t jobs) {
    const std::vector<std::string> names = parse_suite(suite);
    RunConfig probe = resolve_run_config(base);
    std::vector<std::uint64_t> seeds;
    {
        FlatConfig b = base;
        std::string spec = b.str("ablate.seeds", "1,2,3");
        std::string cur;
        for (char c : spec + ",") {
            if (c == ',') {
                if (!cur.empty()) seeds.push_back(std::stoull(cur));
                cur.clear();
            } else {
                cur += c;
            }
        }
    }
    check(!seeds.empty(), "ablation suite: no seeds");

    std::vector<AblationRow> rows(names.size() * seeds.size());
    for (std::size_t si = 0; si < seeds.size(); ++si) {
        // One shared pretrain per seed: the variants differ only in
        // finetuning behavior.
        FlatConfig pre = base;
        pre.set("seed", std::to_string(seeds[si]));
        pre.set("preset", "sung");
        pre.set("out", probe.out_dir + "/seed" + std::to_string(seeds[si]) + "/pretrain");
        RunConfig pre_cfg = resolve_run_config(pre);
        RunArtifacts ck = pretrain(pre_cfg);

        std::size_t next = 0;
        std::mutex mtx;
        auto worker = [&]() {
            while (true) {
                std::size_t i;
                {
                    std::lock_guard<std::mutex> lock(mtx);
                    if (next >= names.size()) return;
                    i = next++;
                }
                FlatConfig fc = base;
                fc.set("seed", std::to_string(seeds[si]));
                fc.set("preset", names[i]);
                fc.set("out", probe.out_dir + "/seed" + std::to_string(seeds[si]) + "/" + names[i]);
                RunConfig cfg = resolve_run_config(fc);
                RunArtifacts art = finetune(cfg, ck.agent_ckpt, ck.vae_ckpt);
                rows[i * seeds.size() + si] =
                    AblationRow{names[i], seeds[si], art.final_score, art.final_score_norm};
            }
        };
        std::vector<std::thread> pool;
        for (std::size_t j = 0; j < std::max<std::size_t>(1, jobs); ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::ofstream csv(out_csv);
    check(csv.good(), "ablation suite: cannot write '" + out_csv + "'");
    csv << "ablation,seed,final_score,final_score_normalized\n";
    for (const auto& row : rows) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%s,%llu,%.6f,%.6f\n", row.name.c_str(),
                      static_cast<unsigned long long>(row.seed), row.final_score, row.final_score_norm);
        csv << buf;
    }
    return out_csv;
}

}  // namespace sung
