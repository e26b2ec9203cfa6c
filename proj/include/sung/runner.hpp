#pragma once
#include <string>
#include <vector>

#include "sung/config.hpp"
#include "sung/oorb.hpp"
#include "sung/vae.hpp"

namespace sung {

struct EvalResult {
    double mean = 0.0;
    double stddev = 0.0;
};

// Runs full episodes with exploit-mode actions. Episode i uses the seed
// derived from (seed, i); states are normalized with `stats` before the
// actor sees them.
EvalResult evaluate(const Agent& agent, Env& env, const NormStats& stats, std::size_t episodes,
                    std::uint64_t seed);
EvalResult evaluate_with_seeds(const Agent& agent, Env& env, const NormStats& stats,
                               const std::vector<std::uint64_t>& episode_seeds);

struct RunArtifacts {
    std::string metrics_csv;
    std::string agent_ckpt;
    std::string vae_ckpt;
    double final_score = 0.0;       // mean eval return over the last 3 rows
    double final_score_norm = 0.0;  // against the per-env reference returns
    std::size_t env_steps = 0;
    std::size_t grad_steps = 0;
};

// Offline pretraining: T1 gradient steps of the full offline objective and
// the VAE, one minibatch driving both. Writes agent.ckpt, vae.ckpt,
// metrics_pretrain.csv, and the resolved config into cfg.out_dir.
RunArtifacts pretrain(const RunConfig& cfg);

// Online finetuning per the adaptive scheme: per environment step one
// behavior action (optimistic bi-level selection or backbone default), one
// gated agent gradient step, and one VAE step on the same OORB batch.
RunArtifacts finetune(const RunConfig& cfg, const std::string& agent_ckpt, const std::string& vae_ckpt);

struct AblationRow {
    std::string name;
    std::uint64_t seed = 0;
    double final_score = 0.0;
    double final_score_norm = 0.0;
};

// Runs every named ablation over the given seeds (one shared pretrain per
// seed, since the variants differ only in finetuning) and writes one
// comparison CSV. `suite` is "full" or a comma-separated list of names.
std::string run_ablation_suite(const FlatConfig& base, const std::string& suite, const std::string& out_csv,
                               std::size_t jobs = 1);

std::vector<std::string> parse_suite(const std::string& suite);

}  // namespace sung
