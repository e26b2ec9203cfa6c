#pragma once
#include <optional>
#include <span>
#include <string>

#include "sung/adam.hpp"
#include "sung/dataset.hpp"
#include "sung/env.hpp"
#include "sung/mlp.hpp"

namespace sung {

enum class Backbone { td3, sac };
enum class Regularizer { none, bc, cql };

Backbone backbone_from_string(const std::string& s);
Regularizer regularizer_from_string(const std::string& s);

struct AgentConfig {
    Backbone backbone = Backbone::td3;
    Regularizer regularizer = Regularizer::bc;
    double gamma = 0.99;
    double tau = 5e-3;
    double actor_lr = 3e-4;
    double critic_lr = 3e-4;
    std::size_t batch_size = 256;
    std::size_t hidden = 32;
    std::size_t layers = 2;
    // Regularizer weight. For BC with bc_normalize the effective weight is
    // mean|Q| / bc_alpha, recomputed per batch and treated as a constant.
    double lambda = 1.0;
    bool bc_normalize = true;
    double bc_alpha = 2.5;
    // TD3 specifics.
    double policy_noise = 0.2;
    double noise_clip = 0.5;
    int policy_delay = 2;
    // CQL candidate actions per source; the logsumexp runs over
    // cql_samples policy draws plus cql_samples uniform draws.
    int cql_samples = 10;
    // SAC entropy coefficient; with sac_auto_alpha it is tuned toward
    // target entropy -action_dim.
    double sac_entropy = 0.2;
    bool sac_auto_alpha = false;

    void validate() const;
};

struct Batch {
    Tensor s;     // [m, state_dim], normalized
    Tensor a;     // [m, action_dim]
    Tensor r;     // [m]
    Tensor s2;    // [m, state_dim], normalized
    Tensor done;  // [m], 1.0 only on true termination

    std::size_t size() const { return s.rows(); }
};

Batch make_batch(const std::vector<Transition>& transitions, const NormStats& stats);

struct Critic {
    MlpSpec spec;
    ParamTree q1, q2, q1_target, q2_target;
};

struct Actor {
    Backbone kind = Backbone::td3;
    MlpSpec spec;
    double action_bound = 1.0;
    ParamTree pi;
    ParamTree pi_target;  // td3 only
};

Critic make_critic(const AgentConfig& cfg, const EnvSpec& env, std::uint64_t seed);
Actor make_actor(const AgentConfig& cfg, const EnvSpec& env, std::uint64_t seed);

// Realization of the L + lambda * R loss decomposition. `reg_per_sample`
// keeps the per-sample regularizer so exploitation can gate it; `total`
// is standard + lambda * mean(gate * per_sample).
struct DecomposedLoss {
    Var total;
    Var standard;
    Var reg_per_sample;  // invalid when the loss has no regularizer
    double lambda = 0.0;
    double standard_value = 0.0;
    double reg_value = 0.0;  // ungated mean of per-sample regularizer
};

// y = r + gamma * (1 - done) * min(Q1_target, Q2_target)(s', a'), with a'
// from the target-policy convention: TD3 adds clipped smoothing noise to the
// target actor; SAC samples fresh actions from the live actor and subtracts
// entropy_weight * log pi. Returned values are constants for backward.
Tensor td_target(const Critic& critic, const Actor& actor, const Batch& batch, const AgentConfig& cfg,
                 double entropy_weight, Rng& rng);

// Mean squared TD error summed over both critics; no regularizer.
DecomposedLoss critic_loss_td3(Tape& tape, Critic& critic, const Batch& batch, const Tensor& targets);

// L = -mean Q1(s, pi(s)); R per-sample ||pi(s) - a||^2. mask == nullptr
// applies the regularizer to every sample.
DecomposedLoss actor_loss_td3bc(Tape& tape, Actor& actor, const Critic& critic, const Batch& batch,
                                double lambda, const std::vector<double>* mask);

// L = TD loss; R per-sample = mean over both critics of
// logsumexp_a Q(s, a) - Q(s, a_data) over sampled candidate actions
// (cfg.cql_samples policy draws + cfg.cql_samples uniform draws).
DecomposedLoss critic_loss_cql(Tape& tape, Critic& critic, const Actor& actor, const Batch& batch,
                               int n_cql_samples, const Tensor& targets, double lambda,
                               const std::vector<double>* mask, Rng& rng);

// mean(entropy_weight * log pi(a|s) - min Q(s, a)) with reparameterized a.
Var actor_loss_sac(Tape& tape, Actor& actor, const Critic& critic, const Batch& batch,
                   double entropy_weight, Rng& rng);

// Exploit-mode action: TD3 returns pi(s); SAC the tanh-squashed mean.
Tensor select_action(const Actor& actor, const Tensor& s);
std::vector<double> select_action(const Actor& actor, std::span<const double> s);

// Stochastic draw from the squashed gaussian policy (SAC); per-sample log
// probabilities returned alongside.
struct SampledAction {
    Tensor a;
    Tensor logp;  // [m]
};
SampledAction sample_action_sac(const Actor& actor, const Tensor& s, Rng& rng);

// Full agent: parameters, optimizers, target updates, and the adaptive
// train step used by both pretraining (no gate) and finetuning (gated).
class Agent {
public:
    Agent(const AgentConfig& cfg, const EnvSpec& env, std::uint64_t seed);

    const AgentConfig& config() const { return cfg_; }
    Actor& actor() { return actor_; }
    const Actor& actor() const { return actor_; }
    Critic& critic() { return critic_; }
    const Critic& critic() const { return critic_; }

    std::vector<double> act(std::span<const double> s_norm) const;
    // Backbone-default exploration: TD3 adds N(0, noise_std) to pi(s);
    // SAC samples from the policy.
    std::vector<double> act_default_explore(std::span<const double> s_norm, double noise_std, Rng& rng) const;

    Tensor q_min_eval(const Tensor& s, const Tensor& a) const;  // [m]
    double q1_eval_one(std::span<const double> s, std::span<const double> a) const;
    double q2_eval_one(std::span<const double> s, std::span<const double> a) const;

    struct StepStats {
        double loss_standard = 0.0;
        double loss_reg = 0.0;
    };
    // One gradient step. mask == nullptr keeps the full offline objective;
    // otherwise the regularizer is gated per sample. lambda_factor rescales
    // the configured lambda (decay schedules).
    StepStats train_step(const Batch& batch, const std::vector<double>* mask, double lambda_factor, Rng& rng);

    double entropy_weight() const;

    ParamTree export_params() const;
    void import_params(const ParamTree& flat);

private:
    AgentConfig cfg_;
    EnvSpec env_;
    Actor actor_;
    Critic critic_;
    Adam actor_opt_;
    Adam q1_opt_;
    Adam q2_opt_;
    ParamTree log_alpha_;
    std::optional<Adam> alpha_opt_;
    std::uint64_t iter_ = 0;
    StepStats last_actor_stats_;
};

}  // namespace sung
