#pragma once
#include <vector>

#include "sung/agents.hpp"
#include "sung/vae.hpp"

namespace sung {

enum class OodMode { top_p, categorical, uniform };

OodMode ood_mode_from_string(const std::string& s);
std::string ood_mode_to_string(OodMode m);

struct ExploitationConfig {
    double p = 5.0;  // OOD percentage of the minibatch, 0..100
    OodMode mode = OodMode::top_p;
    double lambda_end_fraction = 1.0;  // 1.0 = no decay
    double alpha = 1.0;                // temperature for categorical mode

    void validate() const;
};

// round(p * m / 100), half away from zero.
std::size_t ood_count(double p, std::size_t m);

// 0/1 indicator over the minibatch. top_p marks the ood_count samples with
// the highest U(s, pi(s)); categorical draws that many without replacement
// with probabilities softmax(U / alpha); uniform ignores U. Ties broken by
// sample index. When u_out is given it receives the U scores (computed even
// where the selection itself would not need them).
std::vector<double> identify_ood(const UncertaintyEstimator& estimator, const Tensor& s_norm,
                                 const Tensor& policy_actions, const ExploitationConfig& cfg, Rng& rng,
                                 std::vector<double>* u_out = nullptr);

// lambda0 * (1 + (end_fraction - 1) * step / total_steps)
double lambda_schedule(double lambda0, std::size_t step, std::size_t total_steps, double end_fraction);

// Gated objectives: the regularizer applies only where mask == 1; the
// standard term is never gated.
DecomposedLoss adaptive_actor_loss_td3bc(Tape& tape, Actor& actor, const Critic& critic, const Batch& batch,
                                         const std::vector<double>& mask, double lambda);

DecomposedLoss adaptive_critic_loss_cql(Tape& tape, Critic& critic, const Actor& actor, const Batch& batch,
                                        int n_cql_samples, const Tensor& targets,
                                        const std::vector<double>& mask, double lambda, Rng& rng);

}  // namespace sung
