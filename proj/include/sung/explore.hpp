#pragma once
#include <span>
#include <utility>
#include <vector>

#include "sung/agents.hpp"
#include "sung/vae.hpp"

namespace sung {

enum class RankOrder { q_first, u_first };  // "qu" / "uq"

RankOrder rank_order_from_string(const std::string& s);
std::string rank_order_to_string(RankOrder o);

struct ExplorationConfig {
    std::size_t n = 100;       // candidate count
    std::size_t k = 10;        // finalist count
    RankOrder order = RankOrder::q_first;
    double alpha = 1.0;        // softmax temperature
    double delta = 0.2;        // gaussian noise std for deterministic policies
    bool optimistic = true;    // false = backbone-default exploration

    void validate() const;
};

struct CandidateSet {
    Tensor actions;         // [n, action_dim]
    std::vector<double> q;  // min over both critics
    std::vector<double> u;

    std::size_t size() const { return q.size(); }
    std::vector<double> action(std::size_t i) const;
};

// Deterministic actor: a_i = clip(pi(s) + eps_i), eps_i ~ N(0, delta^2);
// stochastic actor: a_i ~ pi(.|s). Q and U evaluated for every candidate.
CandidateSet generate_candidates(const Actor& actor, const Critic& critic,
                                 const UncertaintyEstimator& estimator, std::span<const double> s_norm,
                                 const ExplorationConfig& cfg, Rng& rng);

// Top-k candidate indices by the ranking criterion (Q for "qu", U for "uq"),
// descending, ties broken by candidate index.
std::vector<std::size_t> finalist_indices(const CandidateSet& candidates, const ExplorationConfig& cfg);

// Softmax over the sampling criterion (U for "qu", Q for "uq") at
// temperature alpha, across the given finalists.
std::vector<double> finalist_probs(const CandidateSet& candidates, const ExplorationConfig& cfg,
                                   const std::vector<std::size_t>& finalists);

std::vector<double> select_behavior_action(const CandidateSet& candidates, const ExplorationConfig& cfg,
                                           Rng& rng);

// Per-backbone ranking defaults: (td3, bc) -> ("qu", 10); (sac, cql) ->
// ("uq", 20). Value-regularized backbones must not rank by Q first.
std::pair<RankOrder, std::size_t> default_order_for(Backbone backbone, Regularizer regularizer);

}  // namespace sung
