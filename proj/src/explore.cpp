#include "sung/explore.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sung/numerics.hpp"

namespace sung {

RankOrder rank_order_from_string(const std::string& s) {
    if (s == "qu") return RankOrder::q_first;
    if (s == "uq") return RankOrder::u_first;
    throw std::runtime_error("unknown ranking order '" + s + "' (expected qu or uq)");
}

std::string rank_order_to_string(RankOrder o) { return o == RankOrder::q_first ? "qu" : "uq"; }

void ExplorationConfig::validate() const {
    check(n >= 1 && k >= 1 && k <= n, "exploration config: need 1 <= k <= n");
    check(alpha > 0.0, "exploration config: alpha must be positive");
    check(delta >= 0.0, "exploration config: delta must be non-negative");
}

std::vector<double> CandidateSet::action(std::size_t i) const {
    const std::size_t ad = actions.cols();
    return std::vector<double>(actions.v.begin() + i * ad, actions.v.begin() + (i + 1) * ad);
}

CandidateSet generate_candidates(const Actor& actor, const Critic& critic,
                                 const UncertaintyEstimator& estimator, std::span<const double> s_norm,
                                 const ExplorationConfig& cfg, Rng& rng) {
    cfg.validate();
    const std::size_t ad = actor.spec.output_dim;
    const double bound = actor.action_bound;
    CandidateSet set;
    set.actions = Tensor::zeros({cfg.n, ad});
    Tensor s_rep = Tensor::zeros({cfg.n, s_norm.size()});
    for (std::size_t i = 0; i < cfg.n; ++i)
        for (std::size_t j = 0; j < s_norm.size(); ++j) s_rep.v[i * s_norm.size() + j] = s_norm[j];

    if (actor.kind == Backbone::td3) {
        auto base = select_action(actor, s_norm);
        for (std::size_t i = 0; i < cfg.n; ++i)
            for (std::size_t j = 0; j < ad; ++j) {
                const double a = base[j] + cfg.delta * rng.normal();
                set.actions.v[i * ad + j] = std::min(std::max(a, -bound), bound);
            }
    } else {
        set.actions = sample_action_sac(actor, s_rep, rng).a;
    }

    Tensor x = Tensor::zeros({cfg.n, s_norm.size() + ad});
    for (std::size_t i = 0; i < cfg.n; ++i) {
        for (std::size_t j = 0; j < s_norm.size(); ++j) x.v[i * x.cols() + j] = s_norm[j];
        for (std::size_t j = 0; j < ad; ++j) x.v[i * x.cols() + s_norm.size() + j] = set.actions.v[i * ad + j];
    }
    Tensor q1 = mlp_eval(critic.q1, critic.spec, x, "q1.");
    Tensor q2 = mlp_eval(critic.q2, critic.spec, x, "q2.");
    set.q.resize(cfg.n);
    for (std::size_t i = 0; i < cfg.n; ++i) set.q[i] = std::min(q1.v[i], q2.v[i]);
    set.u = estimator.score(s_rep, set.actions, rng);
    return set;
}

std::vector<std::size_t> finalist_indices(const CandidateSet& candidates, const ExplorationConfig& cfg) {
    check(candidates.size() >= cfg.k, "finalists: fewer candidates than k");
    const std::vector<double>& key = cfg.order == RankOrder::q_first ? candidates.q : candidates.u;
    std::vector<std::size_t> idx(candidates.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&key](std::size_t a, std::size_t b) { return key[a] > key[b]; });
    idx.resize(cfg.k);
    return idx;
}

std::vector<double> finalist_probs(const CandidateSet& candidates, const ExplorationConfig& cfg,
                                   const std::vector<std::size_t>& finalists) {
    const std::vector<double>& key = cfg.order == RankOrder::q_first ? candidates.u : candidates.q;
    std::vector<double> scores;
    scores.reserve(finalists.size());
    for (auto i : finalists) scores.push_back(key[i]);
    return softmax_temp(scores, cfg.alpha);
}

std::vector<double> select_behavior_action(const CandidateSet& candidates, const ExplorationConfig& cfg,
                                           Rng& rng) {
    auto finalists = finalist_indices(candidates, cfg);
    auto probs = finalist_probs(candidates, cfg, finalists);
    const double draw = rng.uniform();
    double acc = 0.0;
    std::size_t pick = finalists.size() - 1;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (draw < acc) {
            pick = i;
            break;
        }
    }
    return candidates.action(finalists[pick]);
}

std::pair<RankOrder, std::size_t> default_order_for(Backbone backbone, Regularizer regularizer) {
    if (backbone == Backbone::td3 && regularizer == Regularizer::bc)
        return {RankOrder::q_first, 10};
    if (backbone == Backbone::sac && regularizer == Regularizer::cql)
        return {RankOrder::u_first, 20};
    throw std::runtime_error("no default ranking order for this backbone/regularizer combination");
}

}  // namespace sung
