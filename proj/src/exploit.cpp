#include "sung/exploit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sung/numerics.hpp"

namespace sung {

OodMode ood_mode_from_string(const std::string& s) {
    if (s == "top" || s == "top_p") return OodMode::top_p;
    if (s == "categorical") return OodMode::categorical;
    if (s == "uniform") return OodMode::uniform;
    throw std::runtime_error("unknown ood selection mode '" + s + "'");
}

std::string ood_mode_to_string(OodMode m) {
    switch (m) {
        case OodMode::top_p: return "top";
        case OodMode::categorical: return "categorical";
        default: return "uniform";
    }
}

void ExploitationConfig::validate() const {
    check(p >= 0.0 && p <= 100.0, "exploitation config: p out of [0,100]");
    check(lambda_end_fraction >= 0.0 && lambda_end_fraction <= 1.0,
          "exploitation config: lambda_end_fraction out of [0,1]");
    check(alpha > 0.0, "exploitation config: alpha must be positive");
}

std::size_t ood_count(double p, std::size_t m) {
    return static_cast<std::size_t>(std::llround(p * static_cast<double>(m) / 100.0));
}

std::vector<double> identify_ood(const UncertaintyEstimator& estimator, const Tensor& s_norm,
                                 const Tensor& policy_actions, const ExploitationConfig& cfg, Rng& rng,
                                 std::vector<double>* u_out) {
    cfg.validate();
    const std::size_t m = s_norm.rows();
    check(policy_actions.rows() == m, "identify_ood: state/action row mismatch");
    const std::size_t count = std::min(ood_count(cfg.p, m), m);
    const bool need_u = cfg.mode != OodMode::uniform && count > 0 && count < m;
    std::vector<double> u;
    if (need_u || u_out) u = estimator.score(s_norm, policy_actions, rng);
    if (u_out) *u_out = u;

    std::vector<double> mask(m, 0.0);
    if (count == 0) return mask;
    if (count == m) {
        std::fill(mask.begin(), mask.end(), 1.0);
        return mask;
    }

    if (cfg.mode == OodMode::uniform) {
        // Partial Fisher-Yates over sample indices.
        std::vector<std::size_t> idx(m);
        std::iota(idx.begin(), idx.end(), 0);
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t j = i + rng.integer(m - i);
            std::swap(idx[i], idx[j]);
            mask[idx[i]] = 1.0;
        }
        return mask;
    }

    if (cfg.mode == OodMode::top_p) {
        std::vector<std::size_t> idx(m);
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&u](std::size_t a, std::size_t b) { return u[a] > u[b]; });
        for (std::size_t i = 0; i < count; ++i) mask[idx[i]] = 1.0;
        return mask;
    }

    // Categorical: sequential draws without replacement, renormalizing the
    // softmax weights over the remaining samples.
    std::vector<double> w = softmax_temp(u, cfg.alpha);
    std::vector<bool> taken(m, false);
    for (std::size_t pick = 0; pick < count; ++pick) {
        double total = 0.0;
        for (std::size_t i = 0; i < m; ++i)
            if (!taken[i]) total += w[i];
        double draw = rng.uniform() * total;
        std::size_t chosen = m;
        for (std::size_t i = 0; i < m; ++i) {
            if (taken[i]) continue;
            draw -= w[i];
            chosen = i;
            if (draw < 0.0) break;
        }
        taken[chosen] = true;
        mask[chosen] = 1.0;
    }
    return mask;
}

double lambda_schedule(double lambda0, std::size_t step, std::size_t total_steps, double end_fraction) {
    check(total_steps >= 1 && step <= total_steps, "lambda_schedule: step out of range");
    const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
    return lambda0 * (1.0 + (end_fraction - 1.0) * frac);
}

DecomposedLoss adaptive_actor_loss_td3bc(Tape& tape, Actor& actor, const Critic& critic, const Batch& batch,
                                         const std::vector<double>& mask, double lambda) {
    check(mask.size() == batch.size(), "adaptive loss: mask length does not match batch");
    return actor_loss_td3bc(tape, actor, critic, batch, lambda, &mask);
}

DecomposedLoss adaptive_critic_loss_cql(Tape& tape, Critic& critic, const Actor& actor, const Batch& batch,
                                        int n_cql_samples, const Tensor& targets,
                                        const std::vector<double>& mask, double lambda, Rng& rng) {
    check(mask.size() == batch.size(), "adaptive loss: mask length does not match batch");
    return critic_loss_cql(tape, critic, actor, batch, n_cql_samples, targets, lambda, &mask, rng);
}

}  // namespace sung
