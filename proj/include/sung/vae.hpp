#pragma once
#include <cstdint>
#include <span>
#include <vector>

#include "sung/agents.hpp"
#include "sung/dataset.hpp"
#include "sung/mlp.hpp"

namespace sung {

// State-action visitation density estimator. The encoder is a gaussian head
// over the latent; the decoder reconstructs (s, a) under a unit-variance
// gaussian likelihood, so the reconstruction term is ||x - x_hat||^2 / 2
// plus the d/2 log(2 pi) constant.
struct VaeModel {
    MlpSpec enc_spec;
    MlpSpec dec_spec;
    ParamTree enc;
    ParamTree dec;
    std::size_t latent_dim = 0;
    double kl_weight = 0.5;

    std::size_t x_dim() const { return enc_spec.input_dim; }
};

// latent dim = 2 * (state_dim + action_dim); hidden widths {hidden, hidden}.
VaeModel make_vae(std::size_t state_dim, std::size_t action_dim, std::size_t hidden, double kl_weight,
                  std::uint64_t seed);
// Explicit latent dimension, for tests exercising closed-form KL values.
VaeModel make_vae_latent(std::size_t x_dim, std::size_t hidden, std::size_t latent_dim, double kl_weight,
                         std::uint64_t seed);

struct ElboGraph {
    Var total;       // scalar mean over the batch
    Var per_sample;  // [m]
    double recon_value = 0.0;  // batch means, for monitoring
    double kl_value = 0.0;
};

// Reconstruction NLL + kl_weight * KL[q(z|x) || N(0, I)], with the
// closed-form diagonal-gaussian KL and one reparameterized latent sample.
ElboGraph elbo_loss(Tape& tape, VaeModel& model, const Tensor& x, const Tensor& noise);
ElboGraph elbo_loss(Tape& tape, VaeModel& model, const Tensor& s, const Tensor& a, const Tensor& noise);

// Tape-free per-sample ELBO values (the uncertainty score).
std::vector<double> elbo_eval(const VaeModel& model, const Tensor& x, const Tensor& noise);

// Adam training over (s, a) pairs drawn from the dataset; states are
// normalized with the dataset's stats. Returns the per-step loss curve.
std::vector<double> train_vae(VaeModel& model, const OfflineDataset& dataset, std::size_t grad_steps,
                              std::size_t batch_size, double lr, std::uint64_t seed);

// One gradient step on an explicit (already normalized) batch; used when
// training is interleaved with agent updates.
double train_vae_step(VaeModel& model, Adam& enc_opt, Adam& dec_opt, const Tensor& s, const Tensor& a,
                      Rng& rng);

// U(s, a): higher means further out of distribution. Either the VAE ELBO
// value (default 1 latent sample) or |Q1 - Q2| from a critic pair.
class UncertaintyEstimator {
public:
    enum class Kind { vae, q_std };

    static UncertaintyEstimator from_vae(const VaeModel& model, std::size_t latent_samples = 1);
    static UncertaintyEstimator from_q_std(const Critic& critic);

    Kind kind() const { return kind_; }

    // Batched scores for [m, sd] states (normalized) and [m, ad] actions.
    std::vector<double> score(const Tensor& s_norm, const Tensor& a, Rng& rng) const;
    double score_one(std::span<const double> s_norm, std::span<const double> a, Rng& rng) const;

private:
    Kind kind_ = Kind::vae;
    const VaeModel* vae_ = nullptr;
    const Critic* critic_ = nullptr;
    std::size_t latent_samples_ = 1;
};

}  // namespace sung
