#include "sung/vae.hpp"

#include <cmath>

namespace sung {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kEncLogStdMin = -6.0;
constexpr double kEncLogStdMax = 4.0;

Tensor concat_sa(const Tensor& s, const Tensor& a) {
    const std::size_t m = s.rows(), sd = s.cols(), ad = a.cols();
    Tensor out = Tensor::zeros({m, sd + ad});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < sd; ++j) out.v[i * (sd + ad) + j] = s.v[i * sd + j];
        for (std::size_t j = 0; j < ad; ++j) out.v[i * (sd + ad) + sd + j] = a.v[i * ad + j];
    }
    return out;
}

VaeModel build(std::size_t x_dim, std::size_t hidden, std::size_t latent_dim, double kl_weight,
               std::uint64_t seed) {
    VaeModel m;
    m.latent_dim = latent_dim;
    m.kl_weight = kl_weight;
    m.enc_spec = MlpSpec{x_dim, {hidden, hidden}, latent_dim, Activation::relu, OutputTransform::gaussian_head};
    m.dec_spec = MlpSpec{latent_dim, {hidden, hidden}, x_dim, Activation::relu, OutputTransform::identity};
    Rng enc_rng(Rng::derive(seed, "vae.enc"));
    Rng dec_rng(Rng::derive(seed, "vae.dec"));
    mlp_init(m.enc, m.enc_spec, enc_rng, "enc.");
    mlp_init(m.dec, m.dec_spec, dec_rng, "dec.");
    return m;
}

}  // namespace

VaeModel make_vae(std::size_t state_dim, std::size_t action_dim, std::size_t hidden, double kl_weight,
                  std::uint64_t seed) {
    return build(state_dim + action_dim, hidden, 2 * (state_dim + action_dim), kl_weight, seed);
}

VaeModel make_vae_latent(std::size_t x_dim, std::size_t hidden, std::size_t latent_dim, double kl_weight,
                         std::uint64_t seed) {
    return build(x_dim, hidden, latent_dim, kl_weight, seed);
}

ElboGraph elbo_loss(Tape& tape, VaeModel& model, const Tensor& x, const Tensor& noise) {
    const std::size_t m = x.rows(), d = model.x_dim(), L = model.latent_dim;
    check(x.cols() == d, "elbo: input dim mismatch");
    check(noise.rows() == m && noise.cols() == L, "elbo: noise shape mismatch");

    Var xin = tape.constant(x);
    Var head = mlp_forward(tape, model.enc, model.enc_spec, xin, "enc.");
    Var mu = tape.slice_cols(head, 0, L);
    Var log_std = tape.clamp(tape.slice_cols(head, L, 2 * L), kEncLogStdMin, kEncLogStdMax);
    Var z = tape.gaussian_reparam(mu, log_std, noise);
    Var recon = mlp_forward(tape, model.dec, model.dec_spec, z, "dec.");

    // Unit-variance gaussian likelihood.
    Var err = tape.row_sum(tape.square(tape.sub(recon, xin)));
    Var recon_nll = tape.add_const(tape.scale(err, 0.5), 0.5 * kLog2Pi * static_cast<double>(d));

    // KL[N(mu, sigma) || N(0, I)] = sum (mu^2 + sigma^2 - 1 - 2 log sigma)/2
    Var sigma_sq = tape.square(tape.exp(log_std));
    Var kl_elem = tape.sub(tape.add(tape.square(mu), sigma_sq), tape.add_const(tape.scale(log_std, 2.0), 1.0));
    Var kl = tape.scale(tape.row_sum(kl_elem), 0.5);

    ElboGraph out;
    out.per_sample = tape.add(recon_nll, tape.scale(kl, model.kl_weight));
    out.total = tape.mean(out.per_sample);
    const Tensor& rv = tape.value(recon_nll);
    const Tensor& kv = tape.value(kl);
    for (double v : rv.v) out.recon_value += v;
    for (double v : kv.v) out.kl_value += v;
    out.recon_value /= static_cast<double>(m);
    out.kl_value /= static_cast<double>(m);
    return out;
}

ElboGraph elbo_loss(Tape& tape, VaeModel& model, const Tensor& s, const Tensor& a, const Tensor& noise) {
    return elbo_loss(tape, model, concat_sa(s, a), noise);
}

std::vector<double> elbo_eval(const VaeModel& model, const Tensor& x, const Tensor& noise) {
    const std::size_t m = x.rows(), d = model.x_dim(), L = model.latent_dim;
    check(x.cols() == d, "elbo eval: input dim mismatch");
    Tensor head = mlp_eval(model.enc, model.enc_spec, x, "enc.");
    Tensor z = Tensor::zeros({m, L});
    std::vector<double> kl(m, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < L; ++j) {
            const double mu = head.v[i * 2 * L + j];
            const double ls = std::min(std::max(head.v[i * 2 * L + L + j], kEncLogStdMin), kEncLogStdMax);
            const double sigma = std::exp(ls);
            z.v[i * L + j] = mu + sigma * noise.v[i * L + j];
            kl[i] += 0.5 * (mu * mu + sigma * sigma - 1.0 - 2.0 * ls);
        }
    Tensor recon = mlp_eval(model.dec, model.dec_spec, z, "dec.");
    std::vector<double> out(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        double err = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double e = recon.v[i * d + j] - x.v[i * d + j];
            err += e * e;
        }
        out[i] = 0.5 * err + 0.5 * kLog2Pi * static_cast<double>(d) + model.kl_weight * kl[i];
    }
    return out;
}

std::vector<double> train_vae(VaeModel& model, const OfflineDataset& dataset, std::size_t grad_steps,
                              std::size_t batch_size, double lr, std::uint64_t seed) {
    check(!dataset.transitions.empty(), "train_vae: empty dataset");
    Adam enc_opt(model.enc, AdamConfig{lr});
    Adam dec_opt(model.dec, AdamConfig{lr});
    Rng rng(Rng::derive(seed, "vae.train"));
    const std::size_t n = dataset.transitions.size();
    const std::size_t sd = dataset.transitions[0].s.size();
    const std::size_t ad = dataset.transitions[0].a.size();
    std::vector<double> curve;
    curve.reserve(grad_steps);
    for (std::size_t step = 0; step < grad_steps; ++step) {
        Tensor s = Tensor::zeros({batch_size, sd});
        Tensor a = Tensor::zeros({batch_size, ad});
        for (std::size_t i = 0; i < batch_size; ++i) {
            const Transition& t = dataset.transitions[rng.integer(n)];
            auto sn = normalize_state(dataset.stats, t.s);
            for (std::size_t j = 0; j < sd; ++j) s.v[i * sd + j] = sn[j];
            for (std::size_t j = 0; j < ad; ++j) a.v[i * ad + j] = t.a[j];
        }
        Tensor noise = Tensor::zeros({batch_size, model.latent_dim});
        for (double& x : noise.v) x = rng.normal();
        Tape tape;
        ElboGraph g = elbo_loss(tape, model, s, a, noise);
        tape.backward(g.total);
        enc_opt.step(model.enc);
        dec_opt.step(model.dec);
        model.enc.zero_grad();
        model.dec.zero_grad();
        curve.push_back(tape.value(g.total).item());
    }
    return curve;
}

double train_vae_step(VaeModel& model, Adam& enc_opt, Adam& dec_opt, const Tensor& s, const Tensor& a,
                      Rng& rng) {
    Tensor noise = Tensor::zeros({s.rows(), model.latent_dim});
    for (double& x : noise.v) x = rng.normal();
    Tape tape;
    ElboGraph g = elbo_loss(tape, model, s, a, noise);
    tape.backward(g.total);
    enc_opt.step(model.enc);
    dec_opt.step(model.dec);
    model.enc.zero_grad();
    model.dec.zero_grad();
    return tape.value(g.total).item();
}

UncertaintyEstimator UncertaintyEstimator::from_vae(const VaeModel& model, std::size_t latent_samples) {
    check(latent_samples >= 1, "uncertainty: latent_samples must be positive");
    UncertaintyEstimator est;
    est.kind_ = Kind::vae;
    est.vae_ = &model;
    est.latent_samples_ = latent_samples;
    return est;
}

UncertaintyEstimator UncertaintyEstimator::from_q_std(const Critic& critic) {
    UncertaintyEstimator est;
    est.kind_ = Kind::q_std;
    est.critic_ = &critic;
    return est;
}

std::vector<double> UncertaintyEstimator::score(const Tensor& s_norm, const Tensor& a, Rng& rng) const {
    const std::size_t m = s_norm.rows();
    if (kind_ == Kind::q_std) {
        Tensor x = concat_sa(s_norm, a);
        Tensor q1 = mlp_eval(critic_->q1, critic_->spec, x, "q1.");
        Tensor q2 = mlp_eval(critic_->q2, critic_->spec, x, "q2.");
        std::vector<double> out(m);
        for (std::size_t i = 0; i < m; ++i) out[i] = std::abs(q1.v[i] - q2.v[i]);
        return out;
    }
    Tensor x = concat_sa(s_norm, a);
    std::vector<double> out(m, 0.0);
    for (std::size_t k = 0; k < latent_samples_; ++k) {
        Tensor noise = Tensor::zeros({m, vae_->latent_dim});
        for (double& v : noise.v) v = rng.normal();
        auto scores = elbo_eval(*vae_, x, noise);
        for (std::size_t i = 0; i < m; ++i) out[i] += scores[i];
    }
    if (latent_samples_ > 1)
        for (double& v : out) v /= static_cast<double>(latent_samples_);
    return out;
}

double UncertaintyEstimator::score_one(std::span<const double> s_norm, std::span<const double> a,
                                       Rng& rng) const {
    Tensor st({1, s_norm.size()}, std::vector<double>(s_norm.begin(), s_norm.end()));
    Tensor at({1, a.size()}, std::vector<double>(a.begin(), a.end()));
    return score(st, at, rng)[0];
}

}  // namespace sung
