#include "sung/agents.hpp"

#include <cmath>

namespace sung {

namespace {

constexpr double kLogStdMin = -20.0;
constexpr double kLogStdMax = 2.0;
constexpr double kHalfLog2Pi = 0.9189385332046727418;
constexpr double kSquashEps = 1e-6;

double clip(double x, double lo, double hi) { return std::min(std::max(x, lo), hi); }

Tensor concat_sa(const Tensor& s, const Tensor& a) {
    const std::size_t m = s.rows(), sd = s.cols(), ad = a.cols();
    Tensor out = Tensor::zeros({m, sd + ad});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < sd; ++j) out.v[i * (sd + ad) + j] = s.v[i * sd + j];
        for (std::size_t j = 0; j < ad; ++j) out.v[i * (sd + ad) + sd + j] = a.v[i * ad + j];
    }
    return out;
}

Tensor q_eval(const ParamTree& tree, const MlpSpec& spec, const char* prefix, const Tensor& s,
              const Tensor& a) {
    Tensor out = mlp_eval(tree, spec, concat_sa(s, a), prefix);
    return Tensor({out.rows()}, out.v);
}

// Squashed-gaussian head evaluation: mean, clamped log-std.
void gaussian_head_eval(const Actor& actor, const Tensor& s, Tensor& mean, Tensor& log_std) {
    Tensor out = mlp_eval(actor.pi, actor.spec, s, "pi.");
    const std::size_t m = out.rows(), ad = actor.spec.output_dim;
    mean = Tensor::zeros({m, ad});
    log_std = Tensor::zeros({m, ad});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < ad; ++j) {
            mean.v[i * ad + j] = out.v[i * 2 * ad + j];
            log_std.v[i * ad + j] = clip(out.v[i * 2 * ad + ad + j], kLogStdMin, kLogStdMax);
        }
}

MlpSpec actor_spec(const AgentConfig& cfg, const EnvSpec& env) {
    MlpSpec spec;
    spec.input_dim = env.state_dim;
    spec.hidden.assign(cfg.layers, cfg.hidden);
    spec.output_dim = env.action_dim;
    spec.activation = Activation::tanh;
    spec.transform = cfg.backbone == Backbone::td3 ? OutputTransform::tanh_squash
                                                   : OutputTransform::gaussian_head;
    return spec;
}

MlpSpec critic_spec(const AgentConfig& cfg, const EnvSpec& env) {
    MlpSpec spec;
    spec.input_dim = env.state_dim + env.action_dim;
    spec.hidden.assign(cfg.layers, cfg.hidden);
    spec.output_dim = 1;
    spec.activation = Activation::relu;
    spec.transform = OutputTransform::identity;
    return spec;
}

ParamTree copy_tree(const ParamTree& src) {
    ParamTree out;
    for (const auto& [name, p] : src) out.add(name, p.value);
    return out;
}

// Shared TD graph: mean squared error against the (constant) targets,
// summed over both critics. Returns the taped Q(s, a_data) columns so the
// CQL regularizer can reuse them.
struct TdGraph {
    Var loss;
    Var q1;
    Var q2;
};

TdGraph td_graph(Tape& tape, Critic& critic, const Batch& batch, const Tensor& targets) {
    check(batch.size() > 0, "critic loss: empty batch");
    Var input = tape.constant(concat_sa(batch.s, batch.a));
    Var y = tape.constant(targets);
    Var q1 = tape.reshape(mlp_forward(tape, critic.q1, critic.spec, input, "q1."), {batch.size()});
    Var q2 = tape.reshape(mlp_forward(tape, critic.q2, critic.spec, input, "q2."), {batch.size()});
    Var loss = tape.add(tape.mean(tape.square(tape.sub(q1, y))), tape.mean(tape.square(tape.sub(q2, y))));
    return {loss, q1, q2};
}

// total = standard + lambda * mean(gate ? mask .* per_sample : per_sample)
DecomposedLoss assemble(Tape& tape, Var standard, Var per_sample, double lambda,
                        const std::vector<double>* mask, std::size_t m) {
    DecomposedLoss out;
    out.standard = standard;
    out.standard_value = tape.value(standard).item();
    out.lambda = lambda;
    if (!per_sample.valid()) {
        out.total = standard;
        return out;
    }
    if (mask) {
        check(mask->size() == m, "adaptive loss: mask length does not match batch");
    }
    out.reg_per_sample = per_sample;
    {
        const Tensor& r = tape.value(per_sample);
        double acc = 0.0;
        for (double x : r.v) acc += x;
        out.reg_value = acc / static_cast<double>(m);
    }
    Var gated = per_sample;
    if (mask) gated = tape.mul(per_sample, tape.constant(Tensor::vector(*mask)));
    out.total = tape.add(standard, tape.scale(tape.mean(gated), lambda));
    return out;
}

}  // namespace

Backbone backbone_from_string(const std::string& s) {
    if (s == "td3") return Backbone::td3;
    if (s == "sac") return Backbone::sac;
    throw std::runtime_error("unknown backbone '" + s + "'");
}

Regularizer regularizer_from_string(const std::string& s) {
    if (s == "none") return Regularizer::none;
    if (s == "bc") return Regularizer::bc;
    if (s == "cql") return Regularizer::cql;
    throw std::runtime_error("unknown regularizer '" + s + "'");
}

void AgentConfig::validate() const {
    check(gamma >= 0.0 && gamma < 1.0, "agent config: gamma out of [0,1)");
    check(tau > 0.0 && tau <= 1.0, "agent config: tau out of (0,1]");
    check(lambda >= 0.0, "agent config: lambda must be non-negative");
    check(batch_size >= 1, "agent config: batch size must be positive");
    check(policy_delay >= 1, "agent config: policy delay must be positive");
    check(cql_samples >= 1, "agent config: cql_samples must be positive");
    if (regularizer == Regularizer::bc) check(backbone == Backbone::td3, "agent config: bc requires td3");
    if (regularizer == Regularizer::cql) check(backbone == Backbone::sac, "agent config: cql requires sac");
}

Batch make_batch(const std::vector<Transition>& transitions, const NormStats& stats) {
    check(!transitions.empty(), "make_batch: empty transition list");
    const std::size_t m = transitions.size();
    const std::size_t sd = transitions[0].s.size(), ad = transitions[0].a.size();
    Batch b;
    b.s = Tensor::zeros({m, sd});
    b.a = Tensor::zeros({m, ad});
    b.r = Tensor::zeros({m});
    b.s2 = Tensor::zeros({m, sd});
    b.done = Tensor::zeros({m});
    for (std::size_t i = 0; i < m; ++i) {
        const Transition& t = transitions[i];
        check(t.s.size() == sd && t.a.size() == ad && t.s2.size() == sd, "make_batch: transition dim mismatch");
        auto sn = normalize_state(stats, t.s);
        auto s2n = normalize_state(stats, t.s2);
        for (std::size_t j = 0; j < sd; ++j) {
            b.s.v[i * sd + j] = sn[j];
            b.s2.v[i * sd + j] = s2n[j];
        }
        for (std::size_t j = 0; j < ad; ++j) b.a.v[i * ad + j] = t.a[j];
        b.r.v[i] = t.r;
        b.done.v[i] = t.done ? 1.0 : 0.0;
    }
    return b;
}

Critic make_critic(const AgentConfig& cfg, const EnvSpec& env, std::uint64_t seed) {
    Critic c;
    c.spec = critic_spec(cfg, env);
    Rng rng1(Rng::derive(seed, "critic.q1"));
    Rng rng2(Rng::derive(seed, "critic.q2"));
    mlp_init(c.q1, c.spec, rng1, "q1.");
    mlp_init(c.q2, c.spec, rng2, "q2.");
    c.q1_target = copy_tree(c.q1);
    c.q2_target = copy_tree(c.q2);
    return c;
}

Actor make_actor(const AgentConfig& cfg, const EnvSpec& env, std::uint64_t seed) {
    Actor a;
    a.kind = cfg.backbone;
    a.spec = actor_spec(cfg, env);
    a.action_bound = env.action_bound;
    Rng rng(Rng::derive(seed, "actor"));
    mlp_init(a.pi, a.spec, rng, "pi.");
    if (a.kind == Backbone::td3) a.pi_target = copy_tree(a.pi);
    return a;
}

Tensor td_target(const Critic& critic, const Actor& actor, const Batch& batch, const AgentConfig& cfg,
                 double entropy_weight, Rng& rng) {
    check(batch.size() > 0, "td_target: empty batch");
    const std::size_t m = batch.size(), ad = actor.spec.output_dim;
    Tensor a2 = Tensor::zeros({m, ad});
    Tensor logp;
    if (actor.kind == Backbone::td3) {
        Tensor base = mlp_eval(actor.pi_target, actor.spec, batch.s2, "pi.");
        for (std::size_t i = 0; i < m * ad; ++i) {
            const double eps = clip(cfg.policy_noise * rng.normal(), -cfg.noise_clip, cfg.noise_clip);
            a2.v[i] = clip(actor.action_bound * base.v[i] + eps, -actor.action_bound, actor.action_bound);
        }
    } else {
        SampledAction sample = sample_action_sac(actor, batch.s2, rng);
        a2 = std::move(sample.a);
        logp = std::move(sample.logp);
    }
    Tensor q1t = q_eval(critic.q1_target, critic.spec, "q1.", batch.s2, a2);
    Tensor q2t = q_eval(critic.q2_target, critic.spec, "q2.", batch.s2, a2);
    Tensor y = Tensor::zeros({m});
    for (std::size_t i = 0; i < m; ++i) {
        double boot = std::min(q1t.v[i], q2t.v[i]);
        if (actor.kind == Backbone::sac) boot -= entropy_weight * logp.v[i];
        y.v[i] = batch.r.v[i] + cfg.gamma * (1.0 - batch.done.v[i]) * boot;
    }
    check_all_finite(y, "td_target");
    return y;
}

DecomposedLoss critic_loss_td3(Tape& tape, Critic& critic, const Batch& batch, const Tensor& targets) {
    TdGraph td = td_graph(tape, critic, batch, targets);
    return assemble(tape, td.loss, Var{}, 0.0, nullptr, batch.size());
}

DecomposedLoss actor_loss_td3bc(Tape& tape, Actor& actor, const Critic& critic, const Batch& batch,
                                double lambda, const std::vector<double>* mask) {
    check(actor.kind == Backbone::td3, "actor_loss_td3bc: needs a deterministic actor");
    const std::size_t m = batch.size();
    Var s = tape.constant(batch.s);
    Var a_pi = tape.scale(mlp_forward(tape, actor.pi, actor.spec, s, "pi."), actor.action_bound);
    Var q_in = tape.concat_cols(s, a_pi);
    Var q = tape.reshape(mlp_forward_frozen(tape, critic.q1, critic.spec, q_in, "q1."), {m});
    Var standard = tape.neg(tape.mean(q));
    Var per_sample{};
    if (lambda != 0.0 || mask)
        per_sample = tape.row_sum(tape.square(tape.sub(a_pi, tape.constant(batch.a))));
    return assemble(tape, standard, per_sample, lambda, mask, m);
}

DecomposedLoss critic_loss_cql(Tape& tape, Critic& critic, const Actor& actor, const Batch& batch,
                               int n_cql_samples, const Tensor& targets, double lambda,
                               const std::vector<double>* mask, Rng& rng) {
    check(n_cql_samples >= 1, "critic_loss_cql: needs at least one candidate per source");
    check(actor.kind == Backbone::sac, "critic_loss_cql: needs a stochastic actor");
    TdGraph td = td_graph(tape, critic, batch, targets);
    Var per_sample{};
    if (lambda != 0.0 || mask) {
        const std::size_t m = batch.size(), sd = batch.s.cols(), ad = batch.a.cols();
        const std::size_t n = 2 * static_cast<std::size_t>(n_cql_samples);
        // Candidate actions: policy draws plus uniform proposals, fixed
        // (non-differentiable) inputs to the critics.
        std::vector<Tensor> cands;
        cands.reserve(n);
        for (int j = 0; j < n_cql_samples; ++j) cands.push_back(sample_action_sac(actor, batch.s, rng).a);
        for (int j = 0; j < n_cql_samples; ++j) {
            Tensor u = Tensor::zeros({m, ad});
            for (double& x : u.v) x = rng.uniform(-actor.action_bound, actor.action_bound);
            cands.push_back(std::move(u));
        }
        Tensor stacked = Tensor::zeros({m * n, sd + ad});
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double* row = stacked.v.data() + (i * n + j) * (sd + ad);
                for (std::size_t d = 0; d < sd; ++d) row[d] = batch.s.v[i * sd + d];
                for (std::size_t d = 0; d < ad; ++d) row[sd + d] = cands[j].v[i * ad + d];
            }
        Var cand_in = tape.constant(std::move(stacked));
        Var lse1 = tape.logsumexp_rows(
            tape.reshape(mlp_forward(tape, critic.q1, critic.spec, cand_in, "q1."), {m, n}));
        Var lse2 = tape.logsumexp_rows(
            tape.reshape(mlp_forward(tape, critic.q2, critic.spec, cand_in, "q2."), {m, n}));
        per_sample = tape.scale(tape.add(tape.sub(lse1, td.q1), tape.sub(lse2, td.q2)), 0.5);
    }
    return assemble(tape, td.loss, per_sample, lambda, mask, batch.size());
}

Var actor_loss_sac(Tape& tape, Actor& actor, const Critic& critic, const Batch& batch,
                   double entropy_weight, Rng& rng) {
    check(actor.kind == Backbone::sac, "actor_loss_sac: needs a gaussian-head actor");
    const std::size_t m = batch.size(), ad = actor.spec.output_dim;
    Var s = tape.constant(batch.s);
    Var head = mlp_forward(tape, actor.pi, actor.spec, s, "pi.");
    Var mean = tape.slice_cols(head, 0, ad);
    Var log_std = tape.clamp(tape.slice_cols(head, ad, 2 * ad), kLogStdMin, kLogStdMax);
    Tensor noise = Tensor::zeros({m, ad});
    for (double& x : noise.v) x = rng.normal();
    Var u = tape.gaussian_reparam(mean, log_std, noise);
    Var tanh_u = tape.tanh(u);
    Var a = tape.scale(tanh_u, actor.action_bound);

    // log pi(a|s) = sum_j [ -eps^2/2 - log sigma - log(2 pi)/2
    //                       - log(bound (1 - tanh(u)^2) + eps_squash) ]
    Tensor gauss_const = Tensor::zeros({m, ad});
    for (std::size_t i = 0; i < m * ad; ++i)
        gauss_const.v[i] = -0.5 * noise.v[i] * noise.v[i] - kHalfLog2Pi;
    Var elem = tape.sub(tape.constant(std::move(gauss_const)), log_std);
    Var one_minus = tape.add_const(tape.neg(tape.square(tanh_u)), 1.0);
    Var corr = tape.log(tape.add_const(tape.scale(one_minus, actor.action_bound), kSquashEps));
    Var logp = tape.row_sum(tape.sub(elem, corr));

    Var q_in = tape.concat_cols(s, a);
    Var q1 = tape.reshape(mlp_forward_frozen(tape, critic.q1, critic.spec, q_in, "q1."), {m});
    Var q2 = tape.reshape(mlp_forward_frozen(tape, critic.q2, critic.spec, q_in, "q2."), {m});
    Var qmin = tape.minimum(q1, q2);
    return tape.mean(tape.sub(tape.scale(logp, entropy_weight), qmin));
}

Tensor select_action(const Actor& actor, const Tensor& s) {
    if (actor.kind == Backbone::td3) {
        Tensor out = mlp_eval(actor.pi, actor.spec, s, "pi.");
        for (double& x : out.v) x *= actor.action_bound;
        return out;
    }
    Tensor mean, log_std;
    gaussian_head_eval(actor, s, mean, log_std);
    for (double& x : mean.v) x = actor.action_bound * std::tanh(x);
    return mean;
}

std::vector<double> select_action(const Actor& actor, std::span<const double> s) {
    Tensor in({1, s.size()}, std::vector<double>(s.begin(), s.end()));
    Tensor out = select_action(actor, in);
    return out.v;
}

SampledAction sample_action_sac(const Actor& actor, const Tensor& s, Rng& rng) {
    check(actor.kind == Backbone::sac, "sample_action_sac: needs a gaussian-head actor");
    Tensor mean, log_std;
    gaussian_head_eval(actor, s, mean, log_std);
    const std::size_t m = s.rows(), ad = actor.spec.output_dim;
    SampledAction out;
    out.a = Tensor::zeros({m, ad});
    out.logp = Tensor::zeros({m});
    for (std::size_t i = 0; i < m; ++i) {
        double lp = 0.0;
        for (std::size_t j = 0; j < ad; ++j) {
            const double eps = rng.normal();
            const double ls = log_std.v[i * ad + j];
            const double u = mean.v[i * ad + j] + std::exp(ls) * eps;
            const double th = std::tanh(u);
            out.a.v[i * ad + j] = actor.action_bound * th;
            lp += -0.5 * eps * eps - ls - kHalfLog2Pi;
            lp -= std::log(actor.action_bound * (1.0 - th * th) + kSquashEps);
        }
        out.logp.v[i] = lp;
    }
    check_all_finite(out.a, "sample_action_sac");
    check_all_finite(out.logp, "sample_action_sac logp");
    return out;
}

Agent::Agent(const AgentConfig& cfg, const EnvSpec& env, std::uint64_t seed)
    : cfg_(cfg),
      env_(env),
      actor_(make_actor(cfg, env, Rng::derive(seed, "agent.actor"))),
      critic_(make_critic(cfg, env, Rng::derive(seed, "agent.critic"))),
      actor_opt_(actor_.pi, AdamConfig{cfg.actor_lr}),
      q1_opt_(critic_.q1, AdamConfig{cfg.critic_lr}),
      q2_opt_(critic_.q2, AdamConfig{cfg.critic_lr}) {
    cfg_.validate();
    if (cfg_.backbone == Backbone::sac && cfg_.sac_auto_alpha) {
        log_alpha_.add("log_alpha", Tensor::scalar(std::log(cfg_.sac_entropy)));
        alpha_opt_.emplace(log_alpha_, AdamConfig{cfg.actor_lr});
    }
}

std::vector<double> Agent::act(std::span<const double> s_norm) const {
    return select_action(actor_, s_norm);
}

std::vector<double> Agent::act_default_explore(std::span<const double> s_norm, double noise_std, Rng& rng) const {
    const std::size_t ad = env_.action_dim;
    if (cfg_.backbone == Backbone::td3) {
        auto a = select_action(actor_, s_norm);
        for (std::size_t j = 0; j < ad; ++j)
            a[j] = clip(a[j] + noise_std * rng.normal(), -env_.action_bound, env_.action_bound);
        return a;
    }
    Tensor s({1, s_norm.size()}, std::vector<double>(s_norm.begin(), s_norm.end()));
    return sample_action_sac(actor_, s, rng).a.v;
}

Tensor Agent::q_min_eval(const Tensor& s, const Tensor& a) const {
    Tensor q1 = q_eval(critic_.q1, critic_.spec, "q1.", s, a);
    Tensor q2 = q_eval(critic_.q2, critic_.spec, "q2.", s, a);
    for (std::size_t i = 0; i < q1.numel(); ++i) q1.v[i] = std::min(q1.v[i], q2.v[i]);
    return q1;
}

double Agent::q1_eval_one(std::span<const double> s, std::span<const double> a) const {
    Tensor st({1, s.size()}, std::vector<double>(s.begin(), s.end()));
    Tensor at({1, a.size()}, std::vector<double>(a.begin(), a.end()));
    return q_eval(critic_.q1, critic_.spec, "q1.", st, at).v[0];
}

double Agent::q2_eval_one(std::span<const double> s, std::span<const double> a) const {
    Tensor st({1, s.size()}, std::vector<double>(s.begin(), s.end()));
    Tensor at({1, a.size()}, std::vector<double>(a.begin(), a.end()));
    return q_eval(critic_.q2, critic_.spec, "q2.", st, at).v[0];
}

double Agent::entropy_weight() const {
    if (cfg_.backbone != Backbone::sac) return 0.0;
    if (cfg_.sac_auto_alpha) return std::exp(log_alpha_.at("log_alpha").value.v[0]);
    return cfg_.sac_entropy;
}

Agent::StepStats Agent::train_step(const Batch& batch, const std::vector<double>* mask, double lambda_factor,
                                   Rng& rng) {
    ++iter_;
    if (cfg_.backbone == Backbone::td3) {
        Tensor targets = td_target(critic_, actor_, batch, cfg_, 0.0, rng);
        {
            Tape tape;
            DecomposedLoss loss = critic_loss_td3(tape, critic_, batch, targets);
            tape.backward(loss.total);
            q1_opt_.step(critic_.q1);
            q2_opt_.step(critic_.q2);
            critic_.q1.zero_grad();
            critic_.q2.zero_grad();
        }
        if (iter_ % static_cast<std::uint64_t>(cfg_.policy_delay) == 0) {
            double lambda = 0.0;
            if (cfg_.regularizer == Regularizer::bc) {
                lambda = cfg_.lambda * lambda_factor;
                if (cfg_.bc_normalize) {
                    // TD3+BC convention: weight scales with mean |Q| over the
                    // batch, treated as a constant.
                    Tensor a_pi = select_action(actor_, batch.s);
                    Tensor q = q_eval(critic_.q1, critic_.spec, "q1.", batch.s, a_pi);
                    double acc = 0.0;
                    for (double x : q.v) acc += std::abs(x);
                    lambda *= (acc / static_cast<double>(q.numel())) / cfg_.bc_alpha;
                }
            }
            Tape tape;
            DecomposedLoss loss = actor_loss_td3bc(tape, actor_, critic_, batch, lambda, mask);
            tape.backward(loss.total);
            actor_opt_.step(actor_.pi);
            actor_.pi.zero_grad();
            polyak_update(critic_.q1_target, critic_.q1, cfg_.tau);
            polyak_update(critic_.q2_target, critic_.q2, cfg_.tau);
            polyak_update(actor_.pi_target, actor_.pi, cfg_.tau);
            last_actor_stats_ = {loss.standard_value, loss.reg_value};
        }
        return last_actor_stats_;
    }

    // SAC / CQL path.
    const double alpha_ent = entropy_weight();
    Tensor targets = td_target(critic_, actor_, batch, cfg_, alpha_ent, rng);
    StepStats stats;
    {
        const double lambda = cfg_.regularizer == Regularizer::cql ? cfg_.lambda * lambda_factor : 0.0;
        Tape tape;
        DecomposedLoss loss =
            critic_loss_cql(tape, critic_, actor_, batch, cfg_.cql_samples, targets, lambda, mask, rng);
        tape.backward(loss.total);
        q1_opt_.step(critic_.q1);
        q2_opt_.step(critic_.q2);
        critic_.q1.zero_grad();
        critic_.q2.zero_grad();
        stats = {loss.standard_value, loss.reg_value};
    }
    {
        Tape tape;
        Var loss = actor_loss_sac(tape, actor_, critic_, batch, alpha_ent, rng);
        tape.backward(loss);
        actor_opt_.step(actor_.pi);
        actor_.pi.zero_grad();
    }
    if (cfg_.sac_auto_alpha) {
        // d/d(log alpha) of -exp(log alpha) * (mean log pi + target entropy),
        // with log pi from a fresh policy draw.
        SampledAction sample = sample_action_sac(actor_, batch.s, rng);
        double mean_logp = 0.0;
        for (double x : sample.logp.v) mean_logp += x;
        mean_logp /= static_cast<double>(sample.logp.numel());
        const double target_entropy = -static_cast<double>(env_.action_dim);
        Param& la = log_alpha_.at("log_alpha");
        la.grad.v[0] = -std::exp(la.value.v[0]) * (mean_logp + target_entropy);
        alpha_opt_->step(log_alpha_);
        log_alpha_.zero_grad();
    }
    polyak_update(critic_.q1_target, critic_.q1, cfg_.tau);
    polyak_update(critic_.q2_target, critic_.q2, cfg_.tau);
    return stats;
}

ParamTree Agent::export_params() const {
    ParamTree flat;
    auto emit = [&flat](const std::string& prefix, const ParamTree& tree) {
        for (const auto& [name, p] : tree) flat.add(prefix + name, p.value);
    };
    emit("actor/", actor_.pi);
    if (actor_.kind == Backbone::td3) emit("actor_target/", actor_.pi_target);
    emit("q1/", critic_.q1);
    emit("q2/", critic_.q2);
    emit("q1_target/", critic_.q1_target);
    emit("q2_target/", critic_.q2_target);
    if (!log_alpha_.empty()) emit("", log_alpha_);
    return flat;
}

void Agent::import_params(const ParamTree& flat) {
    auto absorb = [&flat](const std::string& prefix, ParamTree& tree) {
        for (auto& [name, p] : tree) {
            const std::string full = prefix + name;
            check(flat.has(full), "agent checkpoint: missing parameter '" + full +
                                      "' (checkpoint from a different backbone or architecture?)");
            const Param& src = flat.at(full);
            check(src.value.same_shape(p.value), "agent checkpoint: shape mismatch for '" + full + "'");
            p.value = src.value;
        }
    };
    std::size_t expected = actor_.pi.size() + critic_.q1.size() + critic_.q2.size() +
                           critic_.q1_target.size() + critic_.q2_target.size() + log_alpha_.size() +
                           (actor_.kind == Backbone::td3 ? actor_.pi_target.size() : 0);
    check(flat.size() == expected, "agent checkpoint: parameter count mismatch "
                                   "(checkpoint from a different backbone or architecture?)");
    absorb("actor/", actor_.pi);
    if (actor_.kind == Backbone::td3) absorb("actor_target/", actor_.pi_target);
    absorb("q1/", critic_.q1);
    absorb("q2/", critic_.q2);
    absorb("q1_target/", critic_.q1_target);
    absorb("q2_target/", critic_.q2_target);
    if (!log_alpha_.empty()) absorb("", log_alpha_);
}

}  // namespace sung
