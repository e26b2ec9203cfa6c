#include "sung/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>

#include "sung/agents.hpp"
#include "sung/rng.hpp"

namespace sung {

namespace {

constexpr char kMagic[8] = {'S', 'U', 'N', 'G', 'D', 'S', '1', '\0'};
constexpr double kStdFloor = 1e-3;
constexpr std::size_t kMediumTrainCap = 60000;
constexpr std::size_t kMediumWarmup = 1000;
constexpr std::size_t kMediumEvalEvery = 200;
constexpr std::size_t kMediumMinSteps = 2000;
constexpr double kMediumExplNoise = 0.1;
// Slow learning rate so the 0.5-score stopping rule catches the policy near
// the threshold instead of far past it, and so the replay buffer spans a
// usefully long random-to-medium spectrum.
constexpr double kMediumLr = 2e-5;

void write_u32(std::ostream& os, std::uint32_t x) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(x >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& os, std::uint64_t x) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(x >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

void write_f64(std::ostream& os, double x) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, 8);
    write_u64(os, bits);
}

std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    check(is.good(), "dataset: truncated file");
    std::uint32_t x = 0;
    for (int i = 0; i < 4; ++i) x |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return x;
}

std::uint64_t read_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    check(is.good(), "dataset: truncated file");
    std::uint64_t x = 0;
    for (int i = 0; i < 8; ++i) x |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return x;
}

double read_f64(std::istream& is) {
    std::uint64_t bits = read_u64(is);
    double x;
    std::memcpy(&x, &bits, 8);
    return x;
}

void compute_stats(OfflineDataset& ds, bool enabled) {
    const std::size_t sd = ds.state_dim;
    ds.stats = NormStats::identity(sd);
    ds.stats.enabled = enabled;
    if (!enabled || ds.transitions.empty()) return;
    const double n = static_cast<double>(ds.transitions.size());
    for (std::size_t j = 0; j < sd; ++j) {
        double mean = 0.0;
        for (const auto& t : ds.transitions) mean += t.s[j];
        mean /= n;
        double var = 0.0;
        for (const auto& t : ds.transitions) {
            const double d = t.s[j] - mean;
            var += d * d;
        }
        ds.stats.mean[j] = mean;
        ds.stats.std_dev[j] = std::max(std::sqrt(var / n), kStdFloor);
    }
}

std::vector<double> uniform_action(const EnvSpec& spec, Rng& rng) {
    std::vector<double> a(spec.action_dim);
    for (auto& x : a) x = rng.uniform(-spec.action_bound, spec.action_bound);
    return a;
}

// Rollouts of a fixed behavior; returns mean episode return.
double fill_with_policy(Env& env, std::size_t size, std::uint64_t seed, std::vector<Transition>& out,
                        const std::function<std::vector<double>(std::span<const double>, Rng&)>& policy) {
    Rng rng(Rng::derive(seed, "rollout"));
    std::uint64_t episode = 0;
    double episodes_done = 0.0, return_sum = 0.0, ep_return = 0.0;
    auto obs = env.reset(Rng::derive(seed, episode));
    while (out.size() < size) {
        auto a = policy(obs, rng);
        StepResult res = env.step(a);
        out.push_back(Transition{obs, a, res.reward, res.obs, res.terminal});
        ep_return += res.reward;
        if (res.done()) {
            return_sum += ep_return;
            episodes_done += 1.0;
            ep_return = 0.0;
            obs = env.reset(Rng::derive(seed, ++episode));
        } else {
            obs = res.obs;
        }
    }
    return episodes_done > 0.0 ? return_sum / episodes_done : ep_return;
}

double eval_policy_raw(Env& env, const Agent& agent, int episodes, std::uint64_t seed) {
    double total = 0.0;
    for (int e = 0; e < episodes; ++e) {
        auto obs = env.reset(Rng::derive(seed, static_cast<std::uint64_t>(e)));
        double ep = 0.0;
        while (true) {
            StepResult res = env.step(agent.act(obs));
            ep += res.reward;
            if (res.done()) break;
            obs = res.obs;
        }
        total += ep;
    }
    return total / episodes;
}

struct MediumPolicy {
    Agent agent;
    std::vector<Transition> replay;  // everything seen while training
    double eval_return = 0.0;
};

// Online TD3 on raw observations until the normalized score first reaches
// 0.5, then frozen.
MediumPolicy train_medium_policy(Env& env, std::uint64_t seed) {
    AgentConfig cfg;
    cfg.backbone = Backbone::td3;
    cfg.regularizer = Regularizer::none;
    cfg.actor_lr = kMediumLr;
    cfg.critic_lr = kMediumLr;
    MediumPolicy mp{Agent(cfg, env.spec(), Rng::derive(seed, "medium.init")), {}, 0.0};
    Rng train_rng(Rng::derive(seed, "medium.train"));
    Rng act_rng(Rng::derive(seed, "medium.act"));
    NormStats identity = NormStats::identity(env.spec().state_dim);

    std::uint64_t episode = 0;
    bool crossed_once = false;
    auto obs = env.reset(Rng::derive(seed, episode));
    for (std::size_t step = 1; step <= kMediumTrainCap; ++step) {
        std::vector<double> a;
        if (step <= kMediumWarmup)
            a = uniform_action(env.spec(), act_rng);
        else
            a = mp.agent.act_default_explore(obs, kMediumExplNoise, act_rng);
        StepResult res = env.step(a);
        mp.replay.push_back(Transition{obs, a, res.reward, res.obs, res.terminal});
        obs = res.done() ? env.reset(Rng::derive(seed, ++episode)) : res.obs;

        if (step > kMediumWarmup) {
            std::vector<Transition> sampled(cfg.batch_size);
            for (auto& t : sampled) t = mp.replay[train_rng.integer(mp.replay.size())];
            Batch batch = make_batch(sampled, identity);
            mp.agent.train_step(batch, nullptr, 1.0, train_rng);
        }
        if (step > std::max(kMediumWarmup, kMediumMinSteps) && step % kMediumEvalEvery == 0) {
            auto probe = env.clone();
            mp.eval_return = eval_policy_raw(*probe, mp.agent, 20, Rng::derive(seed, "medium.eval"));
            // Two consecutive threshold crossings so a single lucky
            // evaluation cannot freeze a fluke policy.
            if (normalized_score(env.spec().name, mp.eval_return) >= 0.5) {
                if (crossed_once) return mp;
                crossed_once = true;
            } else {
                crossed_once = false;
            }
        }
    }
    throw std::runtime_error("medium tier: policy did not reach half of the reference score within " +
                             std::to_string(kMediumTrainCap) + " steps");
}

// Scripted waypoint controller for the maze; drives toward each waypoint in
// turn with gaussian action noise.
class WaypointPolicy {
public:
    WaypointPolicy(std::vector<std::vector<double>> waypoints, double noise)
        : waypoints_(std::move(waypoints)), noise_(noise) {}

    std::vector<double> operator()(std::span<const double> obs, Rng& rng) {
        if (next_ < waypoints_.size()) {
            const auto& w = waypoints_[next_];
            const double dx = w[0] - obs[0], dy = w[1] - obs[1];
            if (std::sqrt(dx * dx + dy * dy) < 0.12 && next_ + 1 < waypoints_.size()) ++next_;
        }
        const auto& w = waypoints_[std::min(next_, waypoints_.size() - 1)];
        std::vector<double> a = {(w[0] - obs[0]) / 0.1, (w[1] - obs[1]) / 0.1};
        for (auto& x : a) x = std::min(std::max(x + noise_ * rng.normal(), -1.0), 1.0);
        return a;
    }

    void rewind() { next_ = 0; }

private:
    std::vector<std::vector<double>> waypoints_;
    double noise_;
    std::size_t next_ = 0;
};

// Disjoint fragments: start->midpoint and midpoint->goal, no single
// trajectory covering the full route.
void fill_stitch(SparseMaze& env, std::size_t size, std::uint64_t seed, std::vector<Transition>& out) {
    Rng rng(Rng::derive(seed, "stitch"));
    const auto mid = SparseMaze::midpoint_center();
    WaypointPolicy to_mid({mid}, 0.3);
    WaypointPolicy to_goal({{mid[0], 0.4}, SparseMaze::goal_center()}, 0.3);
    std::uint64_t episode = 0;
    bool first_leg = true;
    while (out.size() < size) {
        std::vector<Transition> frag;
        bool ok = false;
        if (first_leg) {
            to_mid.rewind();
            auto obs = env.reset(Rng::derive(seed, ++episode));
            for (int t = 0; t < env.spec().max_episode_steps; ++t) {
                auto a = to_mid(obs, rng);
                StepResult res = env.step(a);
                frag.push_back(Transition{obs, a, res.reward, res.obs, res.terminal});
                obs = res.obs;
                if (SparseMaze::in_goal_cell(obs[0], obs[1]) || res.done()) break;
                // Fragment ends inside the midpoint cell, before any route
                // to the goal exists.
                if (std::abs(obs[0] - mid[0]) < 0.2 && std::abs(obs[1] - mid[1]) < 0.2) {
                    ok = true;
                    break;
                }
            }
        } else {
            to_goal.rewind();
            std::vector<double> start = {mid[0] + rng.uniform(-0.12, 0.12), mid[1] + rng.uniform(-0.12, 0.12)};
            auto obs = env.reset_at(start);
            bool touched_start_cell = false;
            for (int t = 0; t < env.spec().max_episode_steps; ++t) {
                auto a = to_goal(obs, rng);
                StepResult res = env.step(a);
                frag.push_back(Transition{obs, a, res.reward, res.obs, res.terminal});
                obs = res.obs;
                touched_start_cell |= SparseMaze::in_start_cell(obs[0], obs[1]);
                if (res.terminal) {
                    ok = !touched_start_cell;
                    break;
                }
                if (res.done()) break;
            }
        }
        if (ok)
            for (auto& t : frag) {
                out.push_back(std::move(t));
                if (out.size() == size) break;
            }
        first_leg = !first_leg;
    }
}

}  // namespace

Tier tier_from_string(const std::string& s) {
    if (s == "random") return Tier::random;
    if (s == "medium") return Tier::medium;
    if (s == "medium-replay") return Tier::medium_replay;
    if (s == "stitch") return Tier::stitch;
    throw std::runtime_error("unknown tier '" + s + "'");
}

std::string tier_to_string(Tier t) {
    switch (t) {
        case Tier::random: return "random";
        case Tier::medium: return "medium";
        case Tier::medium_replay: return "medium-replay";
        default: return "stitch";
    }
}

NormStats NormStats::identity(std::size_t dim) {
    NormStats s;
    s.mean.assign(dim, 0.0);
    s.std_dev.assign(dim, 1.0);
    s.enabled = false;
    return s;
}

std::vector<double> normalize_state(const NormStats& stats, std::span<const double> s) {
    check(s.size() == stats.mean.size(), "normalize_state: dim mismatch");
    std::vector<double> out(s.begin(), s.end());
    if (!stats.enabled) return out;
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = (out[j] - stats.mean[j]) / stats.std_dev[j];
    return out;
}

ReturnRefs return_refs_for(const std::string& env_name) {
    // Measured once and committed: uniform-random policy over 500 (dense) /
    // 1000 (sparse) episodes; online TD3 trained 30k steps, 200 episodes.
    if (env_name == "pointmass-dense") return {-98.3, -4.44};
    if (env_name == "maze-sparse") return {0.025, 1.0};
    throw std::runtime_error("no return references for environment '" + env_name + "'");
}

double normalized_score(const std::string& env_name, double raw_return) {
    const ReturnRefs refs = return_refs_for(env_name);
    return (raw_return - refs.random_return) / (refs.expert_return - refs.random_return);
}

OfflineDataset generate_dataset(Env& env, Tier tier, std::size_t size, std::uint64_t seed) {
    check(size >= kMinDatasetSize, "generate_dataset: size must be at least " + std::to_string(kMinDatasetSize));
    OfflineDataset ds;
    ds.env_name = env.spec().name;
    ds.tier = tier;
    ds.state_dim = env.spec().state_dim;
    ds.action_dim = env.spec().action_dim;

    const bool sparse = env.spec().sparse_reward;
    if (tier == Tier::stitch) {
        check(sparse, "generate_dataset: stitch tier is defined for the sparse maze only");
        auto* maze = dynamic_cast<SparseMaze*>(&env);
        check(maze != nullptr, "generate_dataset: stitch tier needs the maze environment");
        fill_stitch(*maze, size, seed, ds.transitions);
    } else if (tier == Tier::random) {
        const EnvSpec& spec = env.spec();
        fill_with_policy(env, size, seed, ds.transitions,
                         [&spec](std::span<const double>, Rng& rng) { return uniform_action(spec, rng); });
    } else {
        check(!sparse, "generate_dataset: tier '" + tier_to_string(tier) +
                           "' needs the dense environment (online training on sparse reward is not supported)");
        MediumPolicy mp = train_medium_policy(env, Rng::derive(seed, "medium"));
        if (tier == Tier::medium) {
            const Agent& agent = mp.agent;
            const double bound = env.spec().action_bound;
            const double medium_mean =
                fill_with_policy(env, size, Rng::derive(seed, "medium.fill"), ds.transitions,
                                 [&agent, bound](std::span<const double> obs, Rng& rng) {
                                     auto a = agent.act(obs);
                                     for (auto& x : a)
                                         x = std::min(std::max(x + kMediumExplNoise * rng.normal(), -bound), bound);
                                     return a;
                                 });
            // Tier ordering (random << medium) checked with the generator's
            // own measurements.
            std::vector<Transition> probe;
            const EnvSpec& spec = env.spec();
            const double random_mean =
                fill_with_policy(env, 2000, Rng::derive(seed, "random.probe"), probe,
                                 [&spec](std::span<const double>, Rng& rng) { return uniform_action(spec, rng); });
            check(random_mean < medium_mean,
                  "generate_dataset: medium rollouts did not beat the random policy");
        } else {
            check(mp.replay.size() >= size,
                  "generate_dataset: medium-replay accumulated fewer transitions than requested");
            for (std::size_t i = 0; i < size; ++i)
                ds.transitions.push_back(mp.replay[i * mp.replay.size() / size]);
        }
    }

    compute_stats(ds, !sparse);
    return ds;
}

void save_dataset(const OfflineDataset& ds, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    check(os.good(), "dataset: cannot open '" + path + "' for writing");
    os.write(kMagic, 8);
    write_u32(os, static_cast<std::uint32_t>(ds.env_name.size()));
    os.write(ds.env_name.data(), static_cast<std::streamsize>(ds.env_name.size()));
    os.put(static_cast<char>(ds.tier));
    write_u64(os, ds.transitions.size());
    write_u32(os, static_cast<std::uint32_t>(ds.state_dim));
    write_u32(os, static_cast<std::uint32_t>(ds.action_dim));
    os.put(ds.stats.enabled ? 1 : 0);
    check(ds.stats.mean.size() == ds.state_dim && ds.stats.std_dev.size() == ds.state_dim,
          "dataset: stats dim mismatch");
    for (double x : ds.stats.mean) write_f64(os, x);
    for (double x : ds.stats.std_dev) write_f64(os, x);
    for (const auto& t : ds.transitions)
        for (double x : t.s) write_f64(os, x);
    for (const auto& t : ds.transitions)
        for (double x : t.a) write_f64(os, x);
    for (const auto& t : ds.transitions) write_f64(os, t.r);
    for (const auto& t : ds.transitions)
        for (double x : t.s2) write_f64(os, x);
    for (const auto& t : ds.transitions) os.put(t.done ? 1 : 0);
    check(os.good(), "dataset: write failed for '" + path + "'");
}

OfflineDataset load_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    check(is.good(), "dataset: cannot open '" + path + "'");
    char magic[8];
    is.read(magic, 8);
    check(is.good() && std::memcmp(magic, kMagic, 8) == 0, "dataset: bad magic in '" + path + "'");
    OfflineDataset ds;
    const std::uint32_t name_len = read_u32(is);
    ds.env_name.resize(name_len);
    is.read(ds.env_name.data(), name_len);
    check(is.good(), "dataset: truncated file");
    const int tier_byte = is.get();
    check(tier_byte >= 0 && tier_byte <= 3, "dataset: bad tier tag");
    ds.tier = static_cast<Tier>(tier_byte);
    const std::uint64_t count = read_u64(is);
    ds.state_dim = read_u32(is);
    ds.action_dim = read_u32(is);
    const int enabled = is.get();
    check(enabled == 0 || enabled == 1, "dataset: bad normalization flag");
    ds.stats.enabled = enabled == 1;
    ds.stats.mean.resize(ds.state_dim);
    ds.stats.std_dev.resize(ds.state_dim);
    for (auto& x : ds.stats.mean) x = read_f64(is);
    for (auto& x : ds.stats.std_dev) x = read_f64(is);
    ds.transitions.assign(count, Transition{});
    for (auto& t : ds.transitions) {
        t.s.resize(ds.state_dim);
        for (auto& x : t.s) x = read_f64(is);
    }
    for (auto& t : ds.transitions) {
        t.a.resize(ds.action_dim);
        for (auto& x : t.a) x = read_f64(is);
    }
    for (auto& t : ds.transitions) t.r = read_f64(is);
    for (auto& t : ds.transitions) {
        t.s2.resize(ds.state_dim);
        for (auto& x : t.s2) x = read_f64(is);
    }
    for (auto& t : ds.transitions) {
        const int b = is.get();
        check(b == 0 || b == 1, "dataset: truncated file or bad done flag");
        t.done = b == 1;
    }
    return ds;
}

}  // namespace sung
