#include <doctest.h>

#include <cmath>

#include "sung/explore.hpp"
#include "sung/numerics.hpp"

using namespace sung;

namespace {

EnvSpec toy_env() { return EnvSpec{"pointmass-dense", 2, 2, 1.0, 100, false}; }

struct Rig {
    AgentConfig cfg;
    Actor actor;
    Critic critic;
    VaeModel vae;
    UncertaintyEstimator est;

    explicit Rig(Backbone backbone)
        : cfg([&] {
              AgentConfig c;
              c.backbone = backbone;
              c.regularizer = backbone == Backbone::td3 ? Regularizer::bc : Regularizer::cql;
              c.hidden = 8;
              c.layers = 2;
              return c;
          }()),
          actor(make_actor(cfg, toy_env(), 1)),
          critic(make_critic(cfg, toy_env(), 2)),
          vae(make_vae(2, 2, 8, 0.5, 3)),
          est(UncertaintyEstimator::from_vae(vae)) {}
};

CandidateSet fixed_candidates(std::vector<double> q, std::vector<double> u) {
    CandidateSet set;
    const std::size_t n = q.size();
    set.actions = Tensor::zeros({n, 2});
    for (std::size_t i = 0; i < n; ++i) set.actions.v[i * 2] = static_cast<double>(i);
    set.q = std::move(q);
    set.u = std::move(u);
    return set;
}

}  // namespace

TEST_CASE("generate_candidates: delta=0 collapses all candidates onto pi(s)") {
    Rig rig(Backbone::td3);
    ExplorationConfig cfg;
    cfg.n = 16;
    cfg.k = 4;
    cfg.delta = 0.0;
    Rng rng(5);
    std::vector<double> s = {0.2, -0.4};
    auto set = generate_candidates(rig.actor, rig.critic, rig.est, s, cfg, rng);
    auto base = select_action(rig.actor, s);
    REQUIRE(set.size() == 16);
    for (std::size_t i = 0; i < set.size(); ++i) {
        CHECK(set.actions.v[i * 2] == doctest::Approx(base[0]));
        CHECK(set.actions.v[i * 2 + 1] == doctest::Approx(base[1]));
    }
}

TEST_CASE("generate_candidates: N=100 exactly, all inside the action box") {
    for (auto backbone : {Backbone::td3, Backbone::sac}) {
        Rig rig(backbone);
        ExplorationConfig cfg;
        cfg.n = 100;
        cfg.k = 10;
        cfg.delta = 5.0;  // large noise still clips
        Rng rng(6);
        auto set = generate_candidates(rig.actor, rig.critic, rig.est, std::vector<double>{0.1, 0.1}, cfg, rng);
        CHECK(set.size() == 100);
        for (double a : set.actions.v) CHECK(std::abs(a) <= 1.0);
        CHECK(set.q.size() == 100);
        CHECK(set.u.size() == 100);
    }
}

TEST_CASE("candidate Q values use the min over both critics") {
    Rig rig(Backbone::td3);
    for (auto& [name, p] : rig.critic.q1) std::fill(p.value.v.begin(), p.value.v.end(), 0.0);
    for (auto& [name, p] : rig.critic.q2) std::fill(p.value.v.begin(), p.value.v.end(), 0.0);
    rig.critic.q1.at("q1.l2.b").value.v[0] = 3.0;
    rig.critic.q2.at("q2.l2.b").value.v[0] = -1.0;
    ExplorationConfig cfg;
    cfg.n = 4;
    cfg.k = 2;
    Rng rng(7);
    auto set = generate_candidates(rig.actor, rig.critic, rig.est, std::vector<double>{0.0, 0.0}, cfg, rng);
    for (double q : set.q) CHECK(q == doctest::Approx(-1.0));
}

TEST_CASE("bi-level selection: k=1 reduces to argmax of the ranking criterion") {
    auto set = fixed_candidates({0.1, 2.0, -1.0, 0.7}, {5.0, 1.0, 9.0, 2.0});
    Rng rng(8);
    ExplorationConfig cfg;
    cfg.n = 4;
    cfg.k = 1;
    SUBCASE("qu picks argmax-Q") {
        cfg.order = RankOrder::q_first;
        for (int i = 0; i < 20; ++i) {
            auto a = select_behavior_action(set, cfg, rng);
            CHECK(a[0] == 1.0);  // index 1 has the highest Q
        }
    }
    SUBCASE("uq picks argmax-U") {
        cfg.order = RankOrder::u_first;
        for (int i = 0; i < 20; ++i) {
            auto a = select_behavior_action(set, cfg, rng);
            CHECK(a[0] == 2.0);  // index 2 has the highest U
        }
    }
}

TEST_CASE("ranking ties break by candidate index") {
    auto set = fixed_candidates({1.0, 1.0, 1.0, 0.0}, {0.0, 0.0, 0.0, 0.0});
    ExplorationConfig cfg;
    cfg.n = 4;
    cfg.k = 2;
    cfg.order = RankOrder::q_first;
    auto finalists = finalist_indices(set, cfg);
    CHECK(finalists == std::vector<std::size_t>{0, 1});
}

TEST_CASE("selected action always belongs to the candidate set") {
    Rig rig(Backbone::sac);
    ExplorationConfig cfg;
    cfg.n = 20;
    cfg.k = 5;
    cfg.order = RankOrder::u_first;
    Rng rng(9);
    for (int trial = 0; trial < 50; ++trial) {
        auto set = generate_candidates(rig.actor, rig.critic, rig.est,
                                       std::vector<double>{rng.uniform(-1, 1), rng.uniform(-1, 1)}, cfg, rng);
        auto a = select_behavior_action(set, cfg, rng);
        bool member = false;
        for (std::size_t i = 0; i < set.size() && !member; ++i)
            member = set.actions.v[i * 2] == a[0] && set.actions.v[i * 2 + 1] == a[1];
        CHECK(member);
    }
}

TEST_CASE("k=N qu: empirical selection frequencies match softmax(U/alpha)") {
    // Fixed scores; 1e5 draws; 3-sigma multinomial bounds.
    auto set = fixed_candidates({1.0, 2.0, 3.0, 4.0, 5.0}, {0.3, -0.1, 0.9, 0.5, 0.0});
    ExplorationConfig cfg;
    cfg.n = 5;
    cfg.k = 5;
    cfg.order = RankOrder::q_first;
    cfg.alpha = 1.0;
    auto finalists = finalist_indices(set, cfg);
    auto probs = finalist_probs(set, cfg, finalists);

    const std::size_t draws = 100000;
    Rng rng(10);
    std::vector<std::size_t> hits(5, 0);
    for (std::size_t d = 0; d < draws; ++d) {
        auto a = select_behavior_action(set, cfg, rng);
        ++hits[static_cast<std::size_t>(a[0])];
    }
    // finalists are sorted by Q desc: index order 4,3,2,1,0
    for (std::size_t f = 0; f < finalists.size(); ++f) {
        const double expect = probs[f];
        const double got = static_cast<double>(hits[finalists[f]]) / draws;
        const double sigma = std::sqrt(expect * (1.0 - expect) / draws);
        CHECK(std::abs(got - expect) < 3.0 * sigma);
    }
}

TEST_CASE("equal sampled-criterion scores give a uniform finalist choice") {
    auto set = fixed_candidates({5.0, 4.0, 3.0, 2.0}, {1.0, 1.0, 1.0, 1.0});
    ExplorationConfig cfg;
    cfg.n = 4;
    cfg.k = 3;
    cfg.order = RankOrder::q_first;
    auto finalists = finalist_indices(set, cfg);
    auto probs = finalist_probs(set, cfg, finalists);
    for (double p : probs) CHECK(p == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("softmax-stage scale invariance at the probability level") {
    auto set = fixed_candidates({1.0, 2.0, 3.0, 4.0}, {0.4, -0.7, 1.3, 0.2});
    ExplorationConfig cfg;
    cfg.n = 4;
    cfg.k = 4;
    cfg.order = RankOrder::q_first;
    cfg.alpha = 0.7;
    auto finalists = finalist_indices(set, cfg);
    auto base = finalist_probs(set, cfg, finalists);
    const double c = 3.25;
    auto scaled_set = set;
    for (double& u : scaled_set.u) u *= c;
    ExplorationConfig scaled_cfg = cfg;
    scaled_cfg.alpha = cfg.alpha * c;
    auto scaled = finalist_probs(scaled_set, scaled_cfg, finalists);
    for (std::size_t i = 0; i < base.size(); ++i) CHECK(std::abs(base[i] - scaled[i]) < 1e-12);
}

TEST_CASE("raising a finalist's sampled score strictly raises its probability") {
    auto set = fixed_candidates({1.0, 2.0, 3.0}, {0.2, 0.5, -0.3});
    ExplorationConfig cfg;
    cfg.n = 3;
    cfg.k = 3;
    cfg.order = RankOrder::q_first;
    auto finalists = finalist_indices(set, cfg);
    auto before = finalist_probs(set, cfg, finalists);
    auto bumped = set;
    bumped.u[1] += 0.4;
    auto after = finalist_probs(bumped, cfg, finalists);
    // index 1 sits at some slot in the finalist order; find it
    for (std::size_t f = 0; f < finalists.size(); ++f)
        if (finalists[f] == 1) CHECK(after[f] > before[f]);
}

TEST_CASE("default ranking orders per backbone") {
    auto td3 = default_order_for(Backbone::td3, Regularizer::bc);
    CHECK(td3.first == RankOrder::q_first);
    CHECK(td3.second == 10);
    auto cql = default_order_for(Backbone::sac, Regularizer::cql);
    CHECK(cql.first == RankOrder::u_first);
    CHECK(cql.second == 20);
    CHECK_THROWS(default_order_for(Backbone::td3, Regularizer::cql));
    CHECK_THROWS(default_order_for(Backbone::sac, Regularizer::none));
}

TEST_CASE("exploration config validation") {
    ExplorationConfig cfg;
    cfg.n = 4;
    cfg.k = 5;
    CHECK_THROWS(cfg.validate());
    cfg.k = 2;
    cfg.alpha = 0.0;
    CHECK_THROWS(cfg.validate());
    cfg.alpha = 1.0;
    cfg.delta = -0.1;
    CHECK_THROWS(cfg.validate());
}
