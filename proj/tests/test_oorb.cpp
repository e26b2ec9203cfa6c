#include <doctest.h>

#include <cmath>

#include "sung/oorb.hpp"

using namespace sung;

namespace {

Transition tagged(double tag) {
    return Transition{{tag, 0.0}, {0.0, 0.0}, tag, {tag, 1.0}, false};
}

OfflineDataset tiny_dataset(std::size_t n) {
    OfflineDataset ds;
    ds.env_name = "pointmass-dense";
    ds.state_dim = 2;
    ds.action_dim = 2;
    ds.stats = NormStats::identity(2);
    for (std::size_t i = 0; i < n; ++i) ds.transitions.push_back(tagged(1000.0 + i));
    return ds;
}

}  // namespace

TEST_CASE("push lands in both buffers") {
    Oorb oorb(8, 64, 0.5);
    oorb.preload(tiny_dataset(10));
    CHECK(oorb.online().size() == 0);
    CHECK(oorb.offline().size() == 10);
    oorb.push(tagged(1.0));
    CHECK(oorb.online().size() == 1);
    CHECK(oorb.offline().size() == 11);
    CHECK(oorb.online().at(0).r == 1.0);
    CHECK(oorb.offline().at(10).r == 1.0);
}

TEST_CASE("capacity-1 online buffer keeps only the newest push") {
    Oorb oorb(1, 4, 1.0);
    oorb.push(tagged(1.0));
    oorb.push(tagged(2.0));
    CHECK(oorb.online().size() == 1);
    CHECK(oorb.online().at(0).r == 2.0);
}

TEST_CASE("fifo eviction holds exhaustively for capacities up to 8") {
    for (std::size_t cap = 1; cap <= 8; ++cap) {
        for (std::size_t pushes = 0; pushes <= 3 * cap + 2; ++pushes) {
            RingBuffer buf(cap);
            for (std::size_t i = 0; i < pushes; ++i) buf.push(tagged(static_cast<double>(i)));
            const std::size_t expect = std::min(cap, pushes);
            REQUIRE(buf.size() == expect);
            for (std::size_t i = 0; i < expect; ++i)
                CHECK(buf.at(i).r == static_cast<double>(pushes - expect + i));
        }
    }
}

TEST_CASE("p=0 samples only the offline buffer; p=1 only the online buffer") {
    {
        Oorb oorb(16, 64, 0.0);
        oorb.preload(tiny_dataset(8));
        oorb.push(tagged(-5.0));
        Rng rng(3);
        for (int i = 0; i < 200; ++i) {
            bool from_online = false;
            oorb.draw(rng, from_online);
            CHECK(!from_online);
        }
    }
    {
        Oorb oorb(16, 64, 1.0);
        oorb.preload(tiny_dataset(8));
        oorb.push(tagged(-5.0));
        Rng rng(4);
        for (int i = 0; i < 200; ++i) {
            bool from_online = false;
            const Transition& t = oorb.draw(rng, from_online);
            CHECK(from_online);
            CHECK(t.r == -5.0);
        }
    }
}

TEST_CASE("empty online buffer falls back to offline draws") {
    Oorb oorb(16, 64, 1.0);
    oorb.preload(tiny_dataset(4));
    Rng rng(5);
    bool from_online = true;
    const Transition& t = oorb.draw(rng, from_online);
    CHECK(!from_online);
    CHECK(t.r >= 1000.0);
}

TEST_CASE("sampling with both buffers empty throws") {
    Oorb oorb(4, 4, 0.5);
    Rng rng(6);
    CHECK_THROWS(oorb.draw(rng));
}

TEST_CASE("sampled transitions are bit-identical to stored ones") {
    Oorb oorb(64, 256, 0.3);
    Rng fill(7);
    std::vector<Transition> pushed;
    for (int i = 0; i < 50; ++i) {
        Transition t{{fill.normal(), fill.normal()},
                     {fill.normal(), fill.normal()},
                     fill.normal(),
                     {fill.normal(), fill.normal()},
                     i % 2 == 0};
        pushed.push_back(t);
        oorb.push(t);
    }
    Rng rng(8);
    for (int i = 0; i < 300; ++i) {
        const Transition& t = oorb.draw(rng);
        bool found = false;
        for (const auto& p : pushed)
            if (p.s == t.s && p.a == t.a && p.r == t.r && p.s2 == t.s2 && p.done == t.done) {
                found = true;
                break;
            }
        CHECK(found);
    }
}

TEST_CASE("mixture ratio converges to p_oorb (3 sigma binomial bound)") {
    const double p = 0.1;
    const std::size_t draws = 100000;
    Oorb oorb(5000, 200000, p);
    oorb.preload(tiny_dataset(64));
    for (int i = 0; i < 32; ++i) oorb.push(tagged(static_cast<double>(i)));
    Rng rng(9);
    std::size_t online_hits = 0;
    for (std::size_t i = 0; i < draws; ++i) {
        bool from_online = false;
        oorb.draw(rng, from_online);
        online_hits += from_online ? 1 : 0;
    }
    const double frac = static_cast<double>(online_hits) / draws;
    const double sigma = std::sqrt(p * (1.0 - p) / draws);
    CHECK(std::abs(frac - p) < 3.0 * sigma);
}
