#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "sung/dataset.hpp"
#include "sung/rng.hpp"

using namespace sung;

namespace {

OfflineDataset make_random_ds() {
    static OfflineDataset ds = [] {
        auto env = make_env("pointmass-dense");
        return generate_dataset(*env, Tier::random, 2000, 7);
    }();
    return ds;
}

}  // namespace

TEST_CASE("normalize_state: identity when disabled, exact arithmetic when enabled") {
    NormStats off = NormStats::identity(2);
    auto same = normalize_state(off, std::vector<double>{0.3, -0.7});
    CHECK(same == std::vector<double>{0.3, -0.7});

    NormStats on;
    on.enabled = true;
    on.mean = {0.0, 1.0};
    on.std_dev = {2.0, 1.0};
    auto z = normalize_state(on, std::vector<double>{4.0, 1.0});
    CHECK(z[0] == doctest::Approx(2.0));
    CHECK(z[1] == doctest::Approx(0.0));

    auto at_mean = normalize_state(on, std::vector<double>{0.0, 1.0});
    CHECK(at_mean[0] == 0.0);
    CHECK(at_mean[1] == 0.0);

    CHECK_THROWS(normalize_state(on, std::vector<double>{1.0}));
}

TEST_CASE("generated dataset: exact size, finite rewards, matching dims") {
    OfflineDataset ds = make_random_ds();
    CHECK(ds.size() == 2000);
    CHECK(ds.state_dim == 2);
    CHECK(ds.action_dim == 2);
    CHECK(ds.tier == Tier::random);
    for (const auto& t : ds.transitions) {
        REQUIRE(t.s.size() == 2);
        REQUIRE(t.a.size() == 2);
        REQUIRE(t.s2.size() == 2);
        CHECK(std::isfinite(t.r));
    }
}

TEST_CASE("generate_dataset rejects undersized requests and unsupported tiers") {
    auto env = make_env("pointmass-dense");
    CHECK_THROWS(generate_dataset(*env, Tier::random, 10, 1));
    auto maze = make_env("maze-sparse");
    CHECK_THROWS(generate_dataset(*maze, Tier::medium, 2000, 1));
    CHECK_THROWS(generate_dataset(*env, Tier::stitch, 2000, 1));
    CHECK_THROWS(tier_from_string("expert"));
}

TEST_CASE("normalization stats: dense datasets are standardized, sparse are not") {
    OfflineDataset ds = make_random_ds();
    REQUIRE(ds.stats.enabled);
    const std::size_t n = ds.size();
    for (std::size_t j = 0; j < 2; ++j) {
        double mean = 0.0, var = 0.0;
        for (const auto& t : ds.transitions) mean += normalize_state(ds.stats, t.s)[j];
        mean /= static_cast<double>(n);
        for (const auto& t : ds.transitions) {
            const double d = normalize_state(ds.stats, t.s)[j] - mean;
            var += d * d;
        }
        var /= static_cast<double>(n);
        CHECK(std::abs(mean) < 1e-9);
        CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-9);
    }

    auto maze = make_env("maze-sparse");
    auto stitch = generate_dataset(*maze, Tier::stitch, 1500, 3);
    CHECK(!stitch.stats.enabled);
}

TEST_CASE("stitch tier: no trajectory contains both start and goal cells") {
    auto maze = make_env("maze-sparse");
    auto ds = generate_dataset(*maze, Tier::stitch, 3000, 11);
    // Trajectory boundaries: a new trajectory begins where s_t differs from
    // the previous transition's s2.
    bool saw_start = false, saw_goal = false;
    std::size_t full_trajectories = 0;
    auto flush = [&]() {
        if (saw_start && saw_goal) ++full_trajectories;
        saw_start = saw_goal = false;
    };
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const Transition& t = ds.transitions[i];
        if (i > 0 && ds.transitions[i - 1].s2 != t.s) flush();
        saw_start |= SparseMaze::in_start_cell(t.s[0], t.s[1]);
        saw_goal |= SparseMaze::in_goal_cell(t.s2[0], t.s2[1]);
    }
    flush();
    CHECK(full_trajectories == 0);

    // Both fragment families are present: some trajectories start in the
    // start cell, and some transitions terminate at the goal.
    std::size_t goal_hits = 0;
    for (const auto& t : ds.transitions) goal_hits += t.done ? 1 : 0;
    CHECK(goal_hits > 0);
}

TEST_CASE("save/load round trip is the identity on all fields") {
    namespace fs = std::filesystem;
    const std::string path = (fs::temp_directory_path() / "sung_ds_roundtrip.ds").string();
    OfflineDataset ds = make_random_ds();
    save_dataset(ds, path);
    OfflineDataset back = load_dataset(path);
    CHECK(back.env_name == ds.env_name);
    CHECK(back.tier == ds.tier);
    CHECK(back.state_dim == ds.state_dim);
    CHECK(back.action_dim == ds.action_dim);
    CHECK(back.stats.enabled == ds.stats.enabled);
    CHECK(back.stats.mean == ds.stats.mean);
    CHECK(back.stats.std_dev == ds.stats.std_dev);
    REQUIRE(back.size() == ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        CHECK(back.transitions[i].s == ds.transitions[i].s);
        CHECK(back.transitions[i].a == ds.transitions[i].a);
        CHECK(back.transitions[i].r == ds.transitions[i].r);
        CHECK(back.transitions[i].s2 == ds.transitions[i].s2);
        CHECK(back.transitions[i].done == ds.transitions[i].done);
    }
    fs::remove(path);
}

TEST_CASE("load rejects bad magic and truncated files") {
    namespace fs = std::filesystem;
    const std::string path = (fs::temp_directory_path() / "sung_ds_bad.ds").string();
    OfflineDataset ds = make_random_ds();
    save_dataset(ds, path);
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.put('Z');
    }
    CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains("bad magic"), std::runtime_error);

    save_dataset(ds, path);
    fs::resize_file(path, fs::file_size(path) / 2);
    CHECK_THROWS(load_dataset(path));
    fs::remove(path);
}

TEST_CASE("an empty dataset file loads cleanly; the size floor applies on use") {
    namespace fs = std::filesystem;
    const std::string path = (fs::temp_directory_path() / "sung_ds_empty.ds").string();
    OfflineDataset empty;
    empty.env_name = "pointmass-dense";
    empty.tier = Tier::random;
    empty.state_dim = 2;
    empty.action_dim = 2;
    empty.stats = NormStats::identity(2);
    save_dataset(empty, path);
    OfflineDataset back = load_dataset(path);
    CHECK(back.size() == 0);
    CHECK(back.size() < kMinDatasetSize);
    fs::remove(path);
}

TEST_CASE("dataset generation is deterministic in the seed") {
    auto env = make_env("pointmass-dense");
    auto a = generate_dataset(*env, Tier::random, 1200, 5);
    auto b = generate_dataset(*env, Tier::random, 1200, 5);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.transitions[i].s == b.transitions[i].s);
        CHECK(a.transitions[i].a == b.transitions[i].a);
    }
    auto c = generate_dataset(*env, Tier::random, 1200, 6);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.size() && !any_diff; ++i)
        any_diff = a.transitions[i].s != c.transitions[i].s;
    CHECK(any_diff);
}

TEST_CASE("medium tier outperforms random (generator-measured ordering)") {
    auto env = make_env("pointmass-dense");
    // generate_dataset itself asserts random < medium with its own probe;
    // also verify externally via per-episode dataset returns.
    auto medium = generate_dataset(*env, Tier::medium, 1000, 19);
    auto mean_return = [](const OfflineDataset& ds) {
        double total = 0.0, ep = 0.0;
        int episodes = 0, steps = 0;
        for (const auto& t : ds.transitions) {
            ep += t.r;
            if (t.done || ++steps == 100) {
                total += ep;
                ++episodes;
                ep = 0.0;
                steps = 0;
            }
        }
        return episodes > 0 ? total / episodes : ep;
    };
    OfflineDataset random_ds = make_random_ds();
    CHECK(mean_return(medium) > mean_return(random_ds));
}

TEST_CASE("normalized_score maps the reference returns to 0 and 1") {
    const ReturnRefs refs = return_refs_for("pointmass-dense");
    CHECK(normalized_score("pointmass-dense", refs.random_return) == doctest::Approx(0.0));
    CHECK(normalized_score("pointmass-dense", refs.expert_return) == doctest::Approx(1.0));
    CHECK_THROWS(return_refs_for("unknown-env"));
}
