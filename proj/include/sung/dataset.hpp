#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "sung/env.hpp"
#include "sung/tensor.hpp"

namespace sung {

struct Transition {
    std::vector<double> s;
    std::vector<double> a;
    double r = 0.0;
    std::vector<double> s2;
    bool done = false;  // true termination only; step-limit cutoffs stay false
};

enum class Tier : std::uint8_t { random = 0, medium = 1, medium_replay = 2, stitch = 3 };

Tier tier_from_string(const std::string& s);
std::string tier_to_string(Tier t);

struct NormStats {
    std::vector<double> mean;
    std::vector<double> std_dev;
    bool enabled = false;

    static NormStats identity(std::size_t dim);
};

std::vector<double> normalize_state(const NormStats& stats, std::span<const double> s);

struct OfflineDataset {
    std::string env_name;
    Tier tier = Tier::random;
    std::size_t state_dim = 0;
    std::size_t action_dim = 0;
    std::vector<Transition> transitions;
    NormStats stats;

    std::size_t size() const { return transitions.size(); }
};

// Behavior tiers:
//   random        uniform-random policy rollouts
//   medium        rollouts of a TD3 policy trained online until its
//                 normalized score first reaches 0.5, then frozen
//   medium-replay the whole replay buffer accumulated while training that
//                 medium policy (strided down to `size`)
//   stitch        (maze only) disjoint start->midpoint and midpoint->goal
//                 fragments; no single trajectory covers the full route
// State-normalization stats are computed from this dataset's states and are
// enabled for the dense environment only.
OfflineDataset generate_dataset(Env& env, Tier tier, std::size_t size, std::uint64_t seed);

// Bit-exact binary round trip, magic "SUNGDS1\0", columnar payload.
void save_dataset(const OfflineDataset& dataset, const std::string& path);
OfflineDataset load_dataset(const std::string& path);

// Minimum usable size; checked where a dataset is consumed, not at load.
constexpr std::size_t kMinDatasetSize = 1000;

// Reference returns used for normalized scores and the medium-tier stopping
// rule: score = (return - random) / (expert - random).
struct ReturnRefs {
    double random_return;
    double expert_return;
};
ReturnRefs return_refs_for(const std::string& env_name);
double normalized_score(const std::string& env_name, double raw_return);

}  // namespace sung
