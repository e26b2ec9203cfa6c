#pragma once
#include <cstdint>

#include "sung/param_tree.hpp"

namespace sung {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Bias-corrected Adam. Moment slots follow the tree's iteration order, so
// updates are deterministic. The caller zeroes gradients between steps.
class Adam {
public:
    Adam(const ParamTree& params, AdamConfig cfg);

    void step(ParamTree& params);

    std::uint64_t steps_taken() const { return step_; }
    AdamConfig& config() { return cfg_; }

private:
    struct Slot {
        Tensor m;
        Tensor v;
    };
    std::vector<Slot> slots_;
    std::uint64_t step_ = 0;
    AdamConfig cfg_;
};

}  // namespace sung
