#include "sung/adam.hpp"

#include <cmath>

namespace sung {

Adam::Adam(const ParamTree& params, AdamConfig cfg) : cfg_(cfg) {
    check(!params.empty(), "adam: empty parameter tree");
    for (const auto& [name, p] : params)
        slots_.push_back(Slot{Tensor::zeros(p.value.shape), Tensor::zeros(p.value.shape)});
}

void Adam::step(ParamTree& params) {
    check(params.size() == slots_.size(), "adam: tree changed since construction");
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    std::size_t k = 0;
    for (auto& [name, p] : params) {
        Slot& slot = slots_[k++];
        const std::size_t n = p.value.numel();
        for (std::size_t i = 0; i < n; ++i) {
            const double g = p.grad.v[i];
            slot.m.v[i] = cfg_.beta1 * slot.m.v[i] + (1.0 - cfg_.beta1) * g;
            slot.v.v[i] = cfg_.beta2 * slot.v.v[i] + (1.0 - cfg_.beta2) * g * g;
            const double mhat = slot.m.v[i] / bc1;
            const double vhat = slot.v.v[i] / bc2;
            p.value.v[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
        check_all_finite(p.value, "adam step");
    }
}

}  // namespace sung
