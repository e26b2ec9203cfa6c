#include "sung/numerics.hpp"

#include <algorithm>
#include <cmath>

#include "sung/param_tree.hpp"

namespace sung {

std::vector<double> softmax_temp(const std::vector<double>& logits, double alpha) {
    check(alpha > 0.0, "softmax_temp: alpha must be positive");
    check(!logits.empty(), "softmax_temp: empty logits");
    for (double l : logits) check(std::isfinite(l), "softmax_temp: non-finite logit");
    const double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> p(logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp((logits[i] - mx) / alpha);
        z += p[i];
    }
    for (double& x : p) x /= z;
    return p;
}

double logsumexp(const std::vector<double>& values) {
    check(!values.empty(), "logsumexp: empty input");
    const double mx = *std::max_element(values.begin(), values.end());
    double acc = 0.0;
    for (double x : values) acc += std::exp(x - mx);
    return mx + std::log(acc);
}

Tensor gaussian_reparam_eval(const Tensor& mean, const Tensor& log_std, const Tensor& noise) {
    check(mean.same_shape(log_std) && mean.same_shape(noise), "gaussian_reparam: shape mismatch");
    Tensor out = mean;
    for (std::size_t i = 0; i < out.numel(); ++i) out.v[i] += std::exp(log_std.v[i]) * noise.v[i];
    check_all_finite(out, "gaussian_reparam");
    return out;
}

void polyak_update(ParamTree& target, const ParamTree& source, double tau) {
    check(tau >= 0.0 && tau <= 1.0, "polyak: tau out of [0,1]");
    check(target.size() == source.size(), "polyak: tree size mismatch");
    auto it = source.begin();
    for (auto& [name, p] : target) {
        check(name == it->first, "polyak: tree name mismatch at '" + name + "'");
        const Tensor& src = it->second.value;
        check(p.value.same_shape(src), "polyak: shape mismatch at '" + name + "'");
        for (std::size_t i = 0; i < src.numel(); ++i)
            p.value.v[i] = (1.0 - tau) * p.value.v[i] + tau * src.v[i];
        ++it;
    }
}

}  // namespace sung
