#pragma once
#include <vector>

#include "sung/tensor.hpp"

namespace sung {

// P(i) = exp(l_i / alpha) / sum_j exp(l_j / alpha), computed with a max
// shift. alpha must be positive.
std::vector<double> softmax_temp(const std::vector<double>& logits, double alpha);

// Numerically stable log(sum(exp(values))). Throws on empty input.
double logsumexp(const std::vector<double>& values);

// mean + exp(log_std) * noise, plain tensor arithmetic (the differentiable
// variant lives on the tape).
Tensor gaussian_reparam_eval(const Tensor& mean, const Tensor& log_std, const Tensor& noise);

}  // namespace sung
