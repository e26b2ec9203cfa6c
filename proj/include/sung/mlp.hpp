#pragma once
#include <string>
#include <vector>

#include "sung/rng.hpp"
#include "sung/tape.hpp"

namespace sung {

enum class Activation { tanh, relu };
enum class OutputTransform { identity, tanh_squash, gaussian_head };

// A gaussian head doubles the final layer width: columns [0, output_dim)
// carry the mean and [output_dim, 2*output_dim) the log-std.
struct MlpSpec {
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden;
    std::size_t output_dim = 0;
    Activation activation = Activation::relu;
    OutputTransform transform = OutputTransform::identity;

    std::size_t head_dim() const {
        return transform == OutputTransform::gaussian_head ? 2 * output_dim : output_dim;
    }
    void validate() const;
};

// Uniform +-1/sqrt(fan_in) init per layer, drawn from the injected RNG.
// Parameters are named <prefix>l<i>.W / <prefix>l<i>.b in layer order.
void mlp_init(ParamTree& params, const MlpSpec& spec, Rng& rng, const std::string& prefix = "");

// Taped forward pass; backward() on any scalar derived from the result fills
// the gradient slots of `params`.
Var mlp_forward(Tape& tape, ParamTree& params, const MlpSpec& spec, Var input, const std::string& prefix = "");

// Forward pass with the parameters treated as constants: gradients flow
// through the input only. Used where one network is optimized through
// another (actor losses through a frozen critic).
Var mlp_forward_frozen(Tape& tape, const ParamTree& params, const MlpSpec& spec, Var input,
                       const std::string& prefix = "");

// Tape-free forward pass for targets, candidate scoring, and evaluation.
Tensor mlp_eval(const ParamTree& params, const MlpSpec& spec, const Tensor& input, const std::string& prefix = "");

}  // namespace sung
