#include "sung/mlp.hpp"

#include <cmath>

namespace sung {

void MlpSpec::validate() const {
    check(input_dim > 0 && output_dim > 0, "mlp spec: dims must be positive");
    for (auto h : hidden) check(h > 0, "mlp spec: hidden widths must be positive");
}

namespace {

std::vector<std::pair<std::size_t, std::size_t>> layer_dims(const MlpSpec& spec) {
    std::vector<std::pair<std::size_t, std::size_t>> dims;
    std::size_t prev = spec.input_dim;
    for (auto h : spec.hidden) {
        dims.emplace_back(prev, h);
        prev = h;
    }
    dims.emplace_back(prev, spec.head_dim());
    return dims;
}

std::string wname(const std::string& prefix, std::size_t i) { return prefix + "l" + std::to_string(i) + ".W"; }
std::string bname(const std::string& prefix, std::size_t i) { return prefix + "l" + std::to_string(i) + ".b"; }

}  // namespace

void mlp_init(ParamTree& params, const MlpSpec& spec, Rng& rng, const std::string& prefix) {
    spec.validate();
    auto dims = layer_dims(spec);
    for (std::size_t i = 0; i < dims.size(); ++i) {
        auto [in, out] = dims[i];
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        Tensor w = Tensor::zeros({in, out});
        for (double& x : w.v) x = rng.uniform(-bound, bound);
        Tensor b = Tensor::zeros({out});
        for (double& x : b.v) x = rng.uniform(-bound, bound);
        params.add(wname(prefix, i), std::move(w));
        params.add(bname(prefix, i), std::move(b));
    }
}

namespace {

Var mlp_forward_impl(Tape& tape, ParamTree* mutable_params, const ParamTree& params, const MlpSpec& spec,
                     Var input, const std::string& prefix) {
    check(tape.value(input).rank() == 2 && tape.value(input).shape[1] == spec.input_dim,
          "mlp forward: input dim mismatch");
    auto dims = layer_dims(spec);
    const Tape::LinearAct hidden_act =
        spec.activation == Activation::tanh ? Tape::LinearAct::tanh : Tape::LinearAct::relu;
    Var x = input;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        Var w = mutable_params ? tape.param(mutable_params->at(wname(prefix, i)))
                               : tape.constant(params.at(wname(prefix, i)).value);
        Var b = mutable_params ? tape.param(mutable_params->at(bname(prefix, i)))
                               : tape.constant(params.at(bname(prefix, i)).value);
        x = tape.linear(x, w, b, i + 1 < dims.size() ? hidden_act : Tape::LinearAct::none);
    }
    if (spec.transform == OutputTransform::tanh_squash) x = tape.tanh(x);
    return x;
}

}  // namespace

Var mlp_forward(Tape& tape, ParamTree& params, const MlpSpec& spec, Var input, const std::string& prefix) {
    return mlp_forward_impl(tape, &params, params, spec, input, prefix);
}

Var mlp_forward_frozen(Tape& tape, const ParamTree& params, const MlpSpec& spec, Var input,
                       const std::string& prefix) {
    return mlp_forward_impl(tape, nullptr, params, spec, input, prefix);
}

Tensor mlp_eval(const ParamTree& params, const MlpSpec& spec, const Tensor& input, const std::string& prefix) {
    check(input.rank() == 2 && input.shape[1] == spec.input_dim, "mlp eval: input dim mismatch");
    auto dims = layer_dims(spec);
    Tensor x = input;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        const Tensor& w = params.at(wname(prefix, i)).value;
        const Tensor& b = params.at(bname(prefix, i)).value;
        const std::size_t m = x.shape[0], in = w.shape[0], out = w.shape[1];
        Tensor y = Tensor::zeros({m, out});
        for (std::size_t r = 0; r < m; ++r) {
            double* yrow = y.v.data() + r * out;
            for (std::size_t j = 0; j < out; ++j) yrow[j] = b.v[j];
            const double* xrow = x.v.data() + r * in;
            for (std::size_t l = 0; l < in; ++l) {
                const double xv = xrow[l];
                const double* wrow = w.v.data() + l * out;
                for (std::size_t j = 0; j < out; ++j) yrow[j] += xv * wrow[j];
            }
        }
        if (i + 1 < dims.size()) {
            if (spec.activation == Activation::tanh)
                for (double& v : y.v) v = std::tanh(v);
            else
                for (double& v : y.v) v = v > 0.0 ? v : 0.0;
        }
        x = std::move(y);
    }
    if (spec.transform == OutputTransform::tanh_squash)
        for (double& v : x.v) v = std::tanh(v);
    check_all_finite(x, "mlp eval");
    return x;
}

}  // namespace sung
