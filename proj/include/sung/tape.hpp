#pragma once
#include <cstdint>
#include <functional>
#include <vector>

#include "sung/param_tree.hpp"
#include "sung/tensor.hpp"

namespace sung {

struct Var {
    std::int32_t idx = -1;
    bool valid() const { return idx >= 0; }
};

// Reverse-mode autodiff over a dynamic tape. A tape is rebuilt for every loss
// evaluation; backward() walks the nodes in reverse construction order and
// accumulates into the gradient slots of any ParamTree leaves bound with
// param(). Every op checks its output for non-finite entries and throws at
// the op that produced them.
class Tape {
public:
    Var constant(Tensor value);
    Var param(Param& p);

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var minimum(Var a, Var b);
    Var matmul(Var a, Var b);          // [m,k] x [k,n] -> [m,n]
    Var add_row(Var m, Var row);       // [m,n] + [n], broadcast over rows
    // act(x W + b) in one node; the layer workhorse.
    enum class LinearAct { none, tanh, relu };
    Var linear(Var x, Var w, Var b, LinearAct act);
    Var scale(Var a, double c);
    Var add_const(Var a, double c);
    Var neg(Var a) { return scale(a, -1.0); }
    Var tanh(Var a);
    Var relu(Var a);
    Var exp(Var a);
    Var log(Var a);
    Var square(Var a);
    Var clamp(Var a, double lo, double hi);
    Var sum(Var a);                    // -> scalar
    Var mean(Var a);                   // -> scalar
    Var row_sum(Var a);                // [m,n] -> [m]
    Var logsumexp_rows(Var a);         // [m,n] -> [m]
    Var concat_cols(Var a, Var b);     // [m,p] ++ [m,q] -> [m,p+q]
    Var slice_cols(Var a, std::size_t c0, std::size_t c1);  // columns [c0,c1)
    Var reshape(Var a, std::vector<std::size_t> shape);

    // mean + exp(log_std) * noise, differentiable through mean and log_std.
    Var gaussian_reparam(Var mean, Var log_std, const Tensor& noise);

    const Tensor& value(Var v) const { return nodes_[v.idx].value; }
    const Tensor& grad(Var v) const { return nodes_[v.idx].grad; }

    // Seeds d(loss)/d(loss) = 1 and accumulates into every bound Param's
    // gradient slot. The loss must be a scalar from this tape.
    void backward(Var loss);

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        Param* bound = nullptr;
        std::function<void(Tape&, std::int32_t)> back;
    };

    Var push(Tensor value, bool requires_grad, std::function<void(Tape&, std::int32_t)> back, const char* where);
    Tensor& grad_of(std::int32_t idx);
    bool needs(Var v) const { return nodes_[v.idx].requires_grad; }

    std::vector<Node> nodes_;
};

}  // namespace sung
