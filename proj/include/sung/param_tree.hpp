#pragma once
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sung/tensor.hpp"

namespace sung {

struct Param {
    Tensor value;
    Tensor grad;
};

// Ordered map from parameter name to (value, gradient). Iteration order is
// the construction order, so optimizer sweeps and checkpoints are stable
// across runs built with the same sequence of add() calls.
class ParamTree {
public:
    Param& add(const std::string& name, Tensor init) {
        check(!index_.count(name), "param tree: duplicate parameter '" + name + "'");
        Tensor grad = Tensor::zeros(init.shape);
        index_[name] = items_.size();
        items_.emplace_back(name, Param{std::move(init), std::move(grad)});
        return items_.back().second;
    }

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    Param& at(const std::string& name) {
        auto it = index_.find(name);
        check(it != index_.end(), "param tree: unknown parameter '" + name + "'");
        return items_[it->second].second;
    }

    const Param& at(const std::string& name) const {
        auto it = index_.find(name);
        check(it != index_.end(), "param tree: unknown parameter '" + name + "'");
        return items_[it->second].second;
    }

    void zero_grad() {
        for (auto& [name, p] : items_)
            std::fill(p.grad.v.begin(), p.grad.v.end(), 0.0);
    }

    std::size_t size() const { return items_.size(); }
    bool empty() const { return items_.empty(); }

    auto begin() { return items_.begin(); }
    auto end() { return items_.end(); }
    auto begin() const { return items_.begin(); }
    auto end() const { return items_.end(); }

private:
    std::vector<std::pair<std::string, Param>> items_;
    std::unordered_map<std::string, std::size_t> index_;
};

// target <- (1 - tau) * target + tau * source, entry-wise over matching trees.
void polyak_update(ParamTree& target, const ParamTree& source, double tau);

}  // namespace sung
