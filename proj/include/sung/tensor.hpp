#pragma once
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace sung {

inline void check(bool cond, const std::string& msg) {
    if (!cond) throw std::runtime_error(msg);
}

// Dense row-major tensor of 64-bit floats. Rank 0 (empty shape) is a scalar,
// rank 1 a vector, rank 2 a matrix; higher ranks are not used.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> v;

    Tensor() = default;
    Tensor(std::vector<std::size_t> sh, std::vector<double> data) : shape(std::move(sh)), v(std::move(data)) {
        check(v.size() == numel_of(shape), "tensor: values length does not match shape");
    }

    static std::size_t numel_of(const std::vector<std::size_t>& sh) {
        std::size_t n = 1;
        for (auto d : sh) n *= d;
        return n;
    }

    static Tensor zeros(std::vector<std::size_t> sh) {
        std::size_t n = numel_of(sh);
        return Tensor(std::move(sh), std::vector<double>(n, 0.0));
    }

    static Tensor full(std::vector<std::size_t> sh, double value) {
        std::size_t n = numel_of(sh);
        return Tensor(std::move(sh), std::vector<double>(n, value));
    }

    static Tensor scalar(double value) { return Tensor({}, {value}); }

    static Tensor vector(std::vector<double> data) {
        std::size_t n = data.size();
        return Tensor({n}, std::move(data));
    }

    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
        return Tensor({rows, cols}, std::move(data));
    }

    std::size_t numel() const { return v.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t rows() const { return rank() >= 1 ? shape[0] : 1; }
    std::size_t cols() const { return rank() >= 2 ? shape[1] : 1; }

    double& at(std::size_t i, std::size_t j) { return v[i * cols() + j]; }
    double at(std::size_t i, std::size_t j) const { return v[i * cols() + j]; }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }

    double item() const {
        check(numel() == 1, "tensor: item() on non-scalar");
        return v[0];
    }
};

void check_all_finite(const Tensor& t, const char* where);

}  // namespace sung
