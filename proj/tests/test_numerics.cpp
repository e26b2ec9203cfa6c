#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "sung/adam.hpp"
#include "sung/checkpoint.hpp"
#include "sung/mlp.hpp"
#include "sung/numerics.hpp"
#include "test_support.hpp"

using namespace sung;
using namespace sung::testing;

namespace {

MlpSpec small_spec(std::size_t in, std::size_t out, OutputTransform head = OutputTransform::identity) {
    MlpSpec spec;
    spec.input_dim = in;
    spec.hidden = {8, 8};
    spec.output_dim = out;
    spec.activation = Activation::tanh;
    spec.transform = head;
    return spec;
}

Tensor random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    Tensor t = Tensor::zeros({rows, cols});
    for (double& x : t.v) x = rng.normal();
    return t;
}

}  // namespace

TEST_CASE("mlp forward: zero weights give zero output") {
    MlpSpec spec = small_spec(3, 2);
    ParamTree params;
    Rng rng(7);
    mlp_init(params, spec, rng);
    for (auto& [name, p] : params) std::fill(p.value.v.begin(), p.value.v.end(), 0.0);
    Tape tape;
    Var out = mlp_forward(tape, params, spec, tape.constant(Tensor::matrix(1, 3, {0.3, -0.5, 2.0})));
    for (double x : tape.value(out).v) CHECK(x == 0.0);
}

TEST_CASE("mlp forward: single linear layer hand arithmetic") {
    MlpSpec spec;
    spec.input_dim = 1;
    spec.output_dim = 1;
    spec.activation = Activation::relu;
    spec.transform = OutputTransform::identity;
    ParamTree params;
    params.add("l0.W", Tensor::matrix(1, 1, {2.0}));
    params.add("l0.b", Tensor::vector({1.0}));
    Tape tape;
    Var out = mlp_forward(tape, params, spec, tape.constant(Tensor::matrix(1, 1, {3.0})));
    CHECK(tape.value(out).v[0] == doctest::Approx(7.0));
}

TEST_CASE("mlp forward: gaussian head doubles the output width") {
    MlpSpec spec = small_spec(3, 1, OutputTransform::gaussian_head);
    CHECK(spec.head_dim() == 2);
    ParamTree params;
    Rng rng(3);
    mlp_init(params, spec, rng);
    Tape tape;
    Var out = mlp_forward(tape, params, spec, tape.constant(Tensor::matrix(1, 3, {0.1, 0.2, 0.3})));
    CHECK(tape.value(out).numel() == 2);
}

TEST_CASE("mlp forward rejects input dim mismatch") {
    MlpSpec spec = small_spec(3, 2);
    ParamTree params;
    Rng rng(5);
    mlp_init(params, spec, rng);
    Tape tape;
    CHECK_THROWS(mlp_forward(tape, params, spec, tape.constant(Tensor::matrix(1, 4, {1, 2, 3, 4}))));
}

TEST_CASE("backward: analytic derivatives of x^2 and of a constant") {
    ParamTree params;
    params.add("x", Tensor::scalar(3.0));
    {
        Tape tape;
        Var x = tape.param(params.at("x"));
        tape.backward(tape.sum(tape.square(x)));
        CHECK(params.at("x").grad.v[0] == doctest::Approx(6.0));
    }
    params.zero_grad();
    {
        Tape tape;
        Var x = tape.param(params.at("x"));
        Var c = tape.constant(Tensor::scalar(4.0));
        tape.backward(tape.sum(tape.add(tape.scale(x, 0.0), c)));
        CHECK(params.at("x").grad.v[0] == 0.0);
    }
}

TEST_CASE("backward without a tape fails") {
    Tape tape;
    CHECK_THROWS(tape.backward(Var{}));
}

TEST_CASE("backward: gradients accumulate until zeroed") {
    ParamTree params;
    params.add("x", Tensor::scalar(2.0));
    for (int i = 0; i < 2; ++i) {
        Tape tape;
        tape.backward(tape.sum(tape.square(tape.param(params.at("x")))));
    }
    CHECK(params.at("x").grad.v[0] == doctest::Approx(8.0));
    params.zero_grad();
    CHECK(params.at("x").grad.v[0] == 0.0);
}

TEST_CASE("backward: random 2-layer mlp matches central finite differences") {
    MlpSpec spec = small_spec(4, 3);
    ParamTree params;
    Rng rng(11);
    mlp_init(params, spec, rng);
    Tensor input = random_matrix(5, 4, rng);
    Tensor weights = random_matrix(5, 3, rng);

    auto loss = [&]() {
        Tape tape;
        Var out = mlp_forward(tape, params, spec, tape.constant(input));
        return tape.value(tape.mean(tape.mul(out, tape.constant(weights)))).item();
    };
    auto fd = finite_diff_grad(params, loss);
    {
        Tape tape;
        Var out = mlp_forward(tape, params, spec, tape.constant(input));
        tape.backward(tape.mean(tape.mul(out, tape.constant(weights))));
    }
    CHECK(max_rel_err(collect_grads(params), fd) < 1e-4);
}

TEST_CASE("tape ops match finite differences through reductions") {
    ParamTree params;
    Rng rng(13);
    params.add("a", random_matrix(4, 6, rng));
    params.add("b", random_matrix(4, 6, rng));
    auto build = [&](Tape& tape) {
        Var a = tape.param(params.at("a"));
        Var b = tape.param(params.at("b"));
        Var lse = tape.logsumexp_rows(tape.mul(a, tape.tanh(b)));
        Var mn = tape.minimum(a, b);
        Var mix = tape.add(tape.mean(lse), tape.mean(tape.exp(tape.scale(tape.row_sum(mn), 0.1))));
        return tape.add(mix, tape.mean(tape.log(tape.add_const(tape.square(a), 1.0))));
    };
    auto loss = [&]() {
        Tape tape;
        return tape.value(build(tape)).item();
    };
    auto fd = finite_diff_grad(params, loss);
    {
        Tape tape;
        tape.backward(build(tape));
    }
    CHECK(max_rel_err(collect_grads(params), fd) < 1e-4);
}

TEST_CASE("tape ops match finite differences through matmul, slicing, and broadcasting") {
    ParamTree params;
    Rng rng(14);
    params.add("w", random_matrix(6, 5, rng));
    params.add("bias", Tensor::vector({0.1, -0.2, 0.3, 0.4, -0.5}));
    params.add("x", random_matrix(3, 6, rng));
    auto build = [&](Tape& tape) {
        Var w = tape.param(params.at("w"));
        Var bias = tape.param(params.at("bias"));
        Var x = tape.param(params.at("x"));
        Var y = tape.add_row(tape.matmul(x, w), bias);            // [3,5]
        Var left = tape.slice_cols(y, 0, 2);                      // [3,2]
        Var right = tape.slice_cols(y, 2, 5);                     // [3,3]
        Var joined = tape.concat_cols(tape.tanh(left), tape.relu(right));
        Var flat = tape.reshape(joined, {15});
        return tape.sub(tape.mean(tape.square(flat)), tape.mean(y));
    };
    auto loss = [&]() {
        Tape tape;
        return tape.value(build(tape)).item();
    };
    auto fd = finite_diff_grad(params, loss);
    {
        Tape tape;
        tape.backward(build(tape));
    }
    CHECK(max_rel_err(collect_grads(params), fd) < 1e-4);
}

TEST_CASE("non-finite values raise at the op that created them") {
    Tape tape;
    Var x = tape.constant(Tensor::scalar(-1.0));
    CHECK_THROWS(tape.log(x));
}

TEST_CASE("adam: first step and zero-gradient behavior") {
    ParamTree params;
    params.add("w", Tensor::vector({1.0, -2.0}));
    AdamConfig cfg;
    cfg.lr = 0.01;
    Adam opt(params, cfg);

    params.at("w").grad = Tensor::vector({0.5, -0.25});
    opt.step(params);
    // First bias-corrected step: -lr * g / (|g| + eps) ~= -lr * sign(g).
    CHECK(params.at("w").value.v[0] == doctest::Approx(1.0 - 0.01 * 0.5 / (0.5 + 1e-8)));
    CHECK(params.at("w").value.v[1] == doctest::Approx(-2.0 + 0.01 * 0.25 / (0.25 + 1e-8)));

    ParamTree fresh;
    fresh.add("w", Tensor::vector({3.0}));
    Adam fresh_opt(fresh, cfg);
    fresh_opt.step(fresh);  // zero gradient
    CHECK(fresh.at("w").value.v[0] == 3.0);
}

TEST_CASE("adam: identical steps from identical state are bitwise identical") {
    auto run = [] {
        ParamTree params;
        params.add("w", Tensor::vector({0.4, 0.6, -1.25}));
        Adam opt(params, AdamConfig{});
        for (int i = 0; i < 3; ++i) {
            params.at("w").grad = Tensor::vector({0.1, -0.7, 0.3});
            opt.step(params);
            params.zero_grad();
        }
        return params.at("w").value.v;
    };
    auto a = run();
    auto b = run();
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("adam rejects an empty tree") {
    ParamTree params;
    CHECK_THROWS(Adam(params, AdamConfig{}));
}

TEST_CASE("softmax_temp: values and identities") {
    auto p = softmax_temp({1.0, 1.0, 1.0}, 1.0);
    for (double x : p) CHECK(x == doctest::Approx(1.0 / 3.0));

    auto q = softmax_temp({0.0, std::log(2.0)}, 1.0);
    CHECK(q[0] == doctest::Approx(1.0 / 3.0));
    CHECK(q[1] == doctest::Approx(2.0 / 3.0));

    auto a = softmax_temp({2.0, 4.0, 6.0}, 2.0);
    auto b = softmax_temp({1.0, 2.0, 3.0}, 1.0);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));

    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> logits(5);
        for (double& l : logits) l = rng.uniform(-10.0, 10.0);
        const double alpha = rng.uniform(0.05, 10.0);
        auto probs = softmax_temp(logits, alpha);
        double total = 0.0;
        for (double x : probs) total += x;
        CHECK(std::abs(total - 1.0) < 1e-12);
        const double c = rng.uniform(0.1, 5.0);
        std::vector<double> scaled = logits;
        for (double& l : scaled) l *= c;
        auto probs2 = softmax_temp(scaled, alpha * c);
        for (std::size_t i = 0; i < probs.size(); ++i)
            CHECK(std::abs(probs[i] - probs2[i]) < 1e-12);
    }

    CHECK_THROWS(softmax_temp({1.0}, 0.0));
    CHECK_THROWS(softmax_temp({1.0}, -1.0));
}

TEST_CASE("logsumexp: values and identities") {
    CHECK(logsumexp({4.2}) == doctest::Approx(4.2));
    CHECK(logsumexp({0.0, 0.0}) == doctest::Approx(0.6931471805599453).epsilon(1e-12));
    CHECK_THROWS(logsumexp({}));

    Rng rng(23);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> v(6);
        for (double& x : v) x = rng.uniform(-20.0, 20.0);
        const double base = logsumexp(v);
        CHECK(base >= *std::max_element(v.begin(), v.end()));
        const double c = rng.uniform(-5.0, 5.0);
        std::vector<double> shifted = v;
        for (double& x : shifted) x += c;
        CHECK(std::abs(logsumexp(shifted) - (base + c)) < 1e-12);
    }
}

TEST_CASE("polyak_update: endpoints and two-step closed form") {
    auto make_tree = [](double value) {
        ParamTree t;
        t.add("w", Tensor::vector({value, value}));
        return t;
    };
    {
        ParamTree target = make_tree(0.0);
        ParamTree source = make_tree(1.0);
        polyak_update(target, source, 1.0);
        CHECK(target.at("w").value.v[0] == 1.0);
    }
    {
        ParamTree target = make_tree(0.25);
        ParamTree source = make_tree(1.0);
        polyak_update(target, source, 0.0);
        CHECK(target.at("w").value.v[0] == 0.25);
    }
    {
        ParamTree target = make_tree(0.0);
        ParamTree source = make_tree(1.0);
        polyak_update(target, source, 0.5);
        CHECK(target.at("w").value.v[0] == doctest::Approx(0.5));
    }
    {
        const double tau = 5e-3, t0 = 0.3, s = -1.2;
        ParamTree target = make_tree(t0);
        ParamTree source = make_tree(s);
        polyak_update(target, source, tau);
        polyak_update(target, source, tau);
        const double expected = (1 - tau) * ((1 - tau) * t0 + tau * s) + tau * s;
        CHECK(std::abs(target.at("w").value.v[0] - expected) < 1e-12);
    }
    {
        ParamTree target = make_tree(0.0);
        ParamTree source;
        source.add("different", Tensor::vector({1.0, 1.0}));
        CHECK_THROWS(polyak_update(target, source, 0.5));
    }
}

TEST_CASE("gaussian_reparam: values and finite-difference gradient") {
    Tensor mean = Tensor::vector({0.4, -0.2});
    Tensor log_std = Tensor::vector({0.0, 0.5});
    CHECK(gaussian_reparam_eval(mean, log_std, Tensor::vector({0.0, 0.0})).v[0] == 0.4);
    Tensor one = gaussian_reparam_eval(Tensor::vector({0.0}), Tensor::vector({0.0}), Tensor::vector({1.5}));
    CHECK(one.v[0] == doctest::Approx(1.5));
    CHECK_THROWS(gaussian_reparam_eval(mean, log_std, Tensor::vector({1.0})));

    ParamTree params;
    params.add("mean", mean);
    params.add("log_std", log_std);
    Tensor noise = Tensor::vector({0.7, -1.1});
    auto loss = [&]() {
        return gaussian_reparam_eval(params.at("mean").value, params.at("log_std").value, noise).v[0] +
               2.0 * gaussian_reparam_eval(params.at("mean").value, params.at("log_std").value, noise).v[1];
    };
    auto fd = finite_diff_grad(params, loss);
    {
        Tape tape;
        Var m = tape.param(params.at("mean"));
        Var ls = tape.param(params.at("log_std"));
        Var out = tape.gaussian_reparam(m, ls, noise);
        Var weighted = tape.mul(out, tape.constant(Tensor::vector({1.0, 2.0})));
        tape.backward(tape.sum(weighted));
    }
    CHECK(max_rel_err(collect_grads(params), fd) < 1e-4);
}

TEST_CASE("mlp init is deterministic given the seed") {
    MlpSpec spec = small_spec(4, 2);
    ParamTree a, b;
    Rng ra(99), rb(99);
    mlp_init(a, spec, ra);
    mlp_init(b, spec, rb);
    auto ia = a.begin();
    for (auto& [name, p] : b) {
        CHECK(name == ia->first);
        for (std::size_t i = 0; i < p.value.numel(); ++i) CHECK(p.value.v[i] == ia->second.value.v[i]);
        ++ia;
    }
}

TEST_CASE("checkpoint round trip is bitwise lossless") {
    const std::string path = (std::filesystem::temp_directory_path() / "sung_ck_test.ckpt").string();
    ParamTree params;
    Rng rng(31);
    params.add("alpha", random_matrix(3, 4, rng));
    params.add("beta", Tensor::vector({1e-300, -0.0, 3.14159}));
    params.add("gamma", Tensor::scalar(42.0));
    save_checkpoint(params, path);
    ParamTree loaded = load_checkpoint(path);
    CHECK(loaded.size() == params.size());
    for (const auto& [name, p] : params) {
        const Param& q = loaded.at(name);
        CHECK(q.value.shape == p.value.shape);
        for (std::size_t i = 0; i < p.value.numel(); ++i) CHECK(q.value.v[i] == p.value.v[i]);
    }
    std::filesystem::remove(path);
}

TEST_CASE("checkpoint load rejects bad magic and truncation") {
    namespace fs = std::filesystem;
    const std::string path = (fs::temp_directory_path() / "sung_ck_bad.ckpt").string();
    ParamTree params;
    params.add("w", Tensor::vector({1.0, 2.0}));
    save_checkpoint(params, path);

    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(0);
        f.put('X');
    }
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("bad magic"), std::runtime_error);

    save_checkpoint(params, path);
    fs::resize_file(path, fs::file_size(path) - 5);
    CHECK_THROWS(load_checkpoint(path));
    fs::remove(path);
}
