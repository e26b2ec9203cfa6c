#include "sung/tape.hpp"

#include <cmath>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace sung {

namespace {

// Tapes churn through short-lived tensors above glibc's default mmap
// threshold; without this every step pays mmap/munmap page-fault cost.
[[maybe_unused]] const bool malloc_tuned = [] {
#if defined(__GLIBC__)
    mallopt(M_MMAP_THRESHOLD, 256 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 256 * 1024 * 1024);
#endif
    return true;
}();

}  // namespace

void check_all_finite(const Tensor& t, const char* where) {
    // NaN and Inf both survive summation, so one vectorizable pass suffices.
    double acc = 0.0;
    for (double x : t.v) acc += x;
    if (!std::isfinite(acc)) throw std::runtime_error(std::string("non-finite value produced by ") + where);
}

namespace {

// C[m,n] += A[m,k] * B[k,n]
void matmul_acc(double* c, const double* a, const double* b, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t l = 0; l < k; ++l) {
            const double av = arow[l];
            const double* brow = b + l * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[m,k] += G[m,n] * B^T  (B is [k,n])
void matmul_nt_acc(double* c, const double* g, const double* b, std::size_t m, std::size_t n, std::size_t k) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* grow = g + i * n;
        double* crow = c + i * k;
        for (std::size_t l = 0; l < k; ++l) {
            const double* brow = b + l * n;
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
            crow[l] += acc;
        }
    }
}

// C[k,n] += A^T * G  (A is [m,k], G is [m,n])
void matmul_tn_acc(double* c, const double* a, const double* g, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        const double* grow = g + i * n;
        for (std::size_t l = 0; l < k; ++l) {
            const double av = arow[l];
            double* crow = c + l * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * grow[j];
        }
    }
}

}  // namespace

Var Tape::push(Tensor value, bool requires_grad, std::function<void(Tape&, std::int32_t)> back, const char* where) {
    check_all_finite(value, where);
    Node node;
    node.value = std::move(value);
    node.requires_grad = requires_grad;
    node.back = std::move(back);
    nodes_.push_back(std::move(node));
    return Var{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Tensor& Tape::grad_of(std::int32_t idx) {
    Node& n = nodes_[idx];
    if (n.grad.numel() == 0 && n.value.numel() > 0) n.grad = Tensor::zeros(n.value.shape);
    return n.grad;
}

Var Tape::constant(Tensor value) {
    return push(std::move(value), false, nullptr, "constant");
}

Var Tape::param(Param& p) {
    Var v = push(p.value, true, nullptr, "param");
    nodes_[v.idx].bound = &p;
    return v;
}

Var Tape::add(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    check(ta.same_shape(tb), "add: shape mismatch");
    Tensor out = ta;
    for (std::size_t i = 0; i < out.numel(); ++i) out.v[i] += tb.v[i];
    bool rg = needs(a) || needs(b);
    return push(std::move(out), rg, [a, b](Tape& t, std::int32_t self) {
        const Tensor& g = t.nodes_[self].grad;
        if (t.needs(a)) {
            Tensor& ga = t.grad_of(a.idx);
            for (std::size_t i = 0; i < g.numel(); ++i) ga.v[i] += g.v[i];
        }
        if (t.needs(b)) {
            Tensor& gb = t.grad_of(b.idx);
            for (std::size_t i = 0; i < g.numel(); ++i) gb.v[i] += g.v[i];
        }
    }, "add");
}

Var Tape::sub(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    check(ta.same_shape(tb), "sub: shape mismatch");
    Tensor out = ta;
    for (std::size_t i = 0; i < out.numel(); ++i) out.v[i] -= tb.v[i];
    bool rg = needs(a) || needs(b);
    return push(std::move(out), rg, [a, b](Tape& t, std::int32_t self) {
        const Tensor& g = t.nodes_[self].grad;
        if (t.needs(a)) {
            Tensor& ga = t.grad_of(a.idx);
            for (std::size_t i = 0; i < g.numel(); ++i) ga.v[i] += g.v[i];
        }
        if (t.needs(b)) {
            Tensor& gb = t.grad_of(b.idx);
            for (std::size_t i = 0; i < g.numel(); ++i) gb.v[i] -= g.v[i];
        }
    }, "sub");
}

Var Tape::mul(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    check(ta.same_shape(tb), "mul: shape mismatch");
    Tensor out = ta;
    for (std::size_t i = 0; i < out.numel(); ++i) out.v[i] *= tb.v[i];
    bool rg = needs(a) || needs(b);
    return push(std::move(out), rg, [a, b](Tape& t, std::int32_t self) {
        const Tensor& g = t.nodes_[self].grad;
        if (t.needs(a)) {
            Tensor& ga = t.grad_of(a.idx);
            const Tensor& vb = t.value(b);
            for (std::size_t i = 0; i < g.numel(); ++i) ga.v[i] += g.v[i] * vb.v[i];
        }
        if (t.needs(b)) {
            Tensor& gb = t.grad_of(b.idx);
            const Tensor& va = t.value(a);
            for (std::size_t i = 0; i < g.numel(); ++i) gb.v[i] += g.v[i] * va.v[i];
        }
    }, "mul");
}

Var Tape::minimum(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    check(ta.same_shape(tb), "minimum: shape mismatch");
    Tensor out = ta;
    for (std::size_t i = 0; i < out.numel(); ++i) out.v[i] = std::min(ta.v[i], tb.v[i]);
    bool rg = needs(a) || needs(b);
    // Ties route through a, so the subgradient choice is deterministic.
    return push(std::move(out), rg, [a, b](Tape& t, std::int32_t self) {
        const Tensor& g = t.nodes_[self].grad;
        const Tensor& va = t.value(a);
        const Tensor& vb = t.value(b);
        if (t.needs(a)) {
            Tensor& ga = t.grad_of(a.idx);
            for (std::size_t i = 0; i < g.numel(); ++i)
                if (va.v[i] <= vb.v[i]) ga.v[i] += g.v[i];
        }
        if (t.needs(b)) {
            Tensor& gb = t.grad_of(b.idx);
            for (std::size_t i = 0; i < g.numel(); ++i)
                if (va.v[i] > vb.v[i]) gb.v[i] += g.v[i];
        }
    }, "minimum");
}

Var Tape::matmul(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    check(ta.rank() == 2 && tb.rank() == 2 && ta.shape[1] == tb.shape[0], "matmul: shape mismatch");
    const std::size_t m = ta.shape[0], k = ta.shape[1], n = tb.shape[1];
    Tensor out = Tensor::zeros({m, n});
    matmul_acc(out.v.data(), ta.v.data(), tb.v.data(), m, k, n);
    bool rg = needs(a) || needs(b);
    return push(std::move(out), rg, [a, b, m, k, n](Tape& t, std::int32_t self) {
        const Tensor& g = t.nodes_[self].grad;
        if (t.needs(a)) {
            Tensor& ga = t.grad_of(a.idx);
            matmul_nt_acc(ga.v.data(), g.v.data(), t.value(b).v.data(), m, n, k);
        }
        if (t.needs(b)) {
            Tensor& gb = t.grad_of(b.idx);
            matmul_tn_acc(gb.v.data(), t.value(a).v.data(), g.v.data(), m, k, n);
        }
    }, "matmul");
}

Var Tape::linear(Var x, Var w, Var b, LinearAct act) {
    const Tensor& tx = value(x);
    const Tensor& tw = value(w);
    const Tensor& tb = value(b);
    check(tx.rank() == 2 && tw.rank() == 2 && tx.shape[1] == tw.shape[0] && tb.numel() == tw.shape[1],
          "linear: shape mismatch");
    const std::size_t m = tx.shape[0], k = tx.shape[1], n = tw.shape[1];
    Tensor out = Tensor::zeros({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        double* orow = out.v.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) orow[j] = tb.v[j];
    }
    matmul_acc(out.v.data(), tx.v.data(), tw.v.data(), m, k, n);
    switch (act) {
        case LinearAct::tanh:
            for (double& v : out.v) v = std::tanh(v);
            break;
        case LinearAct::relu:
            for (double& v : out.v) v = v > 0.0 ? v : 0.0;
            break;
        case LinearAct::none:
            break;
    }
    bool rg = needs(x) || needs(w) || needs(b);
    return push(std::move(out), rg, [x, w, b, act, m, k, n](Tape& t, std::int32_t self) {
        const Tensor& g = t.nodes_[self].grad;
        const Tensor& y = t.nodes_[self].value;
        // Gradient through the activation, reconstructed from the output.
        Tensor gpre = g;
        if (act == LinearAct::tanh) {
            for (std::size_t i = 0; i < gpre.numel(); ++i) gpre.v[i] *= 1.0 - y.v[i] * y.v[i];
        } else if (act == LinearAct::relu) {
            for (std::size_t i = 0; i < gpre.numel(); ++i)
                if (y.v[i] <= 0.0) gpre.v[i] = 0.0;
        }
        if (t.needs(x))
            matmul_nt_acc(t.grad_of(x.idx).v.data(), gpre.v.data(), t.value(w).v.data(), m, n, k);
        if (t.needs(w))
            matmul_tn_acc(t.grad_of(w.idx).v.data(), t.value(x).v.data(), gpre.v.data(), m, k, n);
        if (t.needs(b)) {
            Tensor& gb = t.grad_of(b.idx);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) gb.v[j] += gpre.v[i * n + j];
        }
    }, "linear");
}

Var Tape::add_row(Var m, Var row) {
    const Tensor& tm = value(m);
    const Tensor& tr = value(row);
    check(tm.rank() == 2 && tr.numel() == tm.shape[1], "add_row: shape mismatch");
    Tensor out = tm;
    const std::size_t rows = tm.shape[0], cols = tm.shape[1];
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) out.v[i * cols + j] += tr.v[j];
    bool rg = needs(m) || needs(row);
    return push(std::move(out), rg, [m, row, rows, cols](Tape& t, std::int32_t self) {
        const Tensor& g = t.nodes_[self].grad;
        if (t.needs(m)) {
            Tensor& gm = t.grad_of(m.idx);
            for (std::size_t i = 0; i < g.numel(); ++i) gm.v[i] += g.v[i];
        }
        if (t.needs(row)) {
            Tensor& gr = t.grad_of(row.idx);
            for (std::size_t i = 0; i < rows; ++i)
                for (std::size_t j = 0; j < cols; ++j) gr.v[j] += g.v[i * cols + j];
        }
    }, "add_row");
}

Var Tape::scale(Var a, double c) {
    Tensor out = value(a);
    for (double& x : out.v) x *= c;
    return push(std::move(out), needs(a), [a, c](Tape& t, std::int32_t self) {
        if (!t.needs(a)) return;
        const Tensor& g = t.nodes_[self].grad;
        Tensor& ga = t.grad_of(a.idx);
        for (std::size_t i = 0; i < g.numel(); ++i) ga.v[i] += c * g.v[i];
    }, "scale");
}

Var Tape::add_const(Var a, double c) {
    Tensor out = value(a);
    for (double& x : out.v) x += c;
    return push(std::move(out), needs(a), [a](Tape& t, std::int32_t self) {
        if (!t.needs(a)) return;
        const Tensor& g = t.nodes_[self].grad;
        Tensor& ga = t.grad_of(a.idx);
        for (std::size_t i = 0; i < g.numel(); ++i) ga.v[i] += g.v[i];
    }, "add_const");
}

Var Tape::tanh(Var a) {
    Tensor out = value(a);
    for (double& x : out.v) x = std::tanh(x);
    return push(std::move(out), needs(a), [a](Tape& t, std::int32_t self) {
        if (!t.needs(a)) return;
        const Tensor& g = t.nodes_[self].grad;
        const Tensor& y = t.nodes_[self].value;
        Tensor& ga = t.grad_of(a.idx);
        for (std::size_t i = 0; i < g.numel(); ++i) ga.v[i] += g.v[i] * (1.0 - y.v[i] * y.v[i]);
    }, "tanh");
}

Var Tape::relu(Var a) {
    Tensor out = value(a);
    for (double& x : out.v) x = x > 0.0 ? x : 0.0;
    return push(std::move(out), needs(a), [a](Tape& t, std::int32_t self) {
        if (!t.needs(a)) return;
        const Tensor& g = t.nodes_[self].grad;
        const Tensor& vin = t.value(a);
        Tensor& ga = t.grad_of(a.idx);
        for (std::size_t i = 0; i < g.numel(); ++i)
            if (vin.v[i] > 0.0) ga.v[i] += g.v[i];
    }, "relu");
}

Var Tape::exp(Var a) {
    Tensor out = value(a);
    for (double& x : out.v) x = std::exp(x);
    return push(std::move(out), needs(a), [a](Tape& t, std::int32_t self) {
        if (!t.needs(a)) return;
        const Tensor& g = t.nodes_[self].grad;
        const Tensor& y = t.nodes_[self].value;
        Tensor& ga = t.grad_of(a.idx);
        for (std::size_t i = 0; i < g.numel(); ++i) ga.v[i] += g.v[i] * y.v[i];
    }, "exp");
}

Var Tape::log(Var a) {
    Tensor out = value(a);
    for (double& x : out.v) x = std::log(x);
    return push(std::move(out), needs(a), [a](Tape& t, std::int32_t self) {
        if (!t.needs(a)) return;
        const Tensor& g = t.nodes_[self].grad;
        const Tensor& vin = t.value(a);
        Tensor& ga = t.grad_of(a.idx);
        for (std::size_t i = 0; i < g.numel(); ++i) ga.v[i] += g.v[i] / vin.v[i];
    }, "log");
}

Var Tape::square(Var a) {
    Tensor out = value(a);
    for (double& x : out.v) x = x * x;
    return push(std::move(out), needs(a), [a](Tape& t, std::int32_t self) {
        if (!t.needs(a)) return;
        const Tensor& g = t.nodes_[self].grad;
        const Tensor& vin = t.value(a);
        Tensor& ga = t.grad_of(a.idx);
        for (std::size_t i = 0; i < g.numel(); ++i) ga.v[i] += 2.0 * g.v[i] * vin.v[i];
    }, "square");
}

Var Tape::clamp(Var a, double lo, double hi) {
    Tensor out = value(a);
    for (double& x : out.v) x = std::min(std::max(x, lo), hi);
    return push(std::move(out), needs(a), [a, lo, hi](Tape& t, std::int32_t self) {
        if (!t.needs(a)) return;
        const Tensor& g = t.nodes_[self].grad;
        const Tensor& vin = t.value(a);
        Tensor& ga = t.grad_of(a.idx);
        for (std::size_t i = 0; i < g.numel(); ++i)
            if (vin.v[i] > lo && vin.v[i] < hi) ga.v[i] += g.v[i];
    }, "clamp");
}

Var Tape::sum(Var a) {
    const Tensor& ta = value(a);
    double acc = 0.0;
    for (double x : ta.v) acc += x;
    return push(Tensor::scalar(acc), needs(a), [a](Tape& t, std::int32_t self) {
        if (!t.needs(a)) return;
        const double g = t.nodes_[self].grad.v[0];
        Tensor& ga = t.grad_of(a.idx);
        for (double& x : ga.v) x += g;
    }, "sum");
}

Var Tape::mean(Var a) {
    const Tensor& ta = value(a);
    check(ta.numel() > 0, "mean: empty tensor");
    const double inv = 1.0 / static_cast<double>(ta.numel());
    double acc = 0.0;
    for (double x : ta.v) acc += x;
    return push(Tensor::scalar(acc * inv), needs(a), [a, inv](Tape& t, std::int32_t self) {
        if (!t.needs(a)) return;
        const double g = t.nodes_[self].grad.v[0] * inv;
        Tensor& ga = t.grad_of(a.idx);
        for (double& x : ga.v) x += g;
    }, "mean");
}

Var Tape::row_sum(Var a) {
    const Tensor& ta = value(a);
    check(ta.rank() == 2, "row_sum: expects a matrix");
    const std::size_t m = ta.shape[0], n = ta.shape[1];
    Tensor out = Tensor::zeros({m});
    for (std::size_t i = 0; i < m; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += ta.v[i * n + j];
        out.v[i] = acc;
    }
    return push(std::move(out), needs(a), [a, m, n](Tape& t, std::int32_t self) {
        if (!t.needs(a)) return;
        const Tensor& g = t.nodes_[self].grad;
        Tensor& ga = t.grad_of(a.idx);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) ga.v[i * n + j] += g.v[i];
    }, "row_sum");
}

Var Tape::logsumexp_rows(Var a) {
    const Tensor& ta = value(a);
    check(ta.rank() == 2 && ta.shape[1] >= 1, "logsumexp_rows: expects a non-empty matrix");
    const std::size_t m = ta.shape[0], n = ta.shape[1];
    Tensor out = Tensor::zeros({m});
    for (std::size_t i = 0; i < m; ++i) {
        double mx = ta.v[i * n];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, ta.v[i * n + j]);
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += std::exp(ta.v[i * n + j] - mx);
        out.v[i] = mx + std::log(acc);
    }
    return push(std::move(out), needs(a), [a, m, n](Tape& t, std::int32_t self) {
        if (!t.needs(a)) return;
        const Tensor& g = t.nodes_[self].grad;
        const Tensor& y = t.nodes_[self].value;
        const Tensor& vin = t.value(a);
        Tensor& ga = t.grad_of(a.idx);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
                ga.v[i * n + j] += g.v[i] * std::exp(vin.v[i * n + j] - y.v[i]);
    }, "logsumexp_rows");
}

Var Tape::concat_cols(Var a, Var b) {
    const Tensor& ta = value(a);
    const Tensor& tb = value(b);
    check(ta.rank() == 2 && tb.rank() == 2 && ta.shape[0] == tb.shape[0], "concat_cols: shape mismatch");
    const std::size_t m = ta.shape[0], p = ta.shape[1], q = tb.shape[1];
    Tensor out = Tensor::zeros({m, p + q});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < p; ++j) out.v[i * (p + q) + j] = ta.v[i * p + j];
        for (std::size_t j = 0; j < q; ++j) out.v[i * (p + q) + p + j] = tb.v[i * q + j];
    }
    bool rg = needs(a) || needs(b);
    return push(std::move(out), rg, [a, b, m, p, q](Tape& t, std::int32_t self) {
        const Tensor& g = t.nodes_[self].grad;
        if (t.needs(a)) {
            Tensor& ga = t.grad_of(a.idx);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < p; ++j) ga.v[i * p + j] += g.v[i * (p + q) + j];
        }
        if (t.needs(b)) {
            Tensor& gb = t.grad_of(b.idx);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < q; ++j) gb.v[i * q + j] += g.v[i * (p + q) + p + j];
        }
    }, "concat_cols");
}

Var Tape::slice_cols(Var a, std::size_t c0, std::size_t c1) {
    const Tensor& ta = value(a);
    check(ta.rank() == 2 && c0 < c1 && c1 <= ta.shape[1], "slice_cols: bad range");
    const std::size_t m = ta.shape[0], n = ta.shape[1], w = c1 - c0;
    Tensor out = Tensor::zeros({m, w});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < w; ++j) out.v[i * w + j] = ta.v[i * n + c0 + j];
    return push(std::move(out), needs(a), [a, m, n, c0, w](Tape& t, std::int32_t self) {
        if (!t.needs(a)) return;
        const Tensor& g = t.nodes_[self].grad;
        Tensor& ga = t.grad_of(a.idx);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < w; ++j) ga.v[i * n + c0 + j] += g.v[i * w + j];
    }, "slice_cols");
}

Var Tape::reshape(Var a, std::vector<std::size_t> shape) {
    const Tensor& ta = value(a);
    check(Tensor::numel_of(shape) == ta.numel(), "reshape: element count mismatch");
    Tensor out(std::move(shape), ta.v);
    return push(std::move(out), needs(a), [a](Tape& t, std::int32_t self) {
        if (!t.needs(a)) return;
        const Tensor& g = t.nodes_[self].grad;
        Tensor& ga = t.grad_of(a.idx);
        for (std::size_t i = 0; i < g.numel(); ++i) ga.v[i] += g.v[i];
    }, "reshape");
}

Var Tape::gaussian_reparam(Var mean, Var log_std, const Tensor& noise) {
    check(value(mean).same_shape(value(log_std)) && value(mean).same_shape(noise),
          "gaussian_reparam: shape mismatch");
    Var sigma = exp(log_std);
    Var scaled = mul(sigma, constant(noise));
    return add(mean, scaled);
}

void Tape::backward(Var loss) {
    check(loss.valid() && static_cast<std::size_t>(loss.idx) < nodes_.size(), "backward: no tape for this loss");
    check(nodes_[loss.idx].value.numel() == 1, "backward: loss must be a scalar");
    grad_of(loss.idx).v[0] = 1.0;
    for (std::int32_t i = loss.idx; i >= 0; --i) {
        Node& n = nodes_[i];
        if (!n.requires_grad || n.grad.numel() == 0) continue;
        if (n.back) n.back(*this, i);
        if (n.bound) {
            Tensor& pg = n.bound->grad;
            for (std::size_t j = 0; j < pg.numel(); ++j) pg.v[j] += n.grad.v[j];
        }
    }
}

}  // namespace sung
