#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "seqnp/errors.hpp"
#include "seqnp/tensor.hpp"

namespace seqnp {

using NamedTensors = std::map<std::string, Tensor>;

class Tape;

// Handle to a node on a tape. Cheap to copy; owns nothing.
class Var {
  public:
    Var() = default;

    const Tensor& value() const;
    const std::vector<std::size_t>& shape() const { return value().shape(); }

    Tape* tape() const { return tape_; }
    std::size_t id() const { return id_; }
    bool valid() const { return tape_ != nullptr; }

  private:
    friend class Tape;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

// Records one forward pass as a flat list of nodes in creation order, which
// is a topological order by construction: an operation's inputs always exist
// before it. The backward sweep walks the list once in reverse.
//
// Tapes are single-owner and must not be shared across threads. Rebuild one
// per forward pass.
class Tape {
  public:
    using BackwardFn = std::function<void(Tape&, std::size_t self, const Tensor& gout)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Leaf parameter; gradients for it are collected by leaf_gradients().
    Var leaf(Tensor value, std::string name) {
        return push(std::move(value), nullptr, std::move(name));
    }

    // Non-parameter input (data, noise). Participates in the graph but is
    // not reported as a leaf gradient.
    Var constant(Tensor value) { return push(std::move(value), nullptr, {}); }

    Var emit(Tensor value, BackwardFn fn) { return push(std::move(value), std::move(fn), {}); }

    std::size_t size() const { return nodes_.size(); }

    const Tensor& value_of(std::size_t id) const { return nodes_[id].value; }

    // Gradient accumulation buffer for a node, allocated to zeros on first use.
    double* grad_buffer(std::size_t id) {
        Tensor& g = grads_[id];
        if (g.empty()) g = Tensor::zeros(nodes_[id].value.shape());
        return g.data();
    }

    void add_grad(std::size_t id, const Tensor& g) {
        double* buf = grad_buffer(id);
        const double* src = g.data();
        const std::size_t n = g.numel();
        for (std::size_t i = 0; i < n; ++i) buf[i] += src[i];
    }

    // Reverse sweep from a scalar loss. Each node is visited exactly once,
    // in reverse creation order.
    void backward(const Var& loss) {
        if (loss.tape() != this) throw ContractError("backward: loss lives on another tape");
        if (!loss.value().is_scalar()) {
            throw ContractError("backward: loss must be scalar, got shape " +
                                Tensor::shape_string(loss.value().shape()));
        }
        grads_.assign(nodes_.size(), Tensor());
        grads_[loss.id()] = Tensor::scalar(1.0);
        for (std::size_t i = loss.id() + 1; i-- > 0;) {
            if (grads_[i].empty() || !nodes_[i].backward) continue;
            nodes_[i].backward(*this, i, grads_[i]);
        }
    }

    // Gradient of the last backward() w.r.t. a node; zeros if untouched.
    Tensor gradient(const Var& v) const {
        if (v.tape() != this) throw ContractError("gradient: var lives on another tape");
        if (v.id() < grads_.size() && !grads_[v.id()].empty()) return grads_[v.id()];
        return Tensor::zeros(nodes_[v.id()].value.shape());
    }

    // Gradients for every named leaf; untouched leaves get zero tensors.
    NamedTensors leaf_gradients() const {
        NamedTensors out;
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            if (nodes_[i].leaf_name.empty()) continue;
            if (i < grads_.size() && !grads_[i].empty()) {
                out[nodes_[i].leaf_name] = grads_[i];
            } else {
                out[nodes_[i].leaf_name] = Tensor::zeros(nodes_[i].value.shape());
            }
        }
        return out;
    }

  private:
    struct Node {
        Tensor value;
        BackwardFn backward;
        std::string leaf_name;
    };

    Var push(Tensor value, BackwardFn fn, std::string leaf_name) {
        nodes_.push_back(Node{std::move(value), std::move(fn), std::move(leaf_name)});
        return Var(this, nodes_.size() - 1);
    }

    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
};

inline const Tensor& Var::value() const { return tape_->value_of(id_); }

// Registers every named tensor as a leaf, in name order.
inline std::map<std::string, Var> register_leaves(Tape& tape, const NamedTensors& params) {
    std::map<std::string, Var> vars;
    for (const auto& [name, tensor] : params) vars.emplace(name, tape.leaf(tensor, name));
    return vars;
}

namespace detail {

inline Tape& tape_of(const Var& a, const Var& b, const char* op) {
    if (!a.valid() || !b.valid()) throw ContractError(std::string(op) + ": uninitialized var");
    if (a.tape() != b.tape()) throw ContractError(std::string(op) + ": vars on different tapes");
    return *a.tape();
}

inline void require_finite(const Tensor& t, const char* op) {
    if (!t.all_finite()) throw DomainError(std::string(op) + ": produced a non-finite value");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Primitive operations. Each emits one tape node with its gradient rule.
// Elementwise binary ops accept equal shapes or a scalar on either side;
// anything else is the caller's job to reshape explicitly.
// ---------------------------------------------------------------------------

inline Var matmul(const Var& a, const Var& b) {
    Tape& tape = detail::tape_of(a, b, "matmul");
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.ndim() != 2 || bv.ndim() != 2 || av.cols() != bv.rows()) {
        throw ShapeError("matmul: incompatible shapes " + Tensor::shape_string(av.shape()) +
                         " and " + Tensor::shape_string(bv.shape()));
    }
    const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
    Tensor out({m, n});
    detail::gemm(av.data(), bv.data(), out.data(), m, k, n);
    const std::size_t aid = a.id(), bid = b.id();
    return tape.emit(std::move(out), [aid, bid, m, k, n](Tape& t, std::size_t, const Tensor& g) {
        detail::gemm_nt_acc(g.data(), t.value_of(bid).data(), t.grad_buffer(aid), m, n, k);
        detail::gemm_tn_acc(t.value_of(aid).data(), g.data(), t.grad_buffer(bid), m, k, n);
    });
}

inline Var transpose(const Var& a) {
    Tape& tape = *a.tape();
    const Tensor& av = a.value();
    const std::size_t m = av.rows(), n = av.cols();
    Tensor out({n, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out(j, i) = av(i, j);
    const std::size_t aid = a.id();
    return tape.emit(std::move(out), [aid, m, n](Tape& t, std::size_t, const Tensor& g) {
        double* buf = t.grad_buffer(aid);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) buf[i * n + j] += g(j, i);
    });
}

// x(m x k) * W(k x n) + bias row b(1 x n) added to every row.
inline Var linear(const Var& x, const Var& w, const Var& b) {
    Tape& tape = detail::tape_of(x, w, "linear");
    const Tensor& xv = x.value();
    const Tensor& wv = w.value();
    const Tensor& bv = b.value();
    if (xv.ndim() != 2 || wv.ndim() != 2 || xv.cols() != wv.rows()) {
        throw ShapeError("linear: incompatible shapes " + Tensor::shape_string(xv.shape()) +
                         " and " + Tensor::shape_string(wv.shape()));
    }
    if (bv.numel() != wv.cols()) {
        throw ShapeError("linear: bias shape " + Tensor::shape_string(bv.shape()) +
                         " does not match weight " + Tensor::shape_string(wv.shape()));
    }
    const std::size_t m = xv.rows(), k = xv.cols(), n = wv.cols();
    Tensor out({m, n});
    detail::gemm(xv.data(), wv.data(), out.data(), m, k, n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out(i, j) += bv[j];
    const std::size_t xid = x.id(), wid = w.id(), bid = b.id();
    return tape.emit(std::move(out), [xid, wid, bid, m, k, n](Tape& t, std::size_t,
                                                              const Tensor& g) {
        detail::gemm_nt_acc(g.data(), t.value_of(wid).data(), t.grad_buffer(xid), m, n, k);
        detail::gemm_tn_acc(t.value_of(xid).data(), g.data(), t.grad_buffer(wid), m, k, n);
        double* db = t.grad_buffer(bid);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) db[j] += g(i, j);
    });
}

namespace detail {

enum class BinOp { add, sub, mul, div };

inline Var binary(const Var& a, const Var& b, BinOp op, const char* name) {
    Tape& tape = tape_of(a, b, name);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    const bool a_scalar = av.is_scalar(), b_scalar = bv.is_scalar();
    if (!av.same_shape(bv) && !a_scalar && !b_scalar) {
        throw ShapeError(std::string(name) + ": shapes " + Tensor::shape_string(av.shape()) +
                         " and " + Tensor::shape_string(bv.shape()) +
                         " (only equal-shape or scalar operands)");
    }
    const std::size_t n = std::max(av.numel(), bv.numel());
    Tensor out(a_scalar ? bv.shape() : av.shape());
    for (std::size_t i = 0; i < n; ++i) {
        const double x = av[a_scalar ? 0 : i];
        const double y = bv[b_scalar ? 0 : i];
        switch (op) {
            case BinOp::add: out[i] = x + y; break;
            case BinOp::sub: out[i] = x - y; break;
            case BinOp::mul: out[i] = x * y; break;
            case BinOp::div: out[i] = x / y; break;
        }
    }
    if (op == BinOp::div) require_finite(out, name);
    const std::size_t aid = a.id(), bid = b.id();
    return tape.emit(std::move(out),
                     [aid, bid, op, a_scalar, b_scalar, n](Tape& t, std::size_t self,
                                                           const Tensor& g) {
        const Tensor& av = t.value_of(aid);
        const Tensor& bv = t.value_of(bid);
        double* da = t.grad_buffer(aid);
        double* db = t.grad_buffer(bid);
        for (std::size_t i = 0; i < n; ++i) {
            const double gi = g[i];
            const double x = av[a_scalar ? 0 : i];
            const double y = bv[b_scalar ? 0 : i];
            double ga = 0.0, gb = 0.0;
            switch (op) {
                case BinOp::add: ga = gi; gb = gi; break;
                case BinOp::sub: ga = gi; gb = -gi; break;
                case BinOp::mul: ga = gi * y; gb = gi * x; break;
                case BinOp::div: ga = gi / y; gb = -gi * x / (y * y); break;
            }
            da[a_scalar ? 0 : i] += ga;
            db[b_scalar ? 0 : i] += gb;
        }
        (void)self;
    });
}

inline Var unary(const Var& a, const char* name, const std::function<double(double)>& f,
                 const std::function<double(double, double)>& dfdx_from_x_and_y) {
    Tape& tape = *a.tape();
    const Tensor& av = a.value();
    Tensor out(av.shape());
    for (std::size_t i = 0; i < av.numel(); ++i) out[i] = f(av[i]);
    require_finite(out, name);
    const std::size_t aid = a.id();
    auto dfdx = dfdx_from_x_and_y;
    return tape.emit(std::move(out), [aid, dfdx](Tape& t, std::size_t self, const Tensor& g) {
        const Tensor& xv = t.value_of(aid);
        const Tensor& yv = t.value_of(self);
        double* da = t.grad_buffer(aid);
        for (std::size_t i = 0; i < g.numel(); ++i) da[i] += g[i] * dfdx(xv[i], yv[i]);
    });
}

}  // namespace detail

inline Var add(const Var& a, const Var& b) { return detail::binary(a, b, detail::BinOp::add, "add"); }
inline Var sub(const Var& a, const Var& b) { return detail::binary(a, b, detail::BinOp::sub, "sub"); }
inline Var mul(const Var& a, const Var& b) { return detail::binary(a, b, detail::BinOp::mul, "mul"); }
inline Var div(const Var& a, const Var& b) { return detail::binary(a, b, detail::BinOp::div, "div"); }

inline Var add(const Var& a, double c) {
    const Tensor& av = a.value();
    Tensor out(av.shape());
    for (std::size_t i = 0; i < av.numel(); ++i) out[i] = av[i] + c;
    const std::size_t aid = a.id();
    return a.tape()->emit(std::move(out), [aid](Tape& t, std::size_t, const Tensor& g) {
        t.add_grad(aid, g);
    });
}

inline Var mul(const Var& a, double c) {
    const Tensor& av = a.value();
    Tensor out(av.shape());
    for (std::size_t i = 0; i < av.numel(); ++i) out[i] = av[i] * c;
    const std::size_t aid = a.id();
    return a.tape()->emit(std::move(out), [aid, c](Tape& t, std::size_t, const Tensor& g) {
        double* da = t.grad_buffer(aid);
        for (std::size_t i = 0; i < g.numel(); ++i) da[i] += g[i] * c;
    });
}

inline Var neg(const Var& a) { return mul(a, -1.0); }

inline Var relu(const Var& a) {
    return detail::unary(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
                         [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

// Overflow-safe softplus; derivative is the logistic sigmoid.
inline Var softplus(const Var& a) {
    return detail::unary(a, "softplus",
                         [](double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); },
                         [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

inline Var exp(const Var& a) {
    return detail::unary(a, "exp", [](double x) { return std::exp(x); },
                         [](double, double y) { return y; });
}

inline Var log(const Var& a) {
    const Tensor& av = a.value();
    for (std::size_t i = 0; i < av.numel(); ++i) {
        if (!(av[i] > 0.0)) {
            throw DomainError("log: input value " + std::to_string(av[i]) +
                              " is outside the positive domain");
        }
    }
    return detail::unary(a, "log", [](double x) { return std::log(x); },
                         [](double x, double) { return 1.0 / x; });
}

inline Var square(const Var& a) {
    return detail::unary(a, "square", [](double x) { return x * x; },
                         [](double x, double) { return 2.0 * x; });
}

inline Var concat_cols(const Var& a, const Var& b) {
    Tape& tape = detail::tape_of(a, b, "concat_cols");
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.ndim() != 2 || bv.ndim() != 2 || av.rows() != bv.rows()) {
        throw ShapeError("concat_cols: incompatible shapes " + Tensor::shape_string(av.shape()) +
                         " and " + Tensor::shape_string(bv.shape()));
    }
    const std::size_t m = av.rows(), p = av.cols(), q = bv.cols();
    Tensor out({m, p + q});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < p; ++j) out(i, j) = av(i, j);
        for (std::size_t j = 0; j < q; ++j) out(i, p + j) = bv(i, j);
    }
    const std::size_t aid = a.id(), bid = b.id();
    return tape.emit(std::move(out), [aid, bid, m, p, q](Tape& t, std::size_t, const Tensor& g) {
        double* da = t.grad_buffer(aid);
        double* db = t.grad_buffer(bid);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < p; ++j) da[i * p + j] += g(i, j);
            for (std::size_t j = 0; j < q; ++j) db[i * q + j] += g(i, p + j);
        }
    });
}

// Rows of a in the given order (duplicates allowed); gradient scatter-adds.
inline Var gather_rows(const Var& a, std::vector<std::size_t> indices) {
    Tape& tape = *a.tape();
    const Tensor& av = a.value();
    const std::size_t n = av.cols();
    for (std::size_t idx : indices) {
        if (idx >= av.rows()) {
            throw ContractError("gather_rows: index " + std::to_string(idx) +
                                " out of range for " + Tensor::shape_string(av.shape()));
        }
    }
    Tensor out({indices.size(), n});
    for (std::size_t i = 0; i < indices.size(); ++i)
        for (std::size_t j = 0; j < n; ++j) out(i, j) = av(indices[i], j);
    const std::size_t aid = a.id();
    return tape.emit(std::move(out),
                     [aid, indices = std::move(indices), n](Tape& t, std::size_t,
                                                            const Tensor& g) {
        double* da = t.grad_buffer(aid);
        for (std::size_t i = 0; i < indices.size(); ++i)
            for (std::size_t j = 0; j < n; ++j) da[indices[i] * n + j] += g(i, j);
    });
}

// Repeats a 1 x n row m times; gradient is the column sum.
inline Var broadcast_rows(const Var& a, std::size_t m) {
    Tape& tape = *a.tape();
    const Tensor& av = a.value();
    if (av.ndim() != 2 || av.rows() != 1) {
        throw ShapeError("broadcast_rows: expected a 1-row matrix, got " +
                         Tensor::shape_string(av.shape()));
    }
    const std::size_t n = av.cols();
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out(i, j) = av[j];
    const std::size_t aid = a.id();
    return tape.emit(std::move(out), [aid, m, n](Tape& t, std::size_t, const Tensor& g) {
        double* da = t.grad_buffer(aid);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) da[j] += g(i, j);
    });
}

// Column-wise mean: (m x n) -> (1 x n).
inline Var mean_rows(const Var& a) {
    Tape& tape = *a.tape();
    const Tensor& av = a.value();
    if (av.ndim() != 2 || av.rows() == 0) {
        throw ContractError("mean_rows: expected a nonempty matrix, got " +
                            Tensor::shape_string(av.shape()));
    }
    const std::size_t m = av.rows(), n = av.cols();
    Tensor out({1, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j] += av(i, j);
    for (std::size_t j = 0; j < n; ++j) out[j] /= static_cast<double>(m);
    const std::size_t aid = a.id();
    return tape.emit(std::move(out), [aid, m, n](Tape& t, std::size_t, const Tensor& g) {
        double* da = t.grad_buffer(aid);
        const double inv = 1.0 / static_cast<double>(m);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) da[i * n + j] += g[j] * inv;
    });
}

inline Var sum_all(const Var& a) {
    Tape& tape = *a.tape();
    const Tensor& av = a.value();
    double s = 0.0;
    for (std::size_t i = 0; i < av.numel(); ++i) s += av[i];
    const std::size_t aid = a.id();
    return tape.emit(Tensor::scalar(s), [aid](Tape& t, std::size_t, const Tensor& g) {
        double* da = t.grad_buffer(aid);
        const double gv = g[0];
        for (std::size_t i = 0; i < t.value_of(aid).numel(); ++i) da[i] += gv;
    });
}

inline Var mean_all(const Var& a) {
    return mul(sum_all(a), 1.0 / static_cast<double>(a.value().numel()));
}

// Row-wise softmax with the usual max-shift for stability.
inline Var softmax_rows(const Var& a) {
    Tape& tape = *a.tape();
    const Tensor& av = a.value();
    const std::size_t m = av.rows(), n = av.cols();
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        double mx = av(i, 0);
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, av(i, j));
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            out(i, j) = std::exp(av(i, j) - mx);
            z += out(i, j);
        }
        for (std::size_t j = 0; j < n; ++j) out(i, j) /= z;
    }
    const std::size_t aid = a.id();
    return tape.emit(std::move(out), [aid, m, n](Tape& t, std::size_t self, const Tensor& g) {
        const Tensor& y = t.value_of(self);
        double* da = t.grad_buffer(aid);
        for (std::size_t i = 0; i < m; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j) dot += g(i, j) * y(i, j);
            for (std::size_t j = 0; j < n; ++j) da[i * n + j] += y(i, j) * (g(i, j) - dot);
        }
    });
}

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return div(a, b); }
inline Var operator+(const Var& a, double c) { return add(a, c); }
inline Var operator-(const Var& a, double c) { return add(a, -c); }
inline Var operator*(const Var& a, double c) { return mul(a, c); }
inline Var operator-(const Var& a) { return neg(a); }

// ---------------------------------------------------------------------------
// Validation harness: tape gradients vs. central finite differences.
// ---------------------------------------------------------------------------

using GraphFn = std::function<Var(Tape&, const std::map<std::string, Var>&)>;

inline double graph_value(const GraphFn& f, const NamedTensors& params) {
    Tape tape;
    auto leaves = register_leaves(tape, params);
    return f(tape, leaves).value().scalar_value();
}

inline NamedTensors graph_gradients(const GraphFn& f, const NamedTensors& params) {
    Tape tape;
    auto leaves = register_leaves(tape, params);
    Var loss = f(tape, leaves);
    tape.backward(loss);
    return tape.leaf_gradients();
}

// Max over coordinates of |g_ad - g_fd| / max(1, |g_ad| + |g_fd|). Reports
// the error instead of throwing, however large it gets.
inline double gradient_check(const GraphFn& f, const NamedTensors& params, double eps) {
    if (!(eps > 0.0)) throw ContractError("gradient_check: eps must be positive");
    const NamedTensors grads = graph_gradients(f, params);
    double worst = 0.0;
    NamedTensors work = params;
    for (auto& [name, tensor] : work) {
        const Tensor& g_ad = grads.at(name);
        for (std::size_t i = 0; i < tensor.numel(); ++i) {
            const double saved = tensor[i];
            tensor[i] = saved + eps;
            const double hi = graph_value(f, work);
            tensor[i] = saved - eps;
            const double lo = graph_value(f, work);
            tensor[i] = saved;
            const double g_fd = (hi - lo) / (2.0 * eps);
            const double err =
                std::abs(g_ad[i] - g_fd) / std::max(1.0, std::abs(g_ad[i]) + std::abs(g_fd));
            worst = std::max(worst, err);
        }
    }
    return worst;
}

}  // namespace seqnp
