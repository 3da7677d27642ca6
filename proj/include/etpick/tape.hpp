#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "etpick/ops.hpp"
#include "etpick/tensor.hpp"

// Reverse-mode autodiff over a linear tape. Each op appends a node holding
// its output value and a closure that scatters the node's gradient into its
// parents. Append order is a topological order, so backward() is a single
// reverse sweep.
namespace etpick::nn {

template <typename T>
class Graph {
public:
    using Id = int;

    Id leaf(Tensor<T> value, bool requires_grad) {
        nodes_.push_back(Node{std::move(value), Tensor<T>(), nullptr, requires_grad});
        return static_cast<Id>(nodes_.size() - 1);
    }

    Id append(Tensor<T> value, bool needs_grad) {
        nodes_.push_back(Node{std::move(value), Tensor<T>(), nullptr, needs_grad});
        return static_cast<Id>(nodes_.size() - 1);
    }

    void set_backward(Id id, std::function<void(Graph&)> fn) {
        nodes_[static_cast<std::size_t>(id)].backward = std::move(fn);
    }

    const Tensor<T>& value(Id id) const { return nodes_[static_cast<std::size_t>(id)].value; }

    Tensor<T>& grad(Id id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (n.grad.numel() == 0 && n.value.numel() > 0) n.grad = Tensor<T>(n.value.shape);
        return n.grad;
    }

    bool has_grad(Id id) const { return nodes_[static_cast<std::size_t>(id)].grad.numel() > 0; }
    bool needs_grad(Id id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }

    // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse. Nodes whose
    // gradient was never touched are skipped (they do not feed the loss).
    void backward(Id loss) {
        if (value(loss).numel() != 1)
            throw std::invalid_argument("backward: loss node must be scalar");
        grad(loss)[0] = T(1);
        for (Id i = loss; i >= 0; --i) {
            Node& n = nodes_[static_cast<std::size_t>(i)];
            if (n.backward && n.needs_grad && n.grad.numel() > 0) n.backward(*this);
        }
    }

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;
        std::function<void(Graph&)> backward;
        bool needs_grad = false;
    };
    std::vector<Node> nodes_;
};

// --- op wrappers; each propagates needs_grad and registers its backward ----

template <typename T>
int conv3(Graph<T>& g, int x, int w, int b, int stride, int pad) {
    Tensor<T> y;
    ops::conv3_forward(g.value(x), g.value(w), g.value(b), stride, pad, y);
    const bool needs = g.needs_grad(x) || g.needs_grad(w) || g.needs_grad(b);
    const int out = g.append(std::move(y), needs);
    if (needs)
        g.set_backward(out, [x, w, b, stride, pad, out](Graph<T>& gr) {
            ops::conv3_backward(gr.value(x), gr.value(w), gr.grad(out), stride, pad,
                                gr.needs_grad(x) ? &gr.grad(x) : nullptr,
                                gr.needs_grad(w) ? &gr.grad(w) : nullptr,
                                gr.needs_grad(b) ? &gr.grad(b) : nullptr);
        });
    return out;
}

template <typename T>
int maxpool3(Graph<T>& g, int x, int k, int stride, int pad) {
    Tensor<T> y;
    auto argmax = std::make_shared<std::vector<std::int64_t>>();
    ops::maxpool3_forward(g.value(x), k, stride, pad, y, g.needs_grad(x) ? argmax.get() : nullptr);
    const bool needs = g.needs_grad(x);
    const int out = g.append(std::move(y), needs);
    if (needs)
        g.set_backward(out, [x, argmax, out](Graph<T>& gr) {
            ops::maxpool3_backward(*argmax, gr.grad(out), gr.grad(x));
        });
    return out;
}

template <typename T>
int upsample2(Graph<T>& g, int x) {
    Tensor<T> y;
    ops::upsample2_forward(g.value(x), y);
    const bool needs = g.needs_grad(x);
    const int out = g.append(std::move(y), needs);
    if (needs)
        g.set_backward(out, [x, out](Graph<T>& gr) {
            ops::upsample2_backward(gr.grad(out), gr.grad(x));
        });
    return out;
}

template <typename T>
int relu(Graph<T>& g, int x) {
    Tensor<T> y;
    ops::relu_forward(g.value(x), y);
    const bool needs = g.needs_grad(x);
    const int out = g.append(std::move(y), needs);
    if (needs)
        g.set_backward(out, [x, out](Graph<T>& gr) {
            ops::relu_backward(gr.value(x), gr.grad(out), gr.grad(x));
        });
    return out;
}

template <typename T>
int sigmoid(Graph<T>& g, int x) {
    Tensor<T> y;
    ops::sigmoid_forward(g.value(x), y);
    const bool needs = g.needs_grad(x);
    const int out = g.append(std::move(y), needs);
    if (needs)
        g.set_backward(out, [x, out](Graph<T>& gr) {
            ops::sigmoid_backward(gr.value(out), gr.grad(out), gr.grad(x));
        });
    return out;
}

template <typename T>
int groupnorm(Graph<T>& g, int x, int groups, int gain, int shift, T eps = T(1e-5)) {
    Tensor<T> y;
    auto stats = std::make_shared<ops::GroupNormStats<T>>();
    ops::groupnorm_forward(g.value(x), groups, g.value(gain), g.value(shift), eps, y, stats.get());
    const bool needs = g.needs_grad(x) || g.needs_grad(gain) || g.needs_grad(shift);
    const int out = g.append(std::move(y), needs);
    if (needs)
        g.set_backward(out, [x, groups, gain, shift, stats, out](Graph<T>& gr) {
            ops::groupnorm_backward(gr.value(x), groups, gr.value(gain), *stats, gr.grad(out),
                                    gr.needs_grad(x) ? &gr.grad(x) : nullptr,
                                    gr.needs_grad(gain) ? &gr.grad(gain) : nullptr,
                                    gr.needs_grad(shift) ? &gr.grad(shift) : nullptr);
        });
    return out;
}

template <typename T>
int add(Graph<T>& g, int a, int b) {
    Tensor<T> y;
    ops::add_forward(g.value(a), g.value(b), y);
    const bool needs = g.needs_grad(a) || g.needs_grad(b);
    const int out = g.append(std::move(y), needs);
    if (needs)
        g.set_backward(out, [a, b, out](Graph<T>& gr) {
            const Tensor<T>& gy = gr.grad(out);
            if (gr.needs_grad(a)) {
                Tensor<T>& ga = gr.grad(a);
                for (std::int64_t i = 0; i < gy.numel(); ++i) ga[i] += gy[i];
            }
            if (gr.needs_grad(b)) {
                Tensor<T>& gb = gr.grad(b);
                for (std::int64_t i = 0; i < gy.numel(); ++i) gb[i] += gy[i];
            }
        });
    return out;
}

// y = alpha*a + beta*b, elementwise; also used to combine scalar losses.
template <typename T>
int add_scaled(Graph<T>& g, int a, T alpha, int b, T beta) {
    const Tensor<T>& va = g.value(a);
    const Tensor<T>& vb = g.value(b);
    if (!va.same_shape(vb)) throw std::invalid_argument("add_scaled: shape mismatch");
    Tensor<T> y(va.shape);
    for (std::int64_t i = 0; i < y.numel(); ++i) y[i] = alpha * va[i] + beta * vb[i];
    const bool needs = g.needs_grad(a) || g.needs_grad(b);
    const int out = g.append(std::move(y), needs);
    if (needs)
        g.set_backward(out, [a, b, alpha, beta, out](Graph<T>& gr) {
            const Tensor<T>& gy = gr.grad(out);
            if (gr.needs_grad(a)) {
                Tensor<T>& ga = gr.grad(a);
                for (std::int64_t i = 0; i < gy.numel(); ++i) ga[i] += alpha * gy[i];
            }
            if (gr.needs_grad(b)) {
                Tensor<T>& gb = gr.grad(b);
                for (std::int64_t i = 0; i < gy.numel(); ++i) gb[i] += beta * gy[i];
            }
        });
    return out;
}

template <typename T>
int scale(Graph<T>& g, int x, T factor) {
    Tensor<T> y = g.value(x);
    for (auto& v : y.data) v *= factor;
    const bool needs = g.needs_grad(x);
    const int out = g.append(std::move(y), needs);
    if (needs)
        g.set_backward(out, [x, factor, out](Graph<T>& gr) {
            const Tensor<T>& gy = gr.grad(out);
            Tensor<T>& gx = gr.grad(x);
            for (std::int64_t i = 0; i < gy.numel(); ++i) gx[i] += factor * gy[i];
        });
    return out;
}

template <typename T>
int concat_channels(Graph<T>& g, int a, int b) {
    Tensor<T> y;
    ops::concat_channels_forward(g.value(a), g.value(b), y);
    const bool needs = g.needs_grad(a) || g.needs_grad(b);
    const int out = g.append(std::move(y), needs);
    if (needs)
        g.set_backward(out, [a, b, out](Graph<T>& gr) {
            const Tensor<T>& gy = gr.grad(out);
            const std::int64_t na = gr.value(a).numel();
            if (gr.needs_grad(a)) {
                Tensor<T>& ga = gr.grad(a);
                for (std::int64_t i = 0; i < na; ++i) ga[i] += gy[i];
            }
            if (gr.needs_grad(b)) {
                Tensor<T>& gb = gr.grad(b);
                for (std::int64_t i = 0; i < gy.numel() - na; ++i) gb[i] += gy[na + i];
            }
        });
    return out;
}

// scalar = sum_i weights[i] * x[i]; scalarizes op outputs for gradient checks.
template <typename T>
int dot_const(Graph<T>& g, int x, Tensor<T> weights) {
    const Tensor<T>& vx = g.value(x);
    if (weights.numel() != vx.numel()) throw std::invalid_argument("dot_const: size mismatch");
    Tensor<T> y({1});
    T s = T(0);
    for (std::int64_t i = 0; i < vx.numel(); ++i) s += vx[i] * weights[i];
    y[0] = s;
    const bool needs = g.needs_grad(x);
    const int out = g.append(std::move(y), needs);
    if (needs) {
        auto w = std::make_shared<Tensor<T>>(std::move(weights));
        g.set_backward(out, [x, w, out](Graph<T>& gr) {
            const T go = gr.grad(out)[0];
            Tensor<T>& gx = gr.grad(x);
            for (std::int64_t i = 0; i < gx.numel(); ++i) gx[i] += go * (*w)[i];
        });
    }
    return out;
}

// --- finite-difference gradient check ---------------------------------------
//
// The builder receives the current input tensors and must return the scalar
// value of the function. Analytic gradients are supplied by the caller; the
// checker owns only the central-difference side, so the two paths stay
// independent.

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::int64_t checked = 0;
    std::string worst;  // "input#k[i]"

    bool pass(double tol) const { return max_rel_err < tol; }
};

inline double rel_err(double a, double b) {
    const double denom = std::max(std::abs(a) + std::abs(b), 1e-6);
    return std::abs(a - b) / denom;
}

inline GradCheckReport grad_check(
    const std::function<double(const std::vector<TensorD>&)>& scalar_fn,
    std::vector<TensorD> inputs, const std::vector<TensorD>& analytic, double h) {
    GradCheckReport rep;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        for (std::int64_t i = 0; i < inputs[k].numel(); ++i) {
            const double orig = inputs[k][i];
            inputs[k][i] = orig + h;
            const double fp = scalar_fn(inputs);
            inputs[k][i] = orig - h;
            const double fm = scalar_fn(inputs);
            inputs[k][i] = orig;
            const double numeric = (fp - fm) / (2.0 * h);
            const double err = rel_err(analytic[k][i], numeric);
            ++rep.checked;
            if (err > rep.max_rel_err) {
                rep.max_rel_err = err;
                rep.worst = "input#" + std::to_string(k) + "[" + std::to_string(i) + "]";
            }
        }
    }
    return rep;
}

}  // namespace etpick::nn
