#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "etpick/tensor.hpp"

namespace etpick {

// Ordered name -> tensor map. Insertion order is the canonical order used by
// checkpoints and by the optimizer, so runs are byte-reproducible.
// `version` counts mutations; the trainer uses it to assert that teacher
// weights are only ever written by the EMA update.
template <typename T>
struct ParamSet {
    std::vector<std::string> names;
    std::vector<Tensor<T>> tensors;
    std::int64_t step = 0;
    std::uint64_t version = 0;

    int add(const std::string& name, Tensor<T> t) {
        if (index_.count(name)) throw std::invalid_argument("duplicate parameter: " + name);
        index_[name] = static_cast<int>(names.size());
        names.push_back(name);
        tensors.push_back(std::move(t));
        return static_cast<int>(names.size()) - 1;
    }

    int size() const { return static_cast<int>(names.size()); }

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    int index_of(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw std::out_of_range("no such parameter: " + name);
        return it->second;
    }

    Tensor<T>& at(const std::string& name) { return tensors[static_cast<std::size_t>(index_of(name))]; }
    const Tensor<T>& at(const std::string& name) const {
        return tensors[static_cast<std::size_t>(index_of(name))];
    }

    std::int64_t total_elements() const {
        std::int64_t n = 0;
        for (const auto& t : tensors) n += t.numel();
        return n;
    }

    bool shape_identical(const ParamSet& o) const {
        if (names != o.names) return false;
        for (std::size_t i = 0; i < tensors.size(); ++i)
            if (tensors[i].shape != o.tensors[i].shape) return false;
        return true;
    }

    bool bytes_identical(const ParamSet& o) const {
        if (!shape_identical(o)) return false;
        for (std::size_t i = 0; i < tensors.size(); ++i)
            if (tensors[i].data != o.tensors[i].data) return false;
        return true;
    }

    ParamSet clone() const {
        ParamSet c = *this;  // deep copy: tensors own their storage
        return c;
    }

private:
    std::unordered_map<std::string, int> index_;
};

using ParamSetF = ParamSet<float>;
using ParamSetD = ParamSet<double>;

// ---------------------------------------------------------------------------
// Adam with bias correction.
// ---------------------------------------------------------------------------

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <typename T>
struct OptimizerState {
    AdamConfig cfg;
    std::vector<Tensor<T>> m;  // first moments, aligned with ParamSet order
    std::vector<Tensor<T>> v;  // second moments
    std::int64_t step = 0;

    static OptimizerState init(const ParamSet<T>& params, const AdamConfig& cfg) {
        OptimizerState s;
        s.cfg = cfg;
        for (const auto& t : params.tensors) {
            s.m.emplace_back(t.shape);
            s.v.emplace_back(t.shape);
        }
        return s;
    }
};

using OptimizerStateF = OptimizerState<float>;

// One Adam step. `grads` must align with `params` (same order, same shapes).
// `lr_override` < 0 means use state.cfg.lr; schedules pass the current rate.
template <typename T>
void adam_step(ParamSet<T>& params, const std::vector<Tensor<T>>& grads,
               OptimizerState<T>& state, double lr_override = -1.0) {
    if (static_cast<int>(grads.size()) != params.size())
        throw std::invalid_argument("adam_step: missing gradient for a parameter");
    for (int i = 0; i < params.size(); ++i)
        if (!grads[static_cast<std::size_t>(i)].same_shape(params.tensors[static_cast<std::size_t>(i)]))
            throw std::invalid_argument("adam_step: gradient shape mismatch for " + params.names[static_cast<std::size_t>(i)]);

    state.step += 1;
    const double lr = lr_override >= 0.0 ? lr_override : state.cfg.lr;
    const double b1 = state.cfg.beta1, b2 = state.cfg.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));

    for (int p = 0; p < params.size(); ++p) {
        Tensor<T>& theta = params.tensors[static_cast<std::size_t>(p)];
        Tensor<T>& m = state.m[static_cast<std::size_t>(p)];
        Tensor<T>& v = state.v[static_cast<std::size_t>(p)];
        const Tensor<T>& grad = grads[static_cast<std::size_t>(p)];
        for (std::int64_t i = 0; i < theta.numel(); ++i) {
            const double gi = static_cast<double>(grad[i]);
            const double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * gi;
            const double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * gi * gi;
            m[i] = static_cast<T>(mi);
            v[i] = static_cast<T>(vi);
            const double mhat = mi / bc1;
            const double vhat = vi / bc2;
            theta[i] = static_cast<T>(static_cast<double>(theta[i]) -
                                      lr * mhat / (std::sqrt(vhat) + state.cfg.eps));
        }
    }
    params.step += 1;
    params.version += 1;
}

// teacher <- (1-alpha)*teacher + alpha*student, elementwise.
template <typename T>
void ema_update(ParamSet<T>& teacher, const ParamSet<T>& student, double alpha) {
    if (!teacher.shape_identical(student))
        throw std::invalid_argument("ema_update: parameter shape mismatch");
    const T a = static_cast<T>(alpha);
    const T om = static_cast<T>(1.0 - alpha);
    for (std::size_t t = 0; t < teacher.tensors.size(); ++t) {
        Tensor<T>& th = teacher.tensors[t];
        const Tensor<T>& st = student.tensors[t];
        for (std::int64_t i = 0; i < th.numel(); ++i) th[i] = om * th[i] + a * st[i];
    }
    teacher.version += 1;
}

// L2 distance between two aligned parameter sets (training diagnostics).
template <typename T>
double param_distance(const ParamSet<T>& a, const ParamSet<T>& b) {
    double s = 0.0;
    for (std::size_t t = 0; t < a.tensors.size(); ++t)
        for (std::int64_t i = 0; i < a.tensors[t].numel(); ++i) {
            const double d = static_cast<double>(a.tensors[t][i]) - static_cast<double>(b.tensors[t][i]);
            s += d * d;
        }
    return std::sqrt(s);
}

}  // namespace etpick
