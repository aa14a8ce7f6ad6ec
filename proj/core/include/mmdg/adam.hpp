#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mmdg/error.hpp"
#include "mmdg/tensor.hpp"

namespace mmdg {

template <typename S>
struct NamedParamT {
    std::string name;
    TensorT<S>* tensor;
};

using NamedParam = NamedParamT<float>;

/// Adam accumulator state. Moments are zero at step 0; the step counter
/// increases by exactly one per call to adam_step.
template <typename S>
struct AdamStateT {
    struct Slot {
        std::vector<S> m, v;
    };
    std::vector<Slot> slots;
    int64_t step = 0;
    S beta1 = S(0.9);
    S beta2 = S(0.999);
    S eps = S(1e-8);

    void init(const std::vector<NamedParamT<S>>& params) {
        slots.clear();
        slots.resize(params.size());
        for (size_t i = 0; i < params.size(); ++i) {
            slots[i].m.assign(params[i].tensor->size(), S(0));
            slots[i].v.assign(params[i].tensor->size(), S(0));
        }
        step = 0;
    }
};

using AdamState = AdamStateT<float>;

/// One bias-corrected Adam update over all parameters. `grads[i]` pairs with
/// `params[i]`. A non-finite gradient aborts and names the offending
/// parameter; parameters are left untouched in that case.
template <typename S>
void adam_step(const std::vector<NamedParamT<S>>& params, const std::vector<const TensorT<S>*>& grads,
               AdamStateT<S>& state, S lr) {
    if (params.size() != grads.size() || params.size() != state.slots.size())
        throw ShapeError("adam_step: params/grads/state counts differ");
    for (size_t i = 0; i < params.size(); ++i) {
        if (!params[i].tensor->same_shape(*grads[i]))
            throw ShapeError("adam_step: gradient shape mismatch for " + params[i].name);
        for (S g : grads[i]->values())
            if (!std::isfinite(static_cast<double>(g)))
                throw NumericError("adam_step: non-finite gradient in parameter '" + params[i].name + "'");
    }
    state.step += 1;
    const S bc1 = S(1) - std::pow(state.beta1, static_cast<S>(state.step));
    const S bc2 = S(1) - std::pow(state.beta2, static_cast<S>(state.step));
    for (size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i].tensor->values();
        const auto& g = grads[i]->values();
        auto& m = state.slots[i].m;
        auto& v = state.slots[i].v;
        for (size_t j = 0; j < p.size(); ++j) {
            m[j] = state.beta1 * m[j] + (S(1) - state.beta1) * g[j];
            v[j] = state.beta2 * v[j] + (S(1) - state.beta2) * g[j] * g[j];
            const S mhat = m[j] / bc1;
            const S vhat = v[j] / bc2;
            p[j] -= lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

}  // namespace mmdg
