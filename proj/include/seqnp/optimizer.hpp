#pragma once

#include <cmath>
#include <cstddef>

#include "seqnp/autodiff.hpp"
#include "seqnp/defaults.hpp"

namespace seqnp {

// Adam with bias correction and classic L2 weight decay folded into the
// gradient. Moments mirror the parameter map key for key.
struct OptimizerState {
    NamedTensors m;
    NamedTensors v;
    std::size_t step = 0;
    double base_lr = defaults::kVaLearningRate;
    double weight_decay = defaults::kVaWeightDecay;
    double beta1 = defaults::kAdamBeta1;
    double beta2 = defaults::kAdamBeta2;
    double epsilon = defaults::kAdamEpsilon;
};

inline OptimizerState make_optimizer_state(const NamedTensors& params, double base_lr,
                                           double weight_decay,
                                           double beta1 = defaults::kAdamBeta1,
                                           double beta2 = defaults::kAdamBeta2,
                                           double epsilon = defaults::kAdamEpsilon) {
    OptimizerState state;
    state.base_lr = base_lr;
    state.weight_decay = weight_decay;
    state.beta1 = beta1;
    state.beta2 = beta2;
    state.epsilon = epsilon;
    for (const auto& [name, tensor] : params) {
        state.m[name] = Tensor::zeros(tensor.shape());
        state.v[name] = Tensor::zeros(tensor.shape());
    }
    return state;
}

inline void adam_step(NamedTensors& params, OptimizerState& state, const NamedTensors& grads,
                      double lr_t) {
    if (grads.size() != params.size()) {
        throw ContractError("adam_step: gradient map has " + std::to_string(grads.size()) +
                            " entries, parameters have " + std::to_string(params.size()));
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (auto& [name, p] : params) {
        auto git = grads.find(name);
        if (git == grads.end()) throw ContractError("adam_step: no gradient for " + name);
        const Tensor& g = git->second;
        Tensor& m = state.m.at(name);
        Tensor& v = state.v.at(name);
        for (std::size_t i = 0; i < p.numel(); ++i) {
            const double gi = g[i] + state.weight_decay * p[i];
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * gi;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi;
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            p[i] -= lr_t * m_hat / (std::sqrt(v_hat) + state.epsilon);
        }
    }
}

// Single cosine annealing cycle over the whole run: base_lr at step 0,
// 0 at step == total_steps.
inline double cosine_lr(double base_lr, std::size_t step, std::size_t total_steps) {
    if (step > total_steps) {
        throw ContractError("cosine_lr: step " + std::to_string(step) + " exceeds total " +
                            std::to_string(total_steps));
    }
    if (total_steps == 0) return base_lr;
    const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
    return base_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * frac));
}

}  // namespace seqnp
