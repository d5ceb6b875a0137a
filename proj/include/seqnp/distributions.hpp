#pragma once

#include <cmath>

#include "seqnp/autodiff.hpp"
#include "seqnp/errors.hpp"
#include "seqnp/tensor.hpp"

namespace seqnp {

inline constexpr double kHalfLogTwoPi = 0.91893853320467274178;  // 0.5 * log(2*pi)

// Diagonal Gaussian as a plain value: a mean/std tensor pair of equal shape.
// std holds standard deviations, strictly positive in every coordinate.
struct DiagonalGaussian {
    Tensor mean;
    Tensor std;

    void validate() const {
        if (!mean.same_shape(std)) {
            throw ShapeError("DiagonalGaussian: mean " + Tensor::shape_string(mean.shape()) +
                             " and std " + Tensor::shape_string(std.shape()) + " differ");
        }
        for (std::size_t i = 0; i < std.numel(); ++i) {
            if (!(std[i] > 0.0)) {
                throw ContractError("DiagonalGaussian: std must be strictly positive, got " +
                                    std::to_string(std[i]));
            }
        }
    }
};

// mean + std (.) noise. The caller supplies the standard-normal noise from
// its own seeded engine; this module holds no RNG.
inline Tensor rsample(const DiagonalGaussian& g, const Tensor& noise) {
    if (!g.mean.same_shape(noise)) {
        throw ShapeError("rsample: distribution shape " + Tensor::shape_string(g.mean.shape()) +
                         " and noise shape " + Tensor::shape_string(noise.shape()) + " differ");
    }
    Tensor out(g.mean.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = g.mean[i] + g.std[i] * noise[i];
    return out;
}

// sum_i [ -1/2 log(2 pi) - log std_i - (y_i - mean_i)^2 / (2 std_i^2) ]
inline double log_prob(const DiagonalGaussian& g, const Tensor& y) {
    if (!g.mean.same_shape(y)) {
        throw ShapeError("log_prob: distribution shape " + Tensor::shape_string(g.mean.shape()) +
                         " and value shape " + Tensor::shape_string(y.shape()) + " differ");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < y.numel(); ++i) {
        const double d = (y[i] - g.mean[i]) / g.std[i];
        total += -kHalfLogTwoPi - std::log(g.std[i]) - 0.5 * d * d;
    }
    return total;
}

// Closed-form KL(q || p) for diagonal Gaussians:
// sum_i [ log(sp_i/sq_i) + (sq_i^2 + (mq_i - mp_i)^2) / (2 sp_i^2) - 1/2 ]
inline double kl_divergence(const DiagonalGaussian& q, const DiagonalGaussian& p) {
    if (!q.mean.same_shape(p.mean)) {
        throw ShapeError("kl_divergence: shapes " + Tensor::shape_string(q.mean.shape()) +
                         " and " + Tensor::shape_string(p.mean.shape()) + " differ");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < q.mean.numel(); ++i) {
        const double sq = q.std[i], sp = p.std[i];
        const double dm = q.mean[i] - p.mean[i];
        total += std::log(sp / sq) + (sq * sq + dm * dm) / (2.0 * sp * sp) - 0.5;
    }
    return total;
}

// ---------------------------------------------------------------------------
// Graph-side counterpart: the same distribution with differentiable
// parameters living on a tape. Values must agree with the plain functions
// above; a unit test pins that equivalence.
// ---------------------------------------------------------------------------

struct GaussianVar {
    Var mean;
    Var std;

    DiagonalGaussian detach() const { return DiagonalGaussian{mean.value(), std.value()}; }
};

inline Var rsample(const GaussianVar& g, const Var& noise) {
    if (!g.mean.value().same_shape(noise.value())) {
        throw ShapeError("rsample: distribution shape " +
                         Tensor::shape_string(g.mean.value().shape()) + " and noise shape " +
                         Tensor::shape_string(noise.value().shape()) + " differ");
    }
    return add(g.mean, mul(g.std, noise));
}

inline Var log_prob(const GaussianVar& g, const Var& y) {
    Var d = div(sub(y, g.mean), g.std);
    Var per_coord = sub(mul(square(d), -0.5), log(g.std));
    Var total = sum_all(per_coord);
    return add(total, -kHalfLogTwoPi * static_cast<double>(y.value().numel()));
}

inline Var kl_divergence(const GaussianVar& q, const GaussianVar& p) {
    Var log_ratio = sub(log(p.std), log(q.std));
    Var dm = sub(q.mean, p.mean);
    Var quad = div(add(square(q.std), square(dm)), mul(square(p.std), 2.0));
    Var per_coord = add(add(log_ratio, quad), -0.5);
    return sum_all(per_coord);
}

}  // namespace seqnp
