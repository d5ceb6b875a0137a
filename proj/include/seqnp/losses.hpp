#pragma once

#include <string>

#include "seqnp/autodiff.hpp"
#include "seqnp/distributions.hpp"
#include "seqnp/model.hpp"

namespace seqnp {

enum class LossVariant { nll, nll_kl, nll_reg, nll_reg_kl };

inline std::string loss_variant_name(LossVariant v) {
    switch (v) {
        case LossVariant::nll: return "nll";
        case LossVariant::nll_kl: return "nll+kl";
        case LossVariant::nll_reg: return "nll+reg";
        case LossVariant::nll_reg_kl: return "nll+reg+kl";
    }
    return "nll";
}

inline LossVariant loss_variant_from_name(const std::string& name) {
    if (name == "nll") return LossVariant::nll;
    if (name == "nll+kl" || name == "nll-kl") return LossVariant::nll_kl;
    if (name == "nll+reg" || name == "nll-reg") return LossVariant::nll_reg;
    if (name == "nll+reg+kl" || name == "nll-reg-kl") return LossVariant::nll_reg_kl;
    throw ContractError("unknown loss variant: " + name);
}

inline bool kl_active(LossVariant v) {
    return v == LossVariant::nll_kl || v == LossVariant::nll_reg_kl;
}
inline bool reg_active(LossVariant v) {
    return v == LossVariant::nll_reg || v == LossVariant::nll_reg_kl;
}

struct LossWeights {
    double lambda_kl = 1.0;
    double lambda_reg = 1.0;
    LossVariant variant = LossVariant::nll_reg_kl;

    void validate() const {
        if (lambda_kl < 0.0 || lambda_reg < 0.0) {
            throw ContractError("LossWeights: weights must be >= 0");
        }
    }
};

// Mean over target frames of the per-frame negative Gaussian log-density
// (summed over label dimensions). The expectation over z is the usual
// single-sample estimate: whatever z the forward pass decoded with.
inline Var loss_nll(const GaussianVar& pred, const Var& y_true) {
    const std::size_t frames = y_true.value().rows();
    const std::size_t dims = y_true.value().cols();
    Var d = div(sub(y_true, pred.mean), pred.std);
    Var per_elem = add(mul(square(d), 0.5), log(pred.std));
    Var total = mul(sum_all(per_elem), 1.0 / static_cast<double>(frames));
    return add(total, kHalfLogTwoPi * static_cast<double>(dims));
}

// KL(q(z | targets) || q(z | context)), in that order.
inline Var loss_kl(const GaussianVar& ctx_latent, const GaussianVar& tgt_latent) {
    return kl_divergence(tgt_latent, ctx_latent);
}

// Pulls the aggregate output distribution toward the standard normal: per
// label dimension, pool the predictive means and stds over target frames and
// take the KL of that Gaussian against N(0,1), summed over dimensions.
// Pooling is a mean by default; literal_sum switches to a plain sum over
// frames for comparison.
inline Var loss_reg(const GaussianVar& pred, bool literal_sum = false) {
    const std::size_t frames = pred.mean.value().rows();
    if (frames == 0) throw ContractError("loss_reg: no target frames");
    Var m = mean_rows(pred.mean);
    Var s = mean_rows(pred.std);
    if (literal_sum) {
        m = mul(m, static_cast<double>(frames));
        s = mul(s, static_cast<double>(frames));
    }
    Var per_dim = add(sub(mul(add(square(s), square(m)), 0.5), log(s)), -0.5);
    return sum_all(per_dim);
}

struct LossComponents {
    double nll = 0.0;
    double kl = 0.0;
    double reg = 0.0;
    double total = 0.0;
};

struct CompositeLoss {
    Var total;
    LossComponents values;
};

// Weighted objective for one sequence. Inactive terms contribute exactly
// nothing to the graph (their reported component values are still filled in
// when the variant can compute them; the deterministic variant has no KL).
inline CompositeLoss composite_loss(const ForwardResult& result, const Var& y_true,
                                    const LossWeights& weights, bool lreg_literal_sum = false) {
    weights.validate();
    CompositeLoss out;
    Var nll = loss_nll(result.predictive, y_true);
    out.values.nll = nll.value().scalar_value();
    out.total = nll;

    const bool has_latents = result.context.latent && result.target.latent;
    if (has_latents) {
        Var kl = loss_kl(*result.context.latent, *result.target.latent);
        out.values.kl = kl.value().scalar_value();
        if (kl_active(weights.variant)) {
            out.total = add(out.total, mul(kl, weights.lambda_kl));
        }
    }

    Var reg = loss_reg(result.predictive, lreg_literal_sum);
    out.values.reg = reg.value().scalar_value();
    if (reg_active(weights.variant)) {
        out.total = add(out.total, mul(reg, weights.lambda_reg));
    }

    out.values.total = out.total.value().scalar_value();
    return out;
}

}  // namespace seqnp
