#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "seqnp/autodiff.hpp"
#include "seqnp/data.hpp"
#include "seqnp/defaults.hpp"
#include "seqnp/distributions.hpp"
#include "seqnp/rng.hpp"
#include "seqnp/split.hpp"

namespace seqnp {

// Model variants covered by the ablation grid:
//   latent          - global latent z, sampled during training
//   deterministic   - single-branch latent encoder, no sampling
//   latent_det      - latent path plus a deterministic context code
//   latent_det_att  - as latent_det, deterministic code aggregated by
//                     cross-attention from target features
//   no_labels       - latent model whose encoder sees zero label vectors
enum class Variant { latent, deterministic, latent_det, latent_det_att, no_labels };

inline std::string variant_name(Variant v) {
    switch (v) {
        case Variant::latent: return "latent";
        case Variant::deterministic: return "deterministic";
        case Variant::latent_det: return "latent+det";
        case Variant::latent_det_att: return "latent+det+att";
        case Variant::no_labels: return "no_labels";
    }
    return "latent";
}

inline Variant variant_from_name(const std::string& name) {
    if (name == "latent") return Variant::latent;
    if (name == "deterministic") return Variant::deterministic;
    if (name == "latent+det" || name == "latent-det") return Variant::latent_det;
    if (name == "latent+det+att" || name == "latent-det-att") return Variant::latent_det_att;
    if (name == "no_labels" || name == "no-labels") return Variant::no_labels;
    throw ContractError("unknown model variant: " + name);
}

inline bool has_latent_path(Variant v) { return v != Variant::deterministic; }
inline bool has_det_path(Variant v) {
    return v == Variant::latent_det || v == Variant::latent_det_att;
}
inline bool has_attention(Variant v) { return v == Variant::latent_det_att; }
inline bool uses_labels(Variant v) { return v != Variant::no_labels; }

struct ModelConfig {
    std::size_t feature_dim = defaults::kFeatureDim;
    std::size_t label_dim = 2;
    std::size_t repr_dim = defaults::kReprDim;  // r_c and z
    std::size_t encoder_hidden1 = defaults::kEncoderHidden1;
    std::size_t encoder_hidden2 = defaults::kEncoderHidden2;
    std::size_t decoder_hidden1 = defaults::kDecoderHidden1;
    std::size_t decoder_hidden2 = defaults::kDecoderHidden2;
    std::size_t decoder_hidden3 = defaults::kDecoderHidden3;
    double sigma_min = defaults::kSigmaMin;
    Variant variant = Variant::latent;
    std::size_t attention_heads = defaults::kAttentionHeads;
    std::size_t attention_dim = defaults::kAttentionDim;

    std::size_t encoder_input_dim() const { return 2 * feature_dim; }
    std::size_t decoder_input_dim() const {
        return feature_dim + repr_dim + (has_det_path(variant) ? repr_dim : 0);
    }

    bool operator==(const ModelConfig&) const = default;
};

// Named parameter tensors and their shapes for a configuration. Weight
// matrices are stored input x output so rows of activations multiply them
// directly.
inline std::map<std::string, std::vector<std::size_t>> param_shapes(const ModelConfig& cfg) {
    std::map<std::string, std::vector<std::size_t>> shapes;
    auto layer = [&shapes](const std::string& name, std::size_t in, std::size_t out) {
        shapes[name + ".W"] = {in, out};
        shapes[name + ".b"] = {1, out};
    };
    layer("label_proj", cfg.label_dim, cfg.feature_dim);
    layer("enc1", cfg.encoder_input_dim(), cfg.encoder_hidden1);
    layer("enc2", cfg.encoder_hidden1, cfg.encoder_hidden2);
    layer("enc3", cfg.encoder_hidden2, cfg.repr_dim);
    layer("lat.common", cfg.repr_dim, cfg.repr_dim);
    layer("lat.mean", cfg.repr_dim, cfg.repr_dim);
    if (has_latent_path(cfg.variant)) layer("lat.std", cfg.repr_dim, cfg.repr_dim);
    layer("dec1", cfg.decoder_input_dim(), cfg.decoder_hidden1);
    layer("dec2", cfg.decoder_hidden1, cfg.decoder_hidden2);
    layer("dec3", cfg.decoder_hidden2, cfg.decoder_hidden3);
    layer("dec.mean", cfg.decoder_hidden3, cfg.label_dim);
    layer("dec.std", cfg.decoder_hidden3, cfg.label_dim);
    if (has_det_path(cfg.variant)) layer("det", cfg.repr_dim, cfg.repr_dim);
    if (has_attention(cfg.variant)) {
        for (std::size_t h = 0; h < cfg.attention_heads; ++h) {
            const std::string prefix = "attn.h" + std::to_string(h);
            shapes[prefix + ".q.W"] = {cfg.feature_dim, cfg.attention_dim};
            shapes[prefix + ".k.W"] = {cfg.feature_dim, cfg.attention_dim};
        }
    }
    return shapes;
}

// Initial bias of the latent std head. Starts the latent narrow (softplus
// of -2 plus the floor) so early z samples carry signal instead of noise;
// a wide initial latent lets the decoder learn to ignore z entirely.
inline constexpr double kLatentStdBiasInit = -2.0;

// He init for relu-fed weights, smaller scale for distribution heads.
// Relu-fed biases start slightly positive: with exact zeros, a dead row
// pins later pre-activations exactly on the relu kink, where gradients are
// ill-defined and units stay dead. Head biases start at zero. Deterministic
// given the seed: tensors are filled in name order from a single stream.
inline NamedTensors init_params(const ModelConfig& cfg, std::uint64_t seed) {
    std::mt19937_64 rng = make_engine(seed, 0x1417);
    NamedTensors params;
    for (const auto& [name, shape] : param_shapes(cfg)) {
        if (name.size() >= 2 && name.compare(name.size() - 2, 2, ".b") == 0) {
            const bool relu_fed = name.rfind("enc", 0) == 0 || name.rfind("dec1", 0) == 0 ||
                                  name.rfind("dec2", 0) == 0 || name.rfind("dec3", 0) == 0 ||
                                  name == "lat.common.b";
            params[name] = name == "lat.std.b" ? Tensor::full(shape, kLatentStdBiasInit)
                           : relu_fed          ? Tensor::full(shape, 0.01)
                                               : Tensor::zeros(shape);
            continue;
        }
        if (name == "lat.std.W") {
            // zero start: a random std head inherits a sigma ~ ||r|| trend
            // that training barely corrects, poisoning uncertainty ranking
            params[name] = Tensor::zeros(shape);
            continue;
        }
        const double fan_in = static_cast<double>(shape[0]);
        const bool head = name.rfind("lat.mean", 0) == 0 || name.rfind("lat.std", 0) == 0 ||
                          name.rfind("dec.mean", 0) == 0 || name.rfind("dec.std", 0) == 0;
        const double scale = head ? std::sqrt(1.0 / fan_in) : std::sqrt(2.0 / fan_in);
        params[name] = normal_tensor(rng, shape, scale);
    }
    return params;
}

using LeafMap = std::map<std::string, Var>;

namespace detail {

inline const Var& leaf(const LeafMap& leaves, const std::string& name) {
    auto it = leaves.find(name);
    if (it == leaves.end()) {
        throw ContractError("model: parameter " + name + " missing (variant mismatch?)");
    }
    return it->second;
}

}  // namespace detail

// q_phi over rows: projects labels up to the feature dimension, concatenates
// with the features and applies the three-layer encoder MLP.
// x: N x feature_dim, y: N x label_dim -> N x repr_dim.
inline Var encode_pairs(const LeafMap& leaves, const ModelConfig& cfg, const Var& x,
                        const Var& y) {
    if (x.value().cols() != cfg.feature_dim) {
        throw ShapeError("encode_pairs: features " + Tensor::shape_string(x.value().shape()) +
                         " do not match feature_dim " + std::to_string(cfg.feature_dim));
    }
    if (y.value().cols() != cfg.label_dim || y.value().rows() != x.value().rows()) {
        throw ShapeError("encode_pairs: labels " + Tensor::shape_string(y.value().shape()) +
                         " do not match features " + Tensor::shape_string(x.value().shape()));
    }
    Var y_up = linear(y, detail::leaf(leaves, "label_proj.W"), detail::leaf(leaves, "label_proj.b"));
    Var h = concat_cols(x, y_up);
    h = relu(linear(h, detail::leaf(leaves, "enc1.W"), detail::leaf(leaves, "enc1.b")));
    h = relu(linear(h, detail::leaf(leaves, "enc2.W"), detail::leaf(leaves, "enc2.b")));
    return linear(h, detail::leaf(leaves, "enc3.W"), detail::leaf(leaves, "enc3.b"));
}

// Permutation-invariant mean aggregation: N x R -> 1 x R.
inline Var aggregate_mean(const Var& reprs) {
    if (reprs.value().rows() == 0) throw ContractError("aggregate: empty context");
    return mean_rows(reprs);
}

// Scaled dot-product cross-attention: target features query the context
// frames, values are the context representations, heads are averaged.
// Returns one aggregated representation per target row (T x R).
inline Var aggregate_attention(const LeafMap& leaves, const ModelConfig& cfg,
                               const Var& target_x, const Var& ctx_x, const Var& ctx_reprs) {
    if (ctx_reprs.value().rows() == 0) throw ContractError("aggregate: empty context");
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(cfg.attention_dim));
    std::optional<Var> combined;
    for (std::size_t h = 0; h < cfg.attention_heads; ++h) {
        const std::string prefix = "attn.h" + std::to_string(h);
        Var q = matmul(target_x, detail::leaf(leaves, prefix + ".q.W"));
        Var k = matmul(ctx_x, detail::leaf(leaves, prefix + ".k.W"));
        Var scores = mul(matmul(q, transpose(k)), inv_sqrt_d);
        Var weights = softmax_rows(scores);
        Var head = matmul(weights, ctx_reprs);
        combined = combined ? add(*combined, head) : head;
    }
    return mul(*combined, 1.0 / static_cast<double>(cfg.attention_heads));
}

// Latent encoder: shared layer then independent mean and std heads.
// Works row-wise, so it scores single-frame contexts in one batch.
inline GaussianVar latent_encode_rows(const LeafMap& leaves, const ModelConfig& cfg,
                                      const Var& r) {
    Var h = relu(linear(r, detail::leaf(leaves, "lat.common.W"),
                        detail::leaf(leaves, "lat.common.b")));
    Var mean = linear(h, detail::leaf(leaves, "lat.mean.W"), detail::leaf(leaves, "lat.mean.b"));
    Var std = add(softplus(linear(h, detail::leaf(leaves, "lat.std.W"),
                                  detail::leaf(leaves, "lat.std.b"))),
                  cfg.sigma_min);
    return GaussianVar{mean, std};
}

// Single-branch latent encoder for the deterministic variant: same shared
// layer and mean head, no distribution and no sampling.
inline Var deterministic_code(const LeafMap& leaves, const ModelConfig& cfg, const Var& r) {
    (void)cfg;
    Var h = relu(linear(r, detail::leaf(leaves, "lat.common.W"),
                        detail::leaf(leaves, "lat.common.b")));
    return linear(h, detail::leaf(leaves, "lat.mean.W"), detail::leaf(leaves, "lat.mean.b"));
}

// f_theta over target rows. z is one 1 x R code shared by every row; the
// optional deterministic representation is either 1 x R (shared) or T x R
// (per-target, attention aggregation).
inline GaussianVar decode_rows(const LeafMap& leaves, const ModelConfig& cfg, const Var& x,
                               const Var& z_row, const std::optional<Var>& det_repr) {
    const std::size_t t = x.value().rows();
    if (has_det_path(cfg.variant) && !det_repr) {
        throw ContractError("decode: deterministic path enabled but no representation given");
    }
    if (!has_det_path(cfg.variant) && det_repr) {
        throw ContractError("decode: deterministic representation given but path disabled");
    }
    Var in = concat_cols(x, broadcast_rows(z_row, t));
    if (det_repr) {
        Var det = det_repr->value().rows() == 1 && t != 1 ? broadcast_rows(*det_repr, t)
                                                          : *det_repr;
        in = concat_cols(in, det);
    }
    Var h = relu(linear(in, detail::leaf(leaves, "dec1.W"), detail::leaf(leaves, "dec1.b")));
    h = relu(linear(h, detail::leaf(leaves, "dec2.W"), detail::leaf(leaves, "dec2.b")));
    h = relu(linear(h, detail::leaf(leaves, "dec3.W"), detail::leaf(leaves, "dec3.b")));
    Var mean = linear(h, detail::leaf(leaves, "dec.mean.W"), detail::leaf(leaves, "dec.mean.b"));
    Var std = add(softplus(linear(h, detail::leaf(leaves, "dec.std.W"),
                                  detail::leaf(leaves, "dec.std.b"))),
                  cfg.sigma_min);
    return GaussianVar{mean, std};
}

struct EncodedContext {
    Var per_frame;   // N x R
    Var aggregated;  // 1 x R mean over rows of per_frame
    std::optional<GaussianVar> latent;  // absent for the deterministic variant
};

struct ForwardResult {
    GaussianVar predictive;  // T x label_dim mean/std
    EncodedContext context;
    EncodedContext target;
    std::optional<Var> z;  // code fed to the decoder, 1 x R
};

// Full pass over one sequence. Encodes the context set with the labels named
// by the split, aggregates, forms the latent, draws one z shared by every
// target frame (z_noise != nullptr: reparameterized sample; nullptr: the
// predictive mean), and decodes all frames. The target set -- always the
// whole sequence, encoded with ground-truth labels -- yields the second
// latent the KL term compares against.
inline ForwardResult forward(Tape& tape, const LeafMap& leaves, const ModelConfig& cfg,
                             const Sequence& seq, const ContextTargetSplit& split,
                             const Tensor* z_noise) {
    split.validate();
    if (split.seq_len != seq.length()) {
        throw ContractError("forward: split length " + std::to_string(split.seq_len) +
                            " does not match sequence length " + std::to_string(seq.length()));
    }
    const std::size_t t_count = seq.length();
    const std::size_t c_count = split.context_indices.size();
    const bool labelled = uses_labels(cfg.variant);

    Var x_all = tape.constant(seq.features);
    Var x_ctx = gather_rows(x_all, split.context_indices);

    Var y_ctx;
    if (labelled) {
        const Tensor& src = split.context_label_source == LabelSource::pseudo_label
                                ? seq.pseudo_labels
                                : seq.labels;
        Var y_src = tape.constant(src);
        y_ctx = gather_rows(y_src, split.context_indices);
    } else {
        y_ctx = tape.constant(Tensor::zeros({c_count, cfg.label_dim}));
    }

    EncodedContext ctx;
    ctx.per_frame = encode_pairs(leaves, cfg, x_ctx, y_ctx);
    ctx.aggregated = aggregate_mean(ctx.per_frame);

    Var y_tgt = labelled ? tape.constant(seq.labels)
                         : tape.constant(Tensor::zeros({t_count, cfg.label_dim}));
    EncodedContext tgt;
    tgt.per_frame = encode_pairs(leaves, cfg, x_all, y_tgt);
    tgt.aggregated = aggregate_mean(tgt.per_frame);

    Var z;
    if (cfg.variant == Variant::deterministic) {
        z = deterministic_code(leaves, cfg, ctx.aggregated);
    } else {
        ctx.latent = latent_encode_rows(leaves, cfg, ctx.aggregated);
        tgt.latent = latent_encode_rows(leaves, cfg, tgt.aggregated);
        z = z_noise ? rsample(*ctx.latent, tape.constant(*z_noise)) : ctx.latent->mean;
    }

    std::optional<Var> det;
    if (has_det_path(cfg.variant)) {
        Var det_in = has_attention(cfg.variant)
                         ? aggregate_attention(leaves, cfg, x_all, x_ctx, ctx.per_frame)
                         : ctx.aggregated;
        det = linear(det_in, detail::leaf(leaves, "det.W"), detail::leaf(leaves, "det.b"));
    }

    ForwardResult result;
    result.predictive = decode_rows(leaves, cfg, x_all, z, det);
    result.context = std::move(ctx);
    result.target = std::move(tgt);
    result.z = z;
    return result;
}

// ---------------------------------------------------------------------------
// Inference entry points (no gradients kept, z = predictive mean).
// ---------------------------------------------------------------------------

struct Predictive {
    Tensor mean;  // T x label_dim
    Tensor std;   // T x label_dim
};

// Mean-trace prediction plus one coherent trace per supplied noise draw.
// The context is encoded once; each trace decodes the whole sequence under
// its own z.
inline std::pair<Predictive, std::vector<Predictive>> predict_with_samples(
    const NamedTensors& params, const ModelConfig& cfg, const Sequence& seq,
    const ContextTargetSplit& split, const std::vector<Tensor>& z_noises) {
    Tape tape;
    LeafMap leaves = register_leaves(tape, params);
    ForwardResult mean_pass = forward(tape, leaves, cfg, seq, split, nullptr);
    Predictive mean_trace{mean_pass.predictive.mean.value(), mean_pass.predictive.std.value()};

    std::vector<Predictive> samples;
    samples.reserve(z_noises.size());
    if (!z_noises.empty()) {
        if (!mean_pass.context.latent) {
            throw ContractError("predict_with_samples: variant has no latent to sample");
        }
        Var x_all = tape.constant(seq.features);
        std::optional<Var> det;
        if (has_det_path(cfg.variant)) {
            Var det_in = has_attention(cfg.variant)
                             ? aggregate_attention(leaves, cfg, x_all,
                                                   gather_rows(x_all, split.context_indices),
                                                   mean_pass.context.per_frame)
                             : mean_pass.context.aggregated;
            det = linear(det_in, detail::leaf(leaves, "det.W"), detail::leaf(leaves, "det.b"));
        }
        for (const Tensor& noise : z_noises) {
            Var z = rsample(*mean_pass.context.latent, tape.constant(noise));
            GaussianVar pred = decode_rows(leaves, cfg, x_all, z, det);
            samples.push_back(Predictive{pred.mean.value(), pred.std.value()});
        }
    }
    return {std::move(mean_trace), std::move(samples)};
}

inline Predictive predict(const NamedTensors& params, const ModelConfig& cfg,
                          const Sequence& seq, const ContextTargetSplit& split) {
    return predict_with_samples(params, cfg, seq, split, {}).first;
}

// Value-level single-pair encoder, mostly a test seam.
inline Tensor encode_pair_value(const NamedTensors& params, const ModelConfig& cfg,
                                const Tensor& x_row, const Tensor& y_row) {
    Tape tape;
    LeafMap leaves = register_leaves(tape, params);
    Var r = encode_pairs(leaves, cfg, tape.constant(x_row), tape.constant(y_row));
    return r.value();
}

}  // namespace seqnp
