#pragma once

#include <cmath>
#include <random>

#include "seqnp/data.hpp"
#include "seqnp/model.hpp"
#include "seqnp/rng.hpp"

namespace testutil {

// Small architecture that keeps unit tests fast.
inline seqnp::ModelConfig toy_config(seqnp::Variant variant = seqnp::Variant::latent,
                                     std::size_t feature_dim = 8, std::size_t label_dim = 2) {
    seqnp::ModelConfig cfg;
    cfg.feature_dim = feature_dim;
    cfg.label_dim = label_dim;
    cfg.repr_dim = 4;
    cfg.encoder_hidden1 = 8;
    cfg.encoder_hidden2 = 6;
    cfg.decoder_hidden1 = 6;
    cfg.decoder_hidden2 = 5;
    cfg.decoder_hidden3 = 4;
    cfg.variant = variant;
    cfg.attention_heads = 2;
    cfg.attention_dim = 3;
    return cfg;
}

inline seqnp::Sequence toy_sequence(std::mt19937_64& rng, std::size_t len,
                                    const seqnp::ModelConfig& cfg, const std::string& id = "toy") {
    seqnp::Sequence seq;
    seq.id = id;
    seq.features = seqnp::normal_tensor(rng, {len, cfg.feature_dim});
    seq.labels = seqnp::Tensor({len, cfg.label_dim});
    seq.pseudo_labels = seqnp::Tensor({len, cfg.label_dim});
    std::normal_distribution<double> dist(0.0, 1.0);
    for (std::size_t i = 0; i < seq.labels.numel(); ++i) {
        seq.labels[i] = std::tanh(dist(rng));
        seq.pseudo_labels[i] = std::tanh(seq.labels[i] + 0.2 * dist(rng));
    }
    return seq;
}

inline seqnp::NamedTensors zero_params(const seqnp::ModelConfig& cfg) {
    seqnp::NamedTensors params;
    for (const auto& [name, shape] : seqnp::param_shapes(cfg)) {
        params[name] = seqnp::Tensor::zeros(shape);
    }
    return params;
}

}  // namespace testutil
