#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "seqnp/model.hpp"
#include "seqnp/split.hpp"

namespace seqnp {

enum class SelectionDirection { lowest, highest };

// Uniform context placement without replacement. Used during training; the
// count itself is drawn upstream.
inline ContextTargetSplit select_random(std::size_t seq_len, std::size_t num_context,
                                        std::mt19937_64& rng) {
    if (num_context < 1 || num_context > seq_len) {
        throw ContractError("select_random: num_context " + std::to_string(num_context) +
                            " out of range [1, " + std::to_string(seq_len) + "]");
    }
    std::vector<std::size_t> pool(seq_len);
    std::iota(pool.begin(), pool.end(), 0);
    for (std::size_t i = 0; i < num_context; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, seq_len - 1);
        std::swap(pool[i], pool[pick(rng)]);
    }
    ContextTargetSplit split;
    split.context_indices.assign(pool.begin(), pool.begin() + num_context);
    std::sort(split.context_indices.begin(), split.context_indices.end());
    split.seq_len = seq_len;
    return split;
}

// k indices with the smallest (lowest) or largest (highest) score; ties go
// to the smaller frame index. Output is sorted by frame index.
inline std::vector<std::size_t> select_top_k(const std::vector<double>& scores, std::size_t k,
                                             SelectionDirection direction) {
    if (k > scores.size()) {
        throw ContractError("select_top_k: k " + std::to_string(k) + " exceeds " +
                            std::to_string(scores.size()) + " scores");
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) {
            return direction == SelectionDirection::lowest ? scores[a] < scores[b]
                                                           : scores[a] > scores[b];
        }
        return a < b;
    });
    order.resize(k);
    std::sort(order.begin(), order.end());
    return order;
}

// ||sigma_c||_2 for every frame treated as a single-frame context: encode
// (x_c, y_hat_c), run the latent encoder row-wise, take the norm of the std.
inline std::vector<double> uncertainty_scores(const NamedTensors& params,
                                              const ModelConfig& cfg, const Sequence& seq) {
    if (!has_latent_path(cfg.variant)) {
        throw ContractError("uncertainty_scores: variant has no latent std");
    }
    Tape tape;
    LeafMap leaves = register_leaves(tape, params);
    Var x = tape.constant(seq.features);
    Var y = uses_labels(cfg.variant)
                ? tape.constant(seq.pseudo_labels)
                : tape.constant(Tensor::zeros({seq.length(), cfg.label_dim}));
    Var reprs = encode_pairs(leaves, cfg, x, y);
    GaussianVar lat = latent_encode_rows(leaves, cfg, reprs);
    const Tensor& std_rows = lat.std.value();
    std::vector<double> scores(seq.length());
    for (std::size_t t = 0; t < seq.length(); ++t) {
        double acc = 0.0;
        for (std::size_t j = 0; j < cfg.repr_dim; ++j) {
            acc += std_rows(t, j) * std_rows(t, j);
        }
        scores[t] = std::sqrt(acc);
    }
    return scores;
}

// Test-time context selection: pick the frames whose single-frame latent
// uncertainty is lowest (the method) or highest (ablation). Deterministic
// given the parameters and the sequence; never used by the trainer.
inline ContextTargetSplit select_by_uncertainty(const NamedTensors& params,
                                                const ModelConfig& cfg, const Sequence& seq,
                                                std::size_t num_context,
                                                SelectionDirection direction) {
    if (num_context < 1 || num_context > seq.length()) {
        throw ContractError("select_by_uncertainty: num_context " +
                            std::to_string(num_context) + " out of range [1, " +
                            std::to_string(seq.length()) + "]");
    }
    const std::vector<double> scores = uncertainty_scores(params, cfg, seq);
    ContextTargetSplit split;
    split.context_indices = select_top_k(scores, num_context, direction);
    split.seq_len = seq.length();
    split.context_label_source = LabelSource::pseudo_label;
    return split;
}

}  // namespace seqnp
