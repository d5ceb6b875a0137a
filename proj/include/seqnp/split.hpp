#pragma once

#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "seqnp/errors.hpp"

namespace seqnp {

enum class LabelSource { ground_truth, pseudo_label };

// Index sets for one sequence: which frames condition the model and where it
// predicts. Targets are always the full sequence; context frames are listed
// explicitly (order is irrelevant to the model, predictions are permutation
// invariant in it).
struct ContextTargetSplit {
    std::vector<std::size_t> context_indices;
    std::size_t seq_len = 0;
    LabelSource context_label_source = LabelSource::ground_truth;

    std::vector<std::size_t> target_indices() const {
        std::vector<std::size_t> all(seq_len);
        std::iota(all.begin(), all.end(), 0);
        return all;
    }

    void validate() const {
        if (seq_len == 0) throw ContractError("ContextTargetSplit: empty sequence");
        if (context_indices.empty()) {
            throw ContractError("ContextTargetSplit: context set must be nonempty");
        }
        for (std::size_t idx : context_indices) {
            if (idx >= seq_len) {
                throw ContractError("ContextTargetSplit: context index " + std::to_string(idx) +
                                    " out of range for length " + std::to_string(seq_len));
            }
        }
    }
};

}  // namespace seqnp
