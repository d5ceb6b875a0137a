#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "seqnp/context.hpp"
#include "seqnp/data.hpp"
#include "seqnp/defaults.hpp"
#include "seqnp/losses.hpp"
#include "seqnp/metrics.hpp"
#include "seqnp/model.hpp"
#include "seqnp/optimizer.hpp"

namespace seqnp {

enum class Task { valence_arousal, action_units };

inline std::string task_name(Task t) {
    return t == Task::valence_arousal ? "va" : "au";
}

inline Task task_from_name(const std::string& name) {
    if (name == "va" || name == "valence_arousal") return Task::valence_arousal;
    if (name == "au" || name == "action_units") return Task::action_units;
    throw ContractError("unknown task: " + name);
}

// Everything one run needs: architecture, loss, optimizer, sampling protocol
// and evaluation settings. Serialized into checkpoints so a run is fully
// reconstructable.
struct RunConfig {
    Task task = Task::valence_arousal;
    ModelConfig model;
    LossVariant loss_variant = LossVariant::nll_reg_kl;
    double lambda_kl = defaults::kLambdaKl;
    double lambda_reg = defaults::kLambdaReg;
    bool lreg_literal_sum = false;

    std::size_t seq_len_min = defaults::kSeqLenMin;
    std::size_t seq_len_max = defaults::kSeqLenMax;
    std::size_t min_context = defaults::kMinContext;
    double mix_prob = defaults::kMixProb;

    std::size_t batch_size = defaults::kVaBatchSize;
    std::size_t epochs = defaults::kEpochs;
    std::size_t iters_per_epoch = defaults::kItersPerEpoch;
    double learning_rate = defaults::kVaLearningRate;
    double weight_decay = defaults::kVaWeightDecay;

    std::uint64_t seed = 1;

    std::size_t eval_window_len = defaults::kEvalWindowLen;
    std::size_t eval_num_context = defaults::kEvalNumContext;
    ContextMode eval_context_mode = ContextMode::lowest;

    double train_ratio = defaults::kTrainRatio;
    double val_ratio = defaults::kValRatio;
    double test_ratio = defaults::kTestRatio;

    LossWeights loss_weights() const { return LossWeights{lambda_kl, lambda_reg, loss_variant}; }

    EvalConfig eval_config(std::uint64_t eval_seed) const {
        return EvalConfig{eval_window_len, eval_num_context, eval_context_mode, eval_seed};
    }

    void validate() const {
        if (seq_len_min < 1 || seq_len_max < seq_len_min) {
            throw ContractError("RunConfig: invalid sequence length range");
        }
        if (batch_size == 0 || epochs == 0 || iters_per_epoch == 0) {
            throw ContractError("RunConfig: batch/epochs/iterations must be positive");
        }
        if (learning_rate <= 0.0 || weight_decay < 0.0) {
            throw ContractError("RunConfig: invalid optimizer settings");
        }
        if (mix_prob < 0.0 || mix_prob > 1.0) {
            throw ContractError("RunConfig: mix_prob must be in [0, 1]");
        }
        if (min_context == 0) throw ContractError("RunConfig: min_context must be >= 1");
        loss_weights().validate();
    }
};

// Per-task protocol presets. Model dimensions are left at their defaults; the
// CLI overrides label/feature dims from the dataset manifest.
inline RunConfig default_config(Task task) {
    RunConfig cfg;
    cfg.task = task;
    if (task == Task::valence_arousal) {
        cfg.batch_size = defaults::kVaBatchSize;
        cfg.learning_rate = defaults::kVaLearningRate;
        cfg.weight_decay = defaults::kVaWeightDecay;
    } else {
        cfg.batch_size = defaults::kAuBatchSize;
        cfg.learning_rate = defaults::kAuLearningRate;
        cfg.weight_decay = defaults::kAuWeightDecay;
    }
    return cfg;
}

struct StepStats {
    LossComponents loss;       // averaged over the sequences actually used
    std::size_t used = 0;      // sequences contributing to the gradient
    std::size_t skipped = 0;   // sequences shorter than the minimum window
};

namespace detail {

inline std::mt19937_64 sequence_engine(std::uint64_t seed, std::uint64_t step,
                                       std::uint64_t slot) {
    return std::mt19937_64(mix_seed(mix_seed(seed, 0x5e90, step), slot));
}

}  // namespace detail

// One optimization step over a batch of sequences. Per sequence: crop a
// random window in [seq_len_min, seq_len_max], draw the context count in
// [min_context, window], place the context uniformly, flip one coin for the
// context label source, run the forward pass (sampling z when the variant
// has a latent), and accumulate leaf gradients in slot order. Ends with one
// Adam step at the given learning rate.
inline StepStats train_step(NamedTensors& params, OptimizerState& opt,
                            const std::vector<const Sequence*>& batch, const RunConfig& cfg,
                            std::size_t global_step, double lr_t, const WarnFn& warn = {}) {
    if (batch.empty()) throw ContractError("train_step: empty batch");
    StepStats stats;
    NamedTensors grad_sum;
    const LossWeights weights = cfg.loss_weights();

    for (std::size_t slot = 0; slot < batch.size(); ++slot) {
        const Sequence& seq = *batch[slot];
        if (seq.length() < cfg.seq_len_min) {
            ++stats.skipped;
            if (warn) {
                warn("train_step: skipping sequence " + seq.id + " (length " +
                     std::to_string(seq.length()) + " < " + std::to_string(cfg.seq_len_min) +
                     ")");
            }
            continue;
        }
        std::mt19937_64 rng = detail::sequence_engine(cfg.seed, global_step, slot);

        const std::size_t max_len = std::min(cfg.seq_len_max, seq.length());
        std::uniform_int_distribution<std::size_t> len_dist(cfg.seq_len_min, max_len);
        const std::size_t window_len = len_dist(rng);
        std::uniform_int_distribution<std::size_t> start_dist(0, seq.length() - window_len);
        const std::size_t start = start_dist(rng);
        const Sequence window = detail::crop_window(seq, start, window_len);

        const std::size_t ctx_lo = std::min(cfg.min_context, window_len);
        std::uniform_int_distribution<std::size_t> ctx_dist(ctx_lo, window_len);
        const std::size_t num_context = ctx_dist(rng);

        ContextTargetSplit split = select_random(window_len, num_context, rng);
        std::uniform_real_distribution<double> coin(0.0, 1.0);
        split.context_label_source = coin(rng) < cfg.mix_prob ? LabelSource::pseudo_label
                                                              : LabelSource::ground_truth;

        std::optional<Tensor> noise;
        if (has_latent_path(cfg.model.variant)) {
            noise = normal_tensor(rng, {1, cfg.model.repr_dim});
        }

        Tape tape;
        LeafMap leaves = register_leaves(tape, params);
        ForwardResult result =
            forward(tape, leaves, cfg.model, window, split, noise ? &*noise : nullptr);
        Var y_true = tape.constant(window.labels);
        CompositeLoss loss = composite_loss(result, y_true, weights, cfg.lreg_literal_sum);
        tape.backward(loss.total);

        for (auto& [name, grad] : tape.leaf_gradients()) {
            auto it = grad_sum.find(name);
            if (it == grad_sum.end()) {
                grad_sum.emplace(name, std::move(grad));
            } else {
                for (std::size_t i = 0; i < grad.numel(); ++i) it->second[i] += grad[i];
            }
        }
        stats.loss.nll += loss.values.nll;
        stats.loss.kl += loss.values.kl;
        stats.loss.reg += loss.values.reg;
        stats.loss.total += loss.values.total;
        ++stats.used;
    }

    if (stats.used > 0) {
        const double inv = 1.0 / static_cast<double>(stats.used);
        for (auto& [name, grad] : grad_sum) {
            for (std::size_t i = 0; i < grad.numel(); ++i) grad[i] *= inv;
        }
        stats.loss.nll *= inv;
        stats.loss.kl *= inv;
        stats.loss.reg *= inv;
        stats.loss.total *= inv;
        adam_step(params, opt, grad_sum, lr_t);
    }
    return stats;
}

struct EpochLog {
    std::size_t epoch = 0;   // 1-based
    double lr = 0.0;         // learning rate at the first step of the epoch
    LossComponents train_loss;
    EvalReport validation;
};

struct TrainResult {
    NamedTensors best_params;
    std::size_t best_epoch = 0;
    double best_metric = -std::numeric_limits<double>::infinity();
    NamedTensors final_params;
    std::vector<EpochLog> epochs;
    std::vector<std::string> warnings;
};

inline const char* kMetricsLogHeader =
    "epoch\tlr\tloss_total\tloss_nll\tloss_kl\tloss_reg\tval_ccc\tval_icc\tval_mse\tval_nll";

inline void write_log_line(std::ostream& os, const EpochLog& entry) {
    os << entry.epoch << '\t' << entry.lr << '\t' << entry.train_loss.total << '\t'
       << entry.train_loss.nll << '\t' << entry.train_loss.kl << '\t' << entry.train_loss.reg
       << '\t' << entry.validation.mean_ccc << '\t' << entry.validation.mean_icc << '\t'
       << entry.validation.mean_mse << '\t' << entry.validation.mean_nll << '\n';
}

// Full training loop: epochs x iterations train_steps with cosine-annealed
// learning rate, one validation evaluation per epoch, best checkpoint chosen
// by mean CCC (valence/arousal) or mean ICC (action units).
inline TrainResult train(const RunConfig& cfg, const std::vector<Sequence>& train_set,
                         const std::vector<Sequence>& val_set, std::ostream* log = nullptr) {
    cfg.validate();
    if (train_set.empty()) throw ContractError("train: empty training set");
    if (val_set.empty()) throw ContractError("train: empty validation set");

    TrainResult result;
    NamedTensors params = init_params(cfg.model, cfg.seed);
    OptimizerState opt = make_optimizer_state(params, cfg.learning_rate, cfg.weight_decay);
    const std::size_t total_steps = cfg.epochs * cfg.iters_per_epoch;

    std::mt19937_64 batch_rng = make_engine(cfg.seed, 0xba7c);
    std::uniform_int_distribution<std::size_t> pick(0, train_set.size() - 1);
    WarnFn warn = [&result](const std::string& msg) { result.warnings.push_back(msg); };

    if (log) *log << kMetricsLogHeader << '\n';

    std::size_t global_step = 0;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        EpochLog entry;
        entry.epoch = epoch;
        entry.lr = cosine_lr(cfg.learning_rate, global_step, total_steps);

        LossComponents epoch_loss;
        std::size_t steps_with_data = 0;
        for (std::size_t iter = 0; iter < cfg.iters_per_epoch; ++iter) {
            std::vector<const Sequence*> batch;
            batch.reserve(cfg.batch_size);
            for (std::size_t b = 0; b < cfg.batch_size; ++b) {
                batch.push_back(&train_set[pick(batch_rng)]);
            }
            const double lr_t = cosine_lr(cfg.learning_rate, global_step, total_steps);
            StepStats stats = train_step(params, opt, batch, cfg, global_step, lr_t, warn);
            ++global_step;
            if (stats.used > 0) {
                epoch_loss.nll += stats.loss.nll;
                epoch_loss.kl += stats.loss.kl;
                epoch_loss.reg += stats.loss.reg;
                epoch_loss.total += stats.loss.total;
                ++steps_with_data;
            }
        }
        if (steps_with_data > 0) {
            const double inv = 1.0 / static_cast<double>(steps_with_data);
            epoch_loss.nll *= inv;
            epoch_loss.kl *= inv;
            epoch_loss.reg *= inv;
            epoch_loss.total *= inv;
        }
        entry.train_loss = epoch_loss;

        entry.validation =
            evaluate(params, cfg.model, val_set, cfg.eval_config(mix_seed(cfg.seed, 0xe7a, epoch)),
                     warn);
        const double metric = cfg.task == Task::valence_arousal ? entry.validation.mean_ccc
                                                                : entry.validation.mean_icc;
        if (metric > result.best_metric) {
            result.best_metric = metric;
            result.best_epoch = epoch;
            result.best_params = params;
        }
        if (log) write_log_line(*log, entry);
        result.epochs.push_back(std::move(entry));
    }

    result.final_params = std::move(params);
    if (result.best_params.empty()) result.best_params = result.final_params;
    return result;
}

}  // namespace seqnp
