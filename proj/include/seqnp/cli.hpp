#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "seqnp/checkpoint.hpp"
#include "seqnp/context.hpp"
#include "seqnp/data.hpp"
#include "seqnp/metrics.hpp"
#include "seqnp/model.hpp"
#include "seqnp/training.hpp"

namespace seqnp::cli {

// Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime/numeric error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitRuntime = 3;

namespace detail {

inline std::vector<std::string> split_csv(const std::string& csv) {
    std::vector<std::string> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline const std::vector<Sequence>& pick_split(const DatasetSplit& split,
                                               const std::string& name) {
    if (name == "train") return split.train;
    if (name == "val") return split.val;
    if (name == "test") return split.test;
    throw ContractError("--split must be train, val or test, got " + name);
}

inline void write_eval_report(std::ostream& os, const EvalReport& report) {
    const std::size_t dims = report.ccc_per_dim.size();
    os << "mode\tnum_context\tframes\tmean_ccc\tmean_icc\tmean_mse\tmean_nll";
    for (std::size_t j = 0; j < dims; ++j) os << "\tccc" << j;
    for (std::size_t j = 0; j < dims; ++j) os << "\ticc" << j;
    for (std::size_t j = 0; j < dims; ++j) os << "\tmse" << j;
    os << "\tccc_degenerate\n";
    os << context_mode_name(report.mode) << '\t' << report.num_context << '\t' << report.frames
       << '\t' << report.mean_ccc << '\t' << report.mean_icc << '\t' << report.mean_mse << '\t'
       << report.mean_nll;
    for (std::size_t j = 0; j < dims; ++j) os << '\t' << report.ccc_per_dim[j];
    for (std::size_t j = 0; j < dims; ++j) os << '\t' << report.icc_per_dim[j];
    for (std::size_t j = 0; j < dims; ++j) os << '\t' << report.mse_per_dim[j];
    os << '\t' << (report.any_ccc_degenerate ? 1 : 0) << '\n';
}

inline std::ofstream open_out(const std::filesystem::path& path, const char* what) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError(std::string(what) + ": cannot write " + path.string());
    return out;
}

// Flags shared by every command that builds a RunConfig.
struct TrainFlags {
    std::string data_dir;
    std::string task = "va";
    RunConfig cfg;

    void add_common(CLI::App* cmd) {
        cmd->add_option("--data", data_dir, "Dataset directory (see gen-data)")->required();
        cmd->add_option("--task", task, "Task preset: va or au (sets lr/wd/batch defaults)");
        cmd->add_option("--seed", cfg.seed, "Run seed (default 1, printed at start)");
        cmd->add_option("--epochs", cfg.epochs, "Training epochs");
        cmd->add_option("--iters", cfg.iters_per_epoch, "Iterations per epoch");
        cmd->add_option("--batch-size", cfg.batch_size, "Sequences per optimizer step");
        cmd->add_option("--lr", cfg.learning_rate, "Base learning rate");
        cmd->add_option("--weight-decay", cfg.weight_decay, "L2 weight decay");
        cmd->add_option("--loss-variant", loss_variant_str,
                        "nll, nll+kl, nll+reg or nll+reg+kl");
        cmd->add_option("--model-variant", model_variant_str,
                        "latent, deterministic, latent+det, latent+det+att or no_labels");
        cmd->add_option("--lambda-kl", cfg.lambda_kl, "KL loss weight");
        cmd->add_option("--lambda-reg", cfg.lambda_reg, "Output-regularizer weight");
        cmd->add_flag("--lreg-literal-sum", cfg.lreg_literal_sum,
                      "Pool the output regularizer by a literal sum over frames");
        cmd->add_option("--seq-len-min", cfg.seq_len_min, "Minimum training window");
        cmd->add_option("--seq-len-max", cfg.seq_len_max, "Maximum training window");
        cmd->add_option("--min-context", cfg.min_context, "Minimum context count");
        cmd->add_option("--mix-prob", cfg.mix_prob,
                        "Probability of pseudo-label context labels per sequence");
        cmd->add_option("--repr-dim", cfg.model.repr_dim, "Representation/latent width");
        cmd->add_option("--encoder-hidden1", cfg.model.encoder_hidden1, "Encoder hidden 1");
        cmd->add_option("--encoder-hidden2", cfg.model.encoder_hidden2, "Encoder hidden 2");
        cmd->add_option("--decoder-hidden1", cfg.model.decoder_hidden1, "Decoder hidden 1");
        cmd->add_option("--decoder-hidden2", cfg.model.decoder_hidden2, "Decoder hidden 2");
        cmd->add_option("--decoder-hidden3", cfg.model.decoder_hidden3, "Decoder hidden 3");
        cmd->add_option("--sigma-min", cfg.model.sigma_min, "Std floor");
        cmd->add_option("--attention-heads", cfg.model.attention_heads, "Attention heads");
        cmd->add_option("--attention-dim", cfg.model.attention_dim, "Per-head dimension");
        cmd->add_option("--eval-window", cfg.eval_window_len, "Evaluation window length");
        cmd->add_option("--eval-num-context", cfg.eval_num_context,
                        "Context count for validation evaluation");
        cmd->add_option("--eval-context-mode", eval_mode_str,
                        "Context mode at evaluation: lowest, highest or random");
    }

    std::string loss_variant_str;
    std::string model_variant_str;
    std::string eval_mode_str;

    // Resolves string flags and dataset-derived dimensions into cfg.
    void finalize(const std::vector<Sequence>& dataset) {
        if (!loss_variant_str.empty()) cfg.loss_variant = loss_variant_from_name(loss_variant_str);
        if (!model_variant_str.empty()) {
            cfg.model.variant = variant_from_name(model_variant_str);
        }
        if (!eval_mode_str.empty()) cfg.eval_context_mode = context_mode_from_name(eval_mode_str);
        cfg.model.label_dim = dataset.front().label_dim();
        cfg.model.feature_dim = dataset.front().feature_dim();
    }
};

// Applies the per-task lr/wd/batch defaults before flag parsing, so explicit
// flags still win. The task flag is pre-scanned from the raw arguments.
inline Task prescan_task(const std::vector<std::string>& args) {
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--task" && i + 1 < args.size()) return task_from_name(args[i + 1]);
        if (args[i].rfind("--task=", 0) == 0) return task_from_name(args[i].substr(7));
    }
    return Task::valence_arousal;
}

}  // namespace detail

inline int run(std::vector<std::string> args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
    CLI::App app{"Neural-process temporal regression: synthetic data, training, evaluation"};
    app.require_subcommand(1);

    // ---- gen-data ----
    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset directory");
    std::string gen_out;
    std::uint64_t gen_seed = 1;
    SyntheticSpec spec;
    gen->add_option("--out", gen_out, "Output dataset directory")->required();
    gen->add_option("--seed", gen_seed, "Generation seed (default 1, printed)");
    gen->add_option("--num-sequences", spec.num_sequences, "Number of sequences");
    gen->add_option("--len-min", spec.len_min, "Minimum sequence length");
    gen->add_option("--len-max", spec.len_max, "Maximum sequence length");
    gen->add_option("--label-dim", spec.label_dim, "Label dimensions");
    gen->add_option("--feature-dim", spec.feature_dim, "Feature dimensions");
    gen->add_option("--fourier-components", spec.fourier_components,
                    "Random-Fourier components per trajectory");
    gen->add_option("--max-frequency", spec.max_frequency, "Max trajectory frequency (cycles)");
    gen->add_option("--noise-std", spec.noise_std, "Pseudo-label noise std (informative frames)");
    gen->add_option("--bias-amplitude", spec.bias_amplitude, "Pseudo-label bias amplitude");
    gen->add_option("--informative-fraction", spec.informative_fraction,
                    "Fraction of frames with informative features");
    gen->add_option("--label-correlation", spec.label_correlation,
                    "Shared-trajectory weight between label dimensions");
    gen->add_option("--feature-map-seed", spec.feature_map_seed, "Feature embedding seed");

    // ---- train ----
    auto* train_cmd = app.add_subcommand("train", "Train a model and write checkpoint + log");
    detail::TrainFlags tf;
    std::string train_out;
    tf.add_common(train_cmd);
    train_cmd->add_option("--out", train_out, "Output directory for checkpoint and metrics log")
        ->required();

    // ---- eval ----
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
    std::string eval_ckpt, eval_data, eval_split = "test", eval_mode_str, eval_out;
    std::size_t eval_num_context = 0, eval_window = 0;
    std::uint64_t eval_seed = 0;
    bool eval_seed_set = false, eval_ctx_set = false, eval_window_set = false;
    eval_cmd->add_option("--checkpoint", eval_ckpt, "Checkpoint file")->required();
    eval_cmd->add_option("--data", eval_data, "Dataset directory")->required();
    eval_cmd->add_option("--split", eval_split, "train, val or test (default test)");
    eval_cmd->add_option("--context-mode", eval_mode_str, "lowest, highest or random");
    eval_cmd->add_option("--num-context", eval_num_context, "Context count")
        ->each([&](const std::string&) { eval_ctx_set = true; });
    eval_cmd->add_option("--window-len", eval_window, "Evaluation window length")
        ->each([&](const std::string&) { eval_window_set = true; });
    eval_cmd->add_option("--seed", eval_seed, "Seed for the random context mode")
        ->each([&](const std::string&) { eval_seed_set = true; });
    eval_cmd->add_option("--out", eval_out, "Optional report TSV path");

    // ---- ablate ----
    auto* ablate_cmd = app.add_subcommand(
        "ablate", "Train the loss-variant x model-variant grid and tabulate validation metrics");
    detail::TrainFlags af;
    std::string ablate_out;
    std::string ablate_losses = "nll,nll+kl,nll+reg,nll+reg+kl";
    std::string ablate_models = "latent,deterministic,latent+det,latent+det+att,no_labels";
    af.add_common(ablate_cmd);
    ablate_cmd->add_option("--out", ablate_out, "Output comparison table (TSV)")->required();
    ablate_cmd->add_option("--loss-variants", ablate_losses, "Comma-separated loss variants");
    ablate_cmd->add_option("--model-variants", ablate_models, "Comma-separated model variants");

    // ---- sweep ----
    auto* sweep_cmd =
        app.add_subcommand("sweep", "Metric grid over context counts and selection modes");
    std::string sweep_ckpt, sweep_data, sweep_split = "val", sweep_out;
    std::string sweep_counts = "5,10,20,40,70";
    std::string sweep_modes = "lowest,highest,random";
    std::size_t sweep_window = 0;
    bool sweep_window_set = false;
    std::uint64_t sweep_seed = 0;
    bool sweep_seed_set = false;
    sweep_cmd->add_option("--checkpoint", sweep_ckpt, "Checkpoint file")->required();
    sweep_cmd->add_option("--data", sweep_data, "Dataset directory")->required();
    sweep_cmd->add_option("--split", sweep_split, "train, val or test (default val)");
    sweep_cmd->add_option("--counts", sweep_counts, "Comma-separated context counts");
    sweep_cmd->add_option("--modes", sweep_modes, "Comma-separated context modes");
    sweep_cmd->add_option("--window-len", sweep_window, "Evaluation window length")
        ->each([&](const std::string&) { sweep_window_set = true; });
    sweep_cmd->add_option("--seed", sweep_seed, "Seed for the random mode")
        ->each([&](const std::string&) { sweep_seed_set = true; });
    sweep_cmd->add_option("--out", sweep_out, "Output table (TSV)")->required();

    // ---- traces ----
    auto* traces_cmd = app.add_subcommand(
        "traces", "Per-frame traces: truth, pseudo-labels, context mask, mean and sampled curves");
    std::string traces_ckpt, traces_data, traces_split = "test", traces_out;
    std::size_t traces_index = 0, traces_num_context = 10, traces_num_samples = 10;
    std::size_t traces_start = 0, traces_window = 0;
    bool traces_window_set = false;
    std::uint64_t traces_seed = 0;
    bool traces_seed_set = false;
    traces_cmd->add_option("--checkpoint", traces_ckpt, "Checkpoint file")->required();
    traces_cmd->add_option("--data", traces_data, "Dataset directory")->required();
    traces_cmd->add_option("--split", traces_split, "train, val or test (default test)");
    traces_cmd->add_option("--sequence", traces_index, "Sequence index within the split");
    traces_cmd->add_option("--start", traces_start, "First frame of the traced window");
    traces_cmd->add_option("--window-len", traces_window, "Traced window length")
        ->each([&](const std::string&) { traces_window_set = true; });
    traces_cmd->add_option("--num-context", traces_num_context, "Context count (default 10)");
    traces_cmd->add_option("--num-samples", traces_num_samples, "Sampled traces (default 10)");
    traces_cmd->add_option("--seed", traces_seed, "Sampling seed")
        ->each([&](const std::string&) { traces_seed_set = true; });
    traces_cmd->add_option("--out", traces_out, "Output table (TSV)")->required();

    // ---- inspect-checkpoint ----
    auto* inspect_cmd =
        app.add_subcommand("inspect-checkpoint", "Print parameter names/shapes and the config");
    std::string inspect_ckpt;
    inspect_cmd->add_option("--checkpoint", inspect_ckpt, "Checkpoint file")->required();

    // Per-task defaults resolved before parsing so explicit flags override.
    try {
        const Task pretask = detail::prescan_task(args);
        tf.cfg = default_config(pretask);
        af.cfg = default_config(pretask);
    } catch (const ContractError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (gen->parsed()) {
            out << "seed: " << gen_seed << "\n";
            spec.validate();
            const auto dataset = generate_synthetic(spec, gen_seed);
            save_dataset(gen_out, dataset);
            out << "wrote " << dataset.size() << " sequences to " << gen_out << "\n";
            return kExitOk;
        }

        if (train_cmd->parsed()) {
            auto dataset = load_dataset(tf.data_dir);
            tf.finalize(dataset);
            tf.cfg.validate();
            out << "seed: " << tf.cfg.seed << "\n";
            DatasetSplit split = split_dataset(std::move(dataset), tf.cfg.train_ratio,
                                               tf.cfg.val_ratio, tf.cfg.test_ratio, tf.cfg.seed);
            const std::filesystem::path out_dir = train_out;
            std::error_code ec;
            std::filesystem::create_directories(out_dir, ec);
            std::ofstream log = detail::open_out(out_dir / "metrics.tsv", "train");
            TrainResult result = train(tf.cfg, split.train, split.val, &log);
            for (const auto& w : result.warnings) err << "warning: " << w << "\n";
            save_checkpoint(out_dir / "checkpoint.ckpt", result.best_params, tf.cfg);
            out << "best epoch: " << result.best_epoch << " (metric " << result.best_metric
                << ")\n";
            out << "wrote " << (out_dir / "checkpoint.ckpt").string() << " and "
                << (out_dir / "metrics.tsv").string() << "\n";
            return kExitOk;
        }

        if (eval_cmd->parsed()) {
            Checkpoint ckpt = load_checkpoint(eval_ckpt);
            auto dataset = load_dataset(eval_data);
            DatasetSplit split =
                split_dataset(std::move(dataset), ckpt.config.train_ratio, ckpt.config.val_ratio,
                              ckpt.config.test_ratio, ckpt.config.seed);
            EvalConfig ec = ckpt.config.eval_config(eval_seed_set ? eval_seed : ckpt.config.seed);
            if (!eval_mode_str.empty()) ec.mode = context_mode_from_name(eval_mode_str);
            if (eval_ctx_set) ec.num_context = eval_num_context;
            if (eval_window_set) ec.window_len = eval_window;
            out << "seed: " << ec.seed << "\n";
            EvalReport report =
                evaluate(ckpt.params, ckpt.config.model, detail::pick_split(split, eval_split),
                         ec, [&err](const std::string& w) { err << "warning: " << w << "\n"; });
            detail::write_eval_report(out, report);
            if (!eval_out.empty()) {
                auto f = detail::open_out(eval_out, "eval");
                detail::write_eval_report(f, report);
            }
            return kExitOk;
        }

        if (ablate_cmd->parsed()) {
            auto dataset = load_dataset(af.data_dir);
            af.finalize(dataset);
            out << "seed: " << af.cfg.seed << "\n";
            DatasetSplit split = split_dataset(std::move(dataset), af.cfg.train_ratio,
                                               af.cfg.val_ratio, af.cfg.test_ratio, af.cfg.seed);
            auto table = detail::open_out(ablate_out, "ablate");
            table << "loss_variant\tmodel_variant\tval_ccc\tval_icc\tval_mse\tval_nll\t"
                     "best_epoch\n";
            for (const std::string& lv : detail::split_csv(ablate_losses)) {
                for (const std::string& mv : detail::split_csv(ablate_models)) {
                    RunConfig cfg = af.cfg;
                    cfg.loss_variant = loss_variant_from_name(lv);
                    cfg.model.variant = variant_from_name(mv);
                    cfg.validate();
                    TrainResult result = train(cfg, split.train, split.val, nullptr);
                    EvalReport report =
                        evaluate(result.best_params, cfg.model, split.val,
                                 cfg.eval_config(mix_seed(cfg.seed, 0xab1a, 0)));
                    table << lv << '\t' << mv << '\t' << report.mean_ccc << '\t'
                          << report.mean_icc << '\t' << report.mean_mse << '\t'
                          << report.mean_nll << '\t' << result.best_epoch << '\n';
                    out << "done: " << lv << " x " << mv << " (val_ccc " << report.mean_ccc
                        << ")\n";
                }
            }
            out << "wrote " << ablate_out << "\n";
            return kExitOk;
        }

        if (sweep_cmd->parsed()) {
            Checkpoint ckpt = load_checkpoint(sweep_ckpt);
            auto dataset = load_dataset(sweep_data);
            DatasetSplit split =
                split_dataset(std::move(dataset), ckpt.config.train_ratio, ckpt.config.val_ratio,
                              ckpt.config.test_ratio, ckpt.config.seed);
            const std::uint64_t seed = sweep_seed_set ? sweep_seed : ckpt.config.seed;
            out << "seed: " << seed << "\n";
            std::vector<std::size_t> counts;
            for (const auto& c : detail::split_csv(sweep_counts)) {
                counts.push_back(static_cast<std::size_t>(std::stoull(c)));
            }
            std::vector<ContextMode> modes;
            for (const auto& m : detail::split_csv(sweep_modes)) {
                modes.push_back(context_mode_from_name(m));
            }
            const std::size_t window =
                sweep_window_set ? sweep_window : ckpt.config.eval_window_len;
            auto rows = context_sweep(ckpt.params, ckpt.config.model,
                                      detail::pick_split(split, sweep_split), counts, modes,
                                      window, seed);
            auto f = detail::open_out(sweep_out, "sweep");
            write_sweep_table(f, rows);
            out << "wrote " << rows.size() << " rows to " << sweep_out << "\n";
            return kExitOk;
        }

        if (traces_cmd->parsed()) {
            Checkpoint ckpt = load_checkpoint(traces_ckpt);
            auto dataset = load_dataset(traces_data);
            DatasetSplit split =
                split_dataset(std::move(dataset), ckpt.config.train_ratio, ckpt.config.val_ratio,
                              ckpt.config.test_ratio, ckpt.config.seed);
            const auto& seqs = detail::pick_split(split, traces_split);
            if (traces_index >= seqs.size()) {
                throw ContractError("--sequence index " + std::to_string(traces_index) +
                                    " out of range (split has " + std::to_string(seqs.size()) +
                                    " sequences)");
            }
            const Sequence& seq = seqs[traces_index];
            const std::size_t window =
                traces_window_set ? traces_window : ckpt.config.eval_window_len;
            if (traces_start >= seq.length()) {
                throw ContractError("--start beyond sequence length " +
                                    std::to_string(seq.length()));
            }
            const std::size_t len = std::min(window, seq.length() - traces_start);
            const Sequence win = seqnp::detail::crop_window(seq, traces_start, len);
            const std::uint64_t seed = traces_seed_set ? traces_seed : ckpt.config.seed;
            out << "seed: " << seed << "\n";
            TraceResult trace = sample_traces(ckpt.params, ckpt.config.model, win,
                                              traces_num_context, traces_num_samples, seed);
            auto f = detail::open_out(traces_out, "traces");
            write_trace_table(f, trace);
            out << "wrote traces for " << win.id << " (" << len << " frames) to " << traces_out
                << "\n";
            return kExitOk;
        }

        if (inspect_cmd->parsed()) {
            Checkpoint ckpt = load_checkpoint(inspect_ckpt);
            out << "config: " << nlohmann::json(ckpt.config).dump(2) << "\n";
            out << "parameters:\n";
            std::size_t total = 0;
            for (const auto& [name, tensor] : ckpt.params) {
                out << "  " << name << " " << Tensor::shape_string(tensor.shape()) << "\n";
                total += tensor.numel();
            }
            out << "total parameters: " << total << "\n";
            return kExitOk;
        }
    } catch (const ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const ContractError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}

inline int run(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(std::move(args));
}

}  // namespace seqnp::cli
