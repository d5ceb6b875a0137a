#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "seqnp/context.hpp"
#include "seqnp/data.hpp"
#include "seqnp/defaults.hpp"
#include "seqnp/distributions.hpp"
#include "seqnp/model.hpp"
#include "seqnp/rng.hpp"

namespace seqnp {

using WarnFn = std::function<void(const std::string&)>;

// Concordance correlation coefficient with population (1/N) statistics, so
// the 2*sigma_y*sigma_yhat*rho numerator is exactly 2*cov. Both-constant
// input has a vanishing denominator; it reports 0 and raises the degenerate
// flag instead of returning NaN.
inline double ccc(const std::vector<double>& y, const std::vector<double>& y_hat,
                  bool* degenerate = nullptr) {
    if (y.size() != y_hat.size()) {
        throw ContractError("ccc: lengths differ: " + std::to_string(y.size()) + " vs " +
                            std::to_string(y_hat.size()));
    }
    if (y.size() < 2) throw ContractError("ccc: need at least 2 samples");
    if (degenerate) *degenerate = false;
    const double n = static_cast<double>(y.size());
    double mean_y = 0.0, mean_h = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        mean_y += y[i];
        mean_h += y_hat[i];
    }
    mean_y /= n;
    mean_h /= n;
    double var_y = 0.0, var_h = 0.0, cov = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double dy = y[i] - mean_y;
        const double dh = y_hat[i] - mean_h;
        var_y += dy * dy;
        var_h += dh * dh;
        cov += dy * dh;
    }
    var_y /= n;
    var_h /= n;
    cov /= n;
    const double dm = mean_y - mean_h;
    const double denom = var_y + var_h + dm * dm;
    if (denom == 0.0) {
        if (degenerate) *degenerate = true;
        return 0.0;
    }
    return 2.0 * cov / denom;
}

// Intra-class correlation, implemented exactly as commonly printed for this
// task: W averages the squared deviations from the pooled mean over N while
// S stays an unscaled sum, so the score is length-dependent for a fixed
// per-frame error. Perfect agreement on constants (W + S = 0) returns 1.
inline double icc(const std::vector<double>& y, const std::vector<double>& y_hat) {
    if (y.size() != y_hat.size()) {
        throw ContractError("icc: lengths differ: " + std::to_string(y.size()) + " vs " +
                            std::to_string(y_hat.size()));
    }
    if (y.empty()) throw ContractError("icc: need at least 1 sample");
    const double n = static_cast<double>(y.size());
    double pooled = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) pooled += y[i] + y_hat[i];
    pooled /= 2.0 * n;
    double w = 0.0, s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double dy = y[i] - pooled;
        const double dh = y_hat[i] - pooled;
        w += dy * dy + dh * dh;
        const double d = y[i] - y_hat[i];
        s += d * d;
    }
    w /= n;
    if (w + s == 0.0) return 1.0;
    return (w - s) / (w + s);
}

inline double mse(const std::vector<double>& y, const std::vector<double>& y_hat) {
    if (y.size() != y_hat.size()) {
        throw ContractError("mse: lengths differ: " + std::to_string(y.size()) + " vs " +
                            std::to_string(y_hat.size()));
    }
    if (y.empty()) throw ContractError("mse: need at least 1 sample");
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = y[i] - y_hat[i];
        acc += d * d;
    }
    return acc / static_cast<double>(y.size());
}

enum class ContextMode { lowest, highest, random };

inline std::string context_mode_name(ContextMode m) {
    switch (m) {
        case ContextMode::lowest: return "lowest";
        case ContextMode::highest: return "highest";
        case ContextMode::random: return "random";
    }
    return "lowest";
}

inline ContextMode context_mode_from_name(const std::string& name) {
    if (name == "lowest") return ContextMode::lowest;
    if (name == "highest") return ContextMode::highest;
    if (name == "random") return ContextMode::random;
    throw ContractError("unknown context mode: " + name);
}

struct EvalConfig {
    std::size_t window_len = defaults::kEvalWindowLen;
    std::size_t num_context = defaults::kEvalNumContext;
    ContextMode mode = ContextMode::lowest;
    std::uint64_t seed = 1;  // drives the random context mode only
};

struct EvalReport {
    std::vector<double> ccc_per_dim;
    std::vector<double> icc_per_dim;
    std::vector<double> mse_per_dim;
    double mean_ccc = 0.0;
    double mean_icc = 0.0;
    double mean_mse = 0.0;
    double mean_nll = 0.0;  // mean over frames of the summed per-frame Gaussian NLL
    ContextMode mode = ContextMode::lowest;
    std::size_t num_context = 0;
    std::size_t frames = 0;
    bool any_ccc_degenerate = false;
};

// Metric aggregation over already-concatenated predictions. Split out of
// evaluate() so the metric path can be exercised against known predictions.
inline EvalReport compute_report(const Tensor& pred_mean, const Tensor& pred_std,
                                 const Tensor& truth, ContextMode mode,
                                 std::size_t num_context) {
    if (!pred_mean.same_shape(truth) || !pred_std.same_shape(truth)) {
        throw ShapeError("compute_report: prediction shape " +
                         Tensor::shape_string(pred_mean.shape()) + " vs truth " +
                         Tensor::shape_string(truth.shape()));
    }
    const std::size_t frames = truth.rows();
    const std::size_t dims = truth.cols();
    EvalReport report;
    report.mode = mode;
    report.num_context = num_context;
    report.frames = frames;

    std::vector<double> yv(frames), hv(frames);
    for (std::size_t j = 0; j < dims; ++j) {
        for (std::size_t i = 0; i < frames; ++i) {
            yv[i] = truth(i, j);
            hv[i] = pred_mean(i, j);
        }
        bool degenerate = false;
        report.ccc_per_dim.push_back(ccc(yv, hv, &degenerate));
        report.any_ccc_degenerate = report.any_ccc_degenerate || degenerate;
        report.icc_per_dim.push_back(icc(yv, hv));
        report.mse_per_dim.push_back(mse(yv, hv));
    }
    for (std::size_t j = 0; j < dims; ++j) {
        report.mean_ccc += report.ccc_per_dim[j];
        report.mean_icc += report.icc_per_dim[j];
        report.mean_mse += report.mse_per_dim[j];
    }
    report.mean_ccc /= static_cast<double>(dims);
    report.mean_icc /= static_cast<double>(dims);
    report.mean_mse /= static_cast<double>(dims);

    double nll = 0.0;
    for (std::size_t i = 0; i < frames; ++i) {
        for (std::size_t j = 0; j < dims; ++j) {
            const double d = (truth(i, j) - pred_mean(i, j)) / pred_std(i, j);
            nll += kHalfLogTwoPi + std::log(pred_std(i, j)) + 0.5 * d * d;
        }
    }
    report.mean_nll = nll / static_cast<double>(frames);
    return report;
}

namespace detail {

inline Sequence crop_window(const Sequence& seq, std::size_t start, std::size_t len) {
    Sequence win;
    win.id = seq.id;
    win.features = Tensor({len, seq.feature_dim()});
    win.labels = Tensor({len, seq.label_dim()});
    win.pseudo_labels = Tensor({len, seq.label_dim()});
    for (std::size_t t = 0; t < len; ++t) {
        for (std::size_t f = 0; f < seq.feature_dim(); ++f) {
            win.features(t, f) = seq.features(start + t, f);
        }
        for (std::size_t j = 0; j < seq.label_dim(); ++j) {
            win.labels(t, j) = seq.labels(start + t, j);
            win.pseudo_labels(t, j) = seq.pseudo_labels(start + t, j);
        }
    }
    return win;
}

}  // namespace detail

// Evaluation protocol: tile each sequence into consecutive windows of
// window_len (a final short window is kept when it still offers at least
// kMinContext frames), select context per window from pseudo-labels, decode
// every frame at z = mu_C, and compute metrics over the concatenated
// predictions of the whole split. A variant without a latent std has no
// uncertainty to rank by; its context falls back to random selection.
inline EvalReport evaluate(const NamedTensors& params, const ModelConfig& cfg,
                           const std::vector<Sequence>& split, const EvalConfig& eval_cfg_in,
                           const WarnFn& warn = {}) {
    EvalConfig eval_cfg = eval_cfg_in;
    if (!has_latent_path(cfg.variant) && eval_cfg.mode != ContextMode::random) {
        if (warn) {
            warn("evaluate: variant " + variant_name(cfg.variant) +
                 " has no latent uncertainty; using random context selection");
        }
        eval_cfg.mode = ContextMode::random;
    }
    if (split.empty()) throw ContractError("evaluate: empty split");
    if (eval_cfg.window_len == 0) throw ContractError("evaluate: window_len must be > 0");

    std::mt19937_64 random_mode_rng = make_engine(eval_cfg.seed, 0xe7a1);
    std::vector<double> mean_buf, std_buf, truth_buf;
    std::size_t total_frames = 0;
    const std::size_t dims = cfg.label_dim;
    bool clamped_warned = false;

    for (const Sequence& seq : split) {
        for (std::size_t start = 0; start < seq.length(); start += eval_cfg.window_len) {
            const std::size_t len = std::min(eval_cfg.window_len, seq.length() - start);
            if (len < defaults::kMinContext && len < seq.length()) continue;
            const Sequence window = detail::crop_window(seq, start, len);

            std::size_t num_ctx = eval_cfg.num_context;
            if (num_ctx > len) {
                num_ctx = len;
                if (warn && !clamped_warned) {
                    warn("evaluate: num_context clamped to window length " +
                         std::to_string(len));
                    clamped_warned = true;
                }
            }
            if (num_ctx == 0) num_ctx = 1;

            ContextTargetSplit ct;
            switch (eval_cfg.mode) {
                case ContextMode::lowest:
                    ct = select_by_uncertainty(params, cfg, window, num_ctx,
                                               SelectionDirection::lowest);
                    break;
                case ContextMode::highest:
                    ct = select_by_uncertainty(params, cfg, window, num_ctx,
                                               SelectionDirection::highest);
                    break;
                case ContextMode::random:
                    ct = select_random(len, num_ctx, random_mode_rng);
                    break;
            }
            ct.context_label_source = LabelSource::pseudo_label;

            const Predictive pred = predict(params, cfg, window, ct);
            for (std::size_t t = 0; t < len; ++t) {
                for (std::size_t j = 0; j < dims; ++j) {
                    mean_buf.push_back(pred.mean(t, j));
                    std_buf.push_back(pred.std(t, j));
                    truth_buf.push_back(window.labels(t, j));
                }
            }
            total_frames += len;
        }
    }

    if (total_frames < 2) throw ContractError("evaluate: fewer than 2 evaluated frames");
    Tensor pm({total_frames, dims}, std::move(mean_buf));
    Tensor ps({total_frames, dims}, std::move(std_buf));
    Tensor ty({total_frames, dims}, std::move(truth_buf));
    return compute_report(pm, ps, ty, eval_cfg.mode, eval_cfg.num_context);
}

// ---------------------------------------------------------------------------
// Context sweep: the metric grid over (count, mode).
// ---------------------------------------------------------------------------

struct SweepRow {
    std::size_t num_context = 0;
    ContextMode mode = ContextMode::lowest;
    EvalReport report;
};

inline std::vector<SweepRow> context_sweep(const NamedTensors& params, const ModelConfig& cfg,
                                           const std::vector<Sequence>& split,
                                           const std::vector<std::size_t>& counts,
                                           const std::vector<ContextMode>& modes,
                                           std::size_t window_len, std::uint64_t seed) {
    std::vector<SweepRow> rows;
    for (std::size_t count : counts) {
        if (count < 1 || count > window_len) {
            throw ContractError("context_sweep: count " + std::to_string(count) +
                                " outside [1, " + std::to_string(window_len) + "]");
        }
        for (ContextMode mode : modes) {
            EvalConfig ec;
            ec.window_len = window_len;
            ec.num_context = count;
            ec.mode = mode;
            ec.seed = seed;
            rows.push_back(SweepRow{count, mode, evaluate(params, cfg, split, ec)});
        }
    }
    return rows;
}

inline void write_sweep_table(std::ostream& os, const std::vector<SweepRow>& rows) {
    os << "num_context\tmode\tmean_ccc\tmean_icc\tmean_mse\tmean_nll\tframes\n";
    for (const auto& row : rows) {
        os << row.num_context << '\t' << context_mode_name(row.mode) << '\t'
           << row.report.mean_ccc << '\t' << row.report.mean_icc << '\t' << row.report.mean_mse
           << '\t' << row.report.mean_nll << '\t' << row.report.frames << '\n';
    }
}

// ---------------------------------------------------------------------------
// Coherent-sample traces for one sequence.
// ---------------------------------------------------------------------------

struct TraceResult {
    std::vector<std::uint8_t> context_mask;  // 1 where the frame was selected as context
    Tensor truth;                            // T x label_dim
    Tensor pseudo;                           // T x label_dim
    Tensor mean;                             // predictive-mean trace, T x label_dim
    std::vector<Tensor> samples;             // one coherent trace per sampled z
};

// Context by lowest ||sigma_c||; one decode at z = mu_C plus num_samples
// decodes under fresh z draws, each trace internally coherent (one z for all
// of its frames).
inline TraceResult sample_traces(const NamedTensors& params, const ModelConfig& cfg,
                                 const Sequence& seq, std::size_t num_context,
                                 std::size_t num_samples, std::uint64_t seed) {
    const ContextTargetSplit split = select_by_uncertainty(
        params, cfg, seq, std::min(num_context, seq.length()), SelectionDirection::lowest);

    std::mt19937_64 rng = make_engine(seed, 0x7ace);
    std::vector<Tensor> noises;
    for (std::size_t k = 0; k < num_samples; ++k) {
        noises.push_back(normal_tensor(rng, {1, cfg.repr_dim}));
    }
    auto [mean_trace, sample_preds] = predict_with_samples(params, cfg, seq, split, noises);

    TraceResult result;
    result.context_mask.assign(seq.length(), 0);
    for (std::size_t idx : split.context_indices) result.context_mask[idx] = 1;
    result.truth = seq.labels;
    result.pseudo = seq.pseudo_labels;
    result.mean = std::move(mean_trace.mean);
    for (auto& p : sample_preds) result.samples.push_back(std::move(p.mean));
    return result;
}

inline void write_trace_table(std::ostream& os, const TraceResult& trace) {
    const std::size_t frames = trace.truth.rows();
    const std::size_t dims = trace.truth.cols();
    os << "frame\tis_context";
    for (std::size_t j = 0; j < dims; ++j) os << "\ty" << j;
    for (std::size_t j = 0; j < dims; ++j) os << "\tpseudo" << j;
    for (std::size_t j = 0; j < dims; ++j) os << "\tmean" << j;
    for (std::size_t k = 0; k < trace.samples.size(); ++k) {
        for (std::size_t j = 0; j < dims; ++j) os << "\tsample" << k << "_d" << j;
    }
    os << '\n';
    for (std::size_t t = 0; t < frames; ++t) {
        os << t << '\t' << static_cast<int>(trace.context_mask[t]);
        for (std::size_t j = 0; j < dims; ++j) os << '\t' << trace.truth(t, j);
        for (std::size_t j = 0; j < dims; ++j) os << '\t' << trace.pseudo(t, j);
        for (std::size_t j = 0; j < dims; ++j) os << '\t' << trace.mean(t, j);
        for (const Tensor& s : trace.samples) {
            for (std::size_t j = 0; j < dims; ++j) os << '\t' << s(t, j);
        }
        os << '\n';
    }
}

}  // namespace seqnp
