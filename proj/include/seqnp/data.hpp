#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "seqnp/errors.hpp"
#include "seqnp/rng.hpp"
#include "seqnp/tensor.hpp"

namespace seqnp {

// One video segment worth of per-frame data. pseudo_labels come from a
// frozen upstream predictor and are never modified after loading.
struct Sequence {
    std::string id;
    Tensor features;       // L x feature_dim
    Tensor labels;         // L x label_dim, in [-1, 1]
    Tensor pseudo_labels;  // L x label_dim, in [-1, 1]

    std::size_t length() const { return features.rows(); }
    std::size_t feature_dim() const { return features.cols(); }
    std::size_t label_dim() const { return labels.cols(); }

    void validate() const {
        if (features.ndim() != 2 || labels.ndim() != 2 || pseudo_labels.ndim() != 2) {
            throw ContractError("Sequence " + id + ": all arrays must be 2-d");
        }
        if (features.rows() < 1) throw ContractError("Sequence " + id + ": empty sequence");
        if (labels.rows() != features.rows() || pseudo_labels.rows() != features.rows()) {
            throw ContractError("Sequence " + id + ": array lengths disagree");
        }
        if (!labels.same_shape(pseudo_labels)) {
            throw ContractError("Sequence " + id + ": label shapes disagree");
        }
        for (std::size_t i = 0; i < labels.numel(); ++i) {
            if (std::abs(labels[i]) > 1.0 || std::abs(pseudo_labels[i]) > 1.0) {
                throw ContractError("Sequence " + id + ": label outside [-1, 1]");
            }
        }
        if (!features.all_finite()) {
            throw ContractError("Sequence " + id + ": non-finite feature value");
        }
    }
};

// Desk-scale stand-in for a frozen feature/prediction backbone. Labels are
// smooth random-Fourier trajectories; features embed (label, frame phase)
// through a fixed random nonlinear map, except on a controllable fraction of
// "uninformative" frames whose features are pure noise and whose
// pseudo-labels are noisier. That coupling is what uncertainty-driven
// context selection has to discover.
struct SyntheticSpec {
    std::size_t num_sequences = 100;
    std::size_t len_min = 70;
    std::size_t len_max = 140;
    std::size_t label_dim = 2;
    std::size_t feature_dim = 512;
    std::size_t fourier_components = 4;  // trajectory smoothness: component count
    double max_frequency = 3.0;          // cycles per sequence
    double noise_std = 0.1;              // pseudo-label noise on informative frames
    double bias_amplitude = 0.0;         // slow sinusoidal pseudo-label bias
    double informative_fraction = 1.0;   // frames whose features carry signal
    double label_correlation = 0.0;      // shared-trajectory weight between label dims
    std::uint64_t feature_map_seed = 17;

    void validate() const {
        if (num_sequences == 0) throw ContractError("SyntheticSpec: num_sequences must be > 0");
        if (len_min < 1 || len_max < len_min) {
            throw ContractError("SyntheticSpec: invalid length range");
        }
        if (label_dim == 0 || feature_dim == 0) {
            throw ContractError("SyntheticSpec: dimensions must be > 0");
        }
        if (noise_std < 0.0) throw ContractError("SyntheticSpec: noise_std must be >= 0");
        if (informative_fraction < 0.0 || informative_fraction > 1.0) {
            throw ContractError("SyntheticSpec: informative_fraction must be in [0, 1]");
        }
        if (label_correlation < 0.0 || label_correlation > 1.0) {
            throw ContractError("SyntheticSpec: label_correlation must be in [0, 1]");
        }
    }
};

// Isotropic noise added to informative features.
inline constexpr double kFeatureNoiseStd = 0.3;

// Informative frames arrive in persistent runs (occlusions and poses do
// not flicker frame to frame). Switching intensity of the two-state chain;
// the stationary informative rate stays at the configured fraction and the mean
// informative run is 1 / (rate * (1 - fraction)).
inline constexpr double kInformativeSwitchRate = 0.25;

struct SyntheticBatch {
    std::vector<Sequence> sequences;
    // 1 = informative frame. Exposed for dataset-fitness tests; the model
    // never sees it.
    std::vector<std::vector<std::uint8_t>> informative_masks;
};

namespace detail {

// Fixed nonlinear embedding shared by the whole dataset.
struct FeatureMap {
    Tensor a_weight;  // hidden x (label_dim + 2)
    Tensor a_bias;    // hidden
    Tensor b_weight;  // feature_dim x hidden

    static constexpr std::size_t kHidden = 16;

    static FeatureMap build(const SyntheticSpec& spec) {
        std::mt19937_64 rng = make_engine(spec.feature_map_seed, 0xfea7);
        FeatureMap fm;
        fm.a_weight = normal_tensor(rng, {kHidden, spec.label_dim + 2});
        fm.a_bias = normal_tensor(rng, {kHidden}, 0.5);
        fm.b_weight = normal_tensor(rng, {spec.feature_dim, kHidden},
                                    1.0 / std::sqrt(static_cast<double>(kHidden)));
        return fm;
    }

    void embed(const std::vector<double>& u, double* out, std::size_t feature_dim) const {
        double h[kHidden];
        for (std::size_t i = 0; i < kHidden; ++i) {
            double acc = a_bias[i];
            for (std::size_t j = 0; j < u.size(); ++j) acc += a_weight(i, j) * u[j];
            h[i] = std::tanh(acc);
        }
        for (std::size_t f = 0; f < feature_dim; ++f) {
            double acc = 0.0;
            for (std::size_t i = 0; i < kHidden; ++i) acc += b_weight(f, i) * h[i];
            out[f] = acc;
        }
    }
};

struct FourierTrajectory {
    double dc = 0.0;  // zero-frequency component; spreads sequence levels
    std::vector<double> amplitude, frequency, phase;

    static FourierTrajectory draw(const SyntheticSpec& spec, std::mt19937_64& rng) {
        FourierTrajectory tr;
        std::uniform_real_distribution<double> level(-0.8, 0.8);
        std::normal_distribution<double> amp(0.0, 1.0);
        std::uniform_real_distribution<double> freq(0.5, std::max(0.5, spec.max_frequency));
        std::uniform_real_distribution<double> ph(0.0, 2.0 * 3.14159265358979323846);
        tr.dc = level(rng);
        for (std::size_t k = 0; k < spec.fourier_components; ++k) {
            tr.amplitude.push_back(amp(rng) / static_cast<double>(k + 1));
            tr.frequency.push_back(freq(rng));
            tr.phase.push_back(ph(rng));
        }
        return tr;
    }

    double at(double t01) const {
        double v = dc;
        for (std::size_t k = 0; k < amplitude.size(); ++k) {
            v += amplitude[k] *
                 std::sin(2.0 * 3.14159265358979323846 * frequency[k] * t01 + phase[k]);
        }
        return v;
    }
};

}  // namespace detail

inline SyntheticBatch generate_synthetic_detailed(const SyntheticSpec& spec,
                                                  std::uint64_t seed) {
    spec.validate();
    const detail::FeatureMap fmap = detail::FeatureMap::build(spec);
    SyntheticBatch batch;
    batch.sequences.reserve(spec.num_sequences);

    for (std::size_t s = 0; s < spec.num_sequences; ++s) {
        std::mt19937_64 rng = make_engine(seed, 0x5e9, s);
        std::uniform_int_distribution<std::size_t> len_dist(spec.len_min, spec.len_max);
        const std::size_t len = len_dist(rng);

        const detail::FourierTrajectory shared = detail::FourierTrajectory::draw(spec, rng);
        std::vector<detail::FourierTrajectory> own, hallucinated;
        for (std::size_t j = 0; j < spec.label_dim; ++j) {
            own.push_back(detail::FourierTrajectory::draw(spec, rng));
            hallucinated.push_back(detail::FourierTrajectory::draw(spec, rng));
        }
        std::uniform_real_distribution<double> ph(0.0, 2.0 * 3.14159265358979323846);
        std::vector<double> bias_phase(spec.label_dim);
        for (auto& p : bias_phase) p = ph(rng);

        Sequence seq;
        char idbuf[32];
        std::snprintf(idbuf, sizeof(idbuf), "seq%05zu", s);
        seq.id = idbuf;
        seq.features = Tensor({len, spec.feature_dim});
        seq.labels = Tensor({len, spec.label_dim});
        seq.pseudo_labels = Tensor({len, spec.label_dim});
        std::vector<std::uint8_t> mask(len, 1);

        const double rho = spec.label_correlation;
        const double w_shared = std::sqrt(rho), w_own = std::sqrt(1.0 - rho);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::normal_distribution<double> noise(0.0, 1.0);

        // Markov chain over frame informativeness; the configured fraction is
        // the stationary rate.
        const double to_informative = kInformativeSwitchRate * spec.informative_fraction;
        const double to_uninformative =
            kInformativeSwitchRate * (1.0 - spec.informative_fraction);
        bool informative = unit(rng) < spec.informative_fraction;

        for (std::size_t t = 0; t < len; ++t) {
            const double t01 = static_cast<double>(t) / static_cast<double>(len);
            for (std::size_t j = 0; j < spec.label_dim; ++j) {
                seq.labels(t, j) = std::tanh(w_shared * shared.at(t01) + w_own * own[j].at(t01));
            }

            if (t > 0) {
                const double flip = informative ? to_uninformative : to_informative;
                if (unit(rng) < flip) informative = !informative;
            }
            mask[t] = informative ? 1 : 0;
            if (informative) {
                std::vector<double> u(spec.label_dim + 2);
                for (std::size_t j = 0; j < spec.label_dim; ++j) u[j] = seq.labels(t, j);
                u[spec.label_dim] = std::sin(2.0 * 3.14159265358979323846 * t01);
                u[spec.label_dim + 1] = std::cos(2.0 * 3.14159265358979323846 * t01);
                fmap.embed(u, &seq.features(t, 0), spec.feature_dim);
                for (std::size_t f = 0; f < spec.feature_dim; ++f) {
                    seq.features(t, f) += kFeatureNoiseStd * noise(rng);
                }
            } else {
                for (std::size_t f = 0; f < spec.feature_dim; ++f) {
                    seq.features(t, f) = noise(rng);
                }
            }

            // Informative frames: truth plus additive noise and a slow bias.
            // Uninformative frames: the simulated backbone hallucinates a
            // plausible but independent trajectory value. Both ways the
            // pseudo-label error is heteroscedastic, far larger where the
            // features carry nothing, without censoring any label range.
            for (std::size_t j = 0; j < spec.label_dim; ++j) {
                const double bias = spec.bias_amplitude *
                                    std::sin(2.0 * 3.14159265358979323846 * t01 + bias_phase[j]);
                const double base = informative ? seq.labels(t, j) + bias
                                                : std::tanh(hallucinated[j].at(t01));
                const double v =
                    base + (spec.noise_std > 0.0 ? spec.noise_std * noise(rng) : 0.0);
                seq.pseudo_labels(t, j) = std::clamp(v, -1.0, 1.0);
            }
        }

        seq.validate();
        batch.sequences.push_back(std::move(seq));
        batch.informative_masks.push_back(std::move(mask));
    }
    return batch;
}

inline std::vector<Sequence> generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
    return generate_synthetic_detailed(spec, seed).sequences;
}

// ---------------------------------------------------------------------------
// On-disk dataset: a directory with manifest.json plus one TSV per sequence.
// Row layout (tab-separated): frame index, feature_dim feature values,
// label_dim labels, label_dim pseudo-labels. Doubles are printed with 17
// significant digits so a round trip is exact.
// ---------------------------------------------------------------------------

inline constexpr int kDatasetSchemaVersion = 1;

namespace detail {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

inline void save_dataset(const std::filesystem::path& dir,
                         const std::vector<Sequence>& sequences) {
    if (sequences.empty()) throw ContractError("save_dataset: empty dataset");
    const std::size_t feature_dim = sequences.front().feature_dim();
    const std::size_t label_dim = sequences.front().label_dim();

    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("save_dataset: cannot create directory " + dir.string());

    nlohmann::json manifest;
    manifest["schema_version"] = kDatasetSchemaVersion;
    manifest["feature_dim"] = feature_dim;
    manifest["label_dim"] = label_dim;
    manifest["delimiter"] = "tab";
    manifest["columns"] =
        "frame_index, feature[feature_dim], label[label_dim], pseudo_label[label_dim]";
    auto& list = manifest["sequences"] = nlohmann::json::array();
    for (const auto& seq : sequences) {
        list.push_back({{"id", seq.id}, {"file", seq.id + ".tsv"}, {"length", seq.length()}});
    }

    {
        std::ofstream out(dir / "manifest.json", std::ios::binary);
        if (!out) throw IoError("save_dataset: cannot write " + (dir / "manifest.json").string());
        out << manifest.dump(2) << "\n";
    }

    for (const auto& seq : sequences) {
        if (seq.feature_dim() != feature_dim || seq.label_dim() != label_dim) {
            throw ContractError("save_dataset: sequence " + seq.id + " dimensions disagree");
        }
        std::ofstream out(dir / (seq.id + ".tsv"), std::ios::binary);
        if (!out) throw IoError("save_dataset: cannot write " + (dir / (seq.id + ".tsv")).string());
        for (std::size_t t = 0; t < seq.length(); ++t) {
            out << t;
            for (std::size_t f = 0; f < feature_dim; ++f) {
                out << '\t' << detail::format_double(seq.features(t, f));
            }
            for (std::size_t j = 0; j < label_dim; ++j) {
                out << '\t' << detail::format_double(seq.labels(t, j));
            }
            for (std::size_t j = 0; j < label_dim; ++j) {
                out << '\t' << detail::format_double(seq.pseudo_labels(t, j));
            }
            out << '\n';
        }
    }
}

inline std::vector<Sequence> load_dataset(const std::filesystem::path& dir) {
    const auto manifest_path = dir / "manifest.json";
    std::ifstream in(manifest_path, std::ios::binary);
    if (!in) throw IoError("load_dataset: cannot open " + manifest_path.string());

    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(manifest_path.string() + ": invalid JSON: " + e.what());
    }

    if (!manifest.contains("schema_version") ||
        manifest["schema_version"].get<int>() != kDatasetSchemaVersion) {
        throw ParseError(manifest_path.string() + ": unsupported or missing schema_version");
    }
    if (!manifest.contains("feature_dim") || !manifest.contains("label_dim") ||
        !manifest.contains("sequences")) {
        throw ParseError(manifest_path.string() + ": missing feature_dim/label_dim/sequences");
    }
    const std::size_t feature_dim = manifest["feature_dim"].get<std::size_t>();
    const std::size_t label_dim = manifest["label_dim"].get<std::size_t>();
    const auto& entries = manifest["sequences"];
    if (!entries.is_array() || entries.empty()) {
        throw ParseError(manifest_path.string() + ": empty dataset (no sequences listed)");
    }

    std::vector<Sequence> sequences;
    sequences.reserve(entries.size());
    const std::size_t ncols = 1 + feature_dim + 2 * label_dim;

    for (const auto& entry : entries) {
        const std::string id = entry.at("id").get<std::string>();
        const std::string file = entry.at("file").get<std::string>();
        const std::size_t length = entry.at("length").get<std::size_t>();
        const auto path = dir / file;
        std::ifstream rec(path, std::ios::binary);
        if (!rec) throw IoError("load_dataset: cannot open " + path.string());

        Sequence seq;
        seq.id = id;
        seq.features = Tensor({length, feature_dim});
        seq.labels = Tensor({length, label_dim});
        seq.pseudo_labels = Tensor({length, label_dim});

        std::string line;
        std::size_t lineno = 0;
        std::size_t row = 0;
        while (std::getline(rec, line)) {
            ++lineno;
            if (line.empty()) continue;
            if (row >= length) {
                throw ParseError(path.string() + ":" + std::to_string(lineno) +
                                 ": more rows than the manifest length " +
                                 std::to_string(length));
            }
            std::vector<double> fields;
            fields.reserve(ncols);
            const char* p = line.c_str();
            char* endp = nullptr;
            while (*p) {
                const double v = std::strtod(p, &endp);
                if (endp == p) {
                    throw ParseError(path.string() + ":" + std::to_string(lineno) +
                                     ": malformed numeric field");
                }
                fields.push_back(v);
                p = endp;
                while (*p == '\t' || *p == ' ') ++p;
            }
            if (fields.size() != ncols) {
                throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                                 std::to_string(ncols) + " columns, got " +
                                 std::to_string(fields.size()));
            }
            if (static_cast<std::size_t>(fields[0]) != row) {
                throw ParseError(path.string() + ":" + std::to_string(lineno) +
                                 ": frame index out of order");
            }
            for (std::size_t f = 0; f < feature_dim; ++f) seq.features(row, f) = fields[1 + f];
            for (std::size_t j = 0; j < label_dim; ++j) {
                const double y = fields[1 + feature_dim + j];
                const double yp = fields[1 + feature_dim + label_dim + j];
                if (std::abs(y) > 1.0 || std::abs(yp) > 1.0) {
                    throw ParseError(path.string() + ":" + std::to_string(lineno) +
                                     ": label value outside [-1, 1]");
                }
                seq.labels(row, j) = y;
                seq.pseudo_labels(row, j) = yp;
            }
            ++row;
        }
        if (row != length) {
            throw ParseError(path.string() + ": expected " + std::to_string(length) +
                             " rows, got " + std::to_string(row));
        }
        seq.validate();
        sequences.push_back(std::move(seq));
    }
    return sequences;
}

// ---------------------------------------------------------------------------
// Sequence-level dataset partition.
// ---------------------------------------------------------------------------

struct DatasetSplit {
    std::vector<Sequence> train, val, test;
};

inline DatasetSplit split_dataset(std::vector<Sequence> dataset, double train_ratio,
                                  double val_ratio, double test_ratio, std::uint64_t seed) {
    if (train_ratio <= 0.0 || val_ratio <= 0.0 || test_ratio <= 0.0) {
        throw ContractError("split_dataset: ratios must be positive");
    }
    const std::size_t n = dataset.size();
    if (n < 3) {
        throw ContractError("split_dataset: need at least 3 sequences, got " +
                            std::to_string(n));
    }
    const double total = train_ratio + val_ratio + test_ratio;
    const double ratios[3] = {train_ratio / total, val_ratio / total, test_ratio / total};

    // Largest-remainder allocation, then make sure every part is nonempty.
    std::size_t counts[3];
    double frac[3];
    std::size_t assigned = 0;
    for (int i = 0; i < 3; ++i) {
        const double want = ratios[i] * static_cast<double>(n);
        counts[i] = static_cast<std::size_t>(want);
        frac[i] = want - static_cast<double>(counts[i]);
        assigned += counts[i];
    }
    while (assigned < n) {
        int best = 0;
        for (int i = 1; i < 3; ++i) {
            if (frac[i] > frac[best]) best = i;
        }
        ++counts[best];
        frac[best] = -1.0;
        ++assigned;
    }
    for (int i = 0; i < 3; ++i) {
        while (counts[i] == 0) {
            int donor = 0;
            for (int j = 1; j < 3; ++j) {
                if (counts[j] > counts[donor]) donor = j;
            }
            --counts[donor];
            ++counts[i];
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng = make_engine(seed, 0x5b17);
    std::shuffle(order.begin(), order.end(), rng);

    DatasetSplit out;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < counts[0]; ++i) out.train.push_back(std::move(dataset[order[pos++]]));
    for (std::size_t i = 0; i < counts[1]; ++i) out.val.push_back(std::move(dataset[order[pos++]]));
    for (std::size_t i = 0; i < counts[2]; ++i) out.test.push_back(std::move(dataset[order[pos++]]));
    return out;
}

}  // namespace seqnp
