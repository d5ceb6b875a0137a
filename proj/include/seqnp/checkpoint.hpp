#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "seqnp/model.hpp"
#include "seqnp/training.hpp"

namespace seqnp {

// Checkpoint container: a single self-describing binary file.
//   magic "SNPC", u32 version,
//   u64 json length + RunConfig snapshot as JSON,
//   u64 tensor count, then per tensor: length-prefixed name, ndim, dims,
//   value count and raw doubles.
inline constexpr char kCheckpointMagic[4] = {'S', 'N', 'P', 'C'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void to_json(nlohmann::json& j, const ModelConfig& cfg) {
    j = nlohmann::json{{"feature_dim", cfg.feature_dim},
                       {"label_dim", cfg.label_dim},
                       {"repr_dim", cfg.repr_dim},
                       {"encoder_hidden1", cfg.encoder_hidden1},
                       {"encoder_hidden2", cfg.encoder_hidden2},
                       {"decoder_hidden1", cfg.decoder_hidden1},
                       {"decoder_hidden2", cfg.decoder_hidden2},
                       {"decoder_hidden3", cfg.decoder_hidden3},
                       {"sigma_min", cfg.sigma_min},
                       {"variant", variant_name(cfg.variant)},
                       {"attention_heads", cfg.attention_heads},
                       {"attention_dim", cfg.attention_dim}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& cfg) {
    j.at("feature_dim").get_to(cfg.feature_dim);
    j.at("label_dim").get_to(cfg.label_dim);
    j.at("repr_dim").get_to(cfg.repr_dim);
    j.at("encoder_hidden1").get_to(cfg.encoder_hidden1);
    j.at("encoder_hidden2").get_to(cfg.encoder_hidden2);
    j.at("decoder_hidden1").get_to(cfg.decoder_hidden1);
    j.at("decoder_hidden2").get_to(cfg.decoder_hidden2);
    j.at("decoder_hidden3").get_to(cfg.decoder_hidden3);
    j.at("sigma_min").get_to(cfg.sigma_min);
    cfg.variant = variant_from_name(j.at("variant").get<std::string>());
    j.at("attention_heads").get_to(cfg.attention_heads);
    j.at("attention_dim").get_to(cfg.attention_dim);
}

inline void to_json(nlohmann::json& j, const RunConfig& cfg) {
    j = nlohmann::json{{"task", task_name(cfg.task)},
                       {"model", cfg.model},
                       {"loss_variant", loss_variant_name(cfg.loss_variant)},
                       {"lambda_kl", cfg.lambda_kl},
                       {"lambda_reg", cfg.lambda_reg},
                       {"lreg_literal_sum", cfg.lreg_literal_sum},
                       {"seq_len_min", cfg.seq_len_min},
                       {"seq_len_max", cfg.seq_len_max},
                       {"min_context", cfg.min_context},
                       {"mix_prob", cfg.mix_prob},
                       {"batch_size", cfg.batch_size},
                       {"epochs", cfg.epochs},
                       {"iters_per_epoch", cfg.iters_per_epoch},
                       {"learning_rate", cfg.learning_rate},
                       {"weight_decay", cfg.weight_decay},
                       {"seed", cfg.seed},
                       {"eval_window_len", cfg.eval_window_len},
                       {"eval_num_context", cfg.eval_num_context},
                       {"eval_context_mode", context_mode_name(cfg.eval_context_mode)},
                       {"train_ratio", cfg.train_ratio},
                       {"val_ratio", cfg.val_ratio},
                       {"test_ratio", cfg.test_ratio}};
}

inline void from_json(const nlohmann::json& j, RunConfig& cfg) {
    cfg.task = task_from_name(j.at("task").get<std::string>());
    j.at("model").get_to(cfg.model);
    cfg.loss_variant = loss_variant_from_name(j.at("loss_variant").get<std::string>());
    j.at("lambda_kl").get_to(cfg.lambda_kl);
    j.at("lambda_reg").get_to(cfg.lambda_reg);
    j.at("lreg_literal_sum").get_to(cfg.lreg_literal_sum);
    j.at("seq_len_min").get_to(cfg.seq_len_min);
    j.at("seq_len_max").get_to(cfg.seq_len_max);
    j.at("min_context").get_to(cfg.min_context);
    j.at("mix_prob").get_to(cfg.mix_prob);
    j.at("batch_size").get_to(cfg.batch_size);
    j.at("epochs").get_to(cfg.epochs);
    j.at("iters_per_epoch").get_to(cfg.iters_per_epoch);
    j.at("learning_rate").get_to(cfg.learning_rate);
    j.at("weight_decay").get_to(cfg.weight_decay);
    j.at("seed").get_to(cfg.seed);
    j.at("eval_window_len").get_to(cfg.eval_window_len);
    j.at("eval_num_context").get_to(cfg.eval_num_context);
    cfg.eval_context_mode = context_mode_from_name(j.at("eval_context_mode").get<std::string>());
    j.at("train_ratio").get_to(cfg.train_ratio);
    j.at("val_ratio").get_to(cfg.val_ratio);
    j.at("test_ratio").get_to(cfg.test_ratio);
}

namespace detail {

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& is, T& v, const std::string& path, const char* field) {
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw ParseError(path + ": truncated checkpoint while reading " + field);
}

}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& path, const NamedTensors& params,
                            const RunConfig& config) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_checkpoint: cannot write " + path.string());

    out.write(kCheckpointMagic, 4);
    detail::write_pod(out, kCheckpointVersion);

    const std::string config_json = nlohmann::json(config).dump();
    detail::write_pod(out, static_cast<std::uint64_t>(config_json.size()));
    out.write(config_json.data(), static_cast<std::streamsize>(config_json.size()));

    detail::write_pod(out, static_cast<std::uint64_t>(params.size()));
    for (const auto& [name, tensor] : params) {
        detail::write_pod(out, static_cast<std::uint64_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::write_pod(out, static_cast<std::uint64_t>(tensor.ndim()));
        for (std::size_t d : tensor.shape()) {
            detail::write_pod(out, static_cast<std::uint64_t>(d));
        }
        detail::write_pod(out, static_cast<std::uint64_t>(tensor.numel()));
        out.write(reinterpret_cast<const char*>(tensor.data()),
                  static_cast<std::streamsize>(tensor.numel() * sizeof(double)));
    }
    if (!out) throw IoError("save_checkpoint: write failed for " + path.string());
}

struct Checkpoint {
    NamedTensors params;
    RunConfig config;
};

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_checkpoint: cannot open " + path.string());
    const std::string p = path.string();

    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
        throw ParseError(p + ": not a checkpoint file (bad magic)");
    }
    std::uint32_t version = 0;
    detail::read_pod(in, version, p, "version");
    if (version != kCheckpointVersion) {
        throw ParseError(p + ": unsupported checkpoint version " + std::to_string(version));
    }

    std::uint64_t json_len = 0;
    detail::read_pod(in, json_len, p, "config length");
    std::string config_json(json_len, '\0');
    in.read(config_json.data(), static_cast<std::streamsize>(json_len));
    if (!in) throw ParseError(p + ": truncated checkpoint while reading config");

    Checkpoint ckpt;
    try {
        ckpt.config = nlohmann::json::parse(config_json).get<RunConfig>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(p + ": invalid config JSON: " + e.what());
    }

    std::uint64_t count = 0;
    detail::read_pod(in, count, p, "tensor count");
    for (std::uint64_t i = 0; i < count; ++i) {
        std::uint64_t name_len = 0;
        detail::read_pod(in, name_len, p, "tensor name length");
        std::string name(name_len, '\0');
        in.read(name.data(), static_cast<std::streamsize>(name_len));
        if (!in) throw ParseError(p + ": truncated checkpoint while reading tensor name");

        std::uint64_t ndim = 0;
        detail::read_pod(in, ndim, p, "tensor rank");
        std::vector<std::size_t> shape(ndim);
        for (auto& d : shape) {
            std::uint64_t v = 0;
            detail::read_pod(in, v, p, ("shape of " + name).c_str());
            d = static_cast<std::size_t>(v);
        }
        std::uint64_t numel = 0;
        detail::read_pod(in, numel, p, ("value count of " + name).c_str());
        if (numel != Tensor::count(shape)) {
            throw ParseError(p + ": tensor " + name + " claims " + std::to_string(numel) +
                             " values for shape " + Tensor::shape_string(shape));
        }
        std::vector<double> values(numel);
        in.read(reinterpret_cast<char*>(values.data()),
                static_cast<std::streamsize>(numel * sizeof(double)));
        if (!in) throw ParseError(p + ": truncated checkpoint while reading tensor " + name);
        ckpt.params.emplace(std::move(name), Tensor(std::move(shape), std::move(values)));
    }

    // Validate the stored tensors against the architecture the config claims.
    const auto expected = param_shapes(ckpt.config.model);
    for (const auto& [name, shape] : expected) {
        auto it = ckpt.params.find(name);
        if (it == ckpt.params.end()) {
            throw ParseError(p + ": checkpoint is missing tensor " + name);
        }
        if (it->second.shape() != shape) {
            throw ParseError(p + ": tensor " + name + " has shape " +
                             Tensor::shape_string(it->second.shape()) + ", config wants " +
                             Tensor::shape_string(shape));
        }
    }
    for (const auto& [name, tensor] : ckpt.params) {
        if (!expected.count(name)) {
            throw ParseError(p + ": unexpected tensor " + name + " for this architecture");
        }
    }
    return ckpt;
}

}  // namespace seqnp
