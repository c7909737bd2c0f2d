#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ttt4rec/error.hpp"
#include "ttt4rec/model.hpp"

namespace ttt4rec {

// Self-describing binary checkpoint. Layout:
//   magic "T4RCKPT\n", u32 format version, u32 scalar width (4|8),
//   i64 epoch, u64 config json length + bytes,
//   u32 param count, then per parameter:
//     u32 name length + bytes, u32 rank, i64 dims[rank], raw row-major data.
// Values are written as raw native-endian bytes so a save/load round trip
// is bit-exact.

inline constexpr char kCheckpointMagic[8] = {'T', '4', 'R', 'C', 'K', 'P', 'T', '\n'};
inline constexpr uint32_t kCheckpointVersion = 1;

inline nlohmann::json model_config_to_json(const ModelConfig& cfg) {
    return nlohmann::json{
        {"vocab_size", cfg.vocab_size},
        {"embed_dim", cfg.embed_dim},
        {"mlp_hidden", cfg.mlp_hidden},
        {"max_seq_len", cfg.max_seq_len},
        {"ttt",
         {{"dim", cfg.ttt.dim},
          {"inner_lr", cfg.ttt.inner_lr},
          {"mini_batch_size", cfg.ttt.mini_batch_size},
          {"initializer_range", cfg.ttt.initializer_range}}},
    };
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    cfg.vocab_size = j.at("vocab_size").get<int64_t>();
    cfg.embed_dim = j.at("embed_dim").get<int64_t>();
    cfg.mlp_hidden = j.at("mlp_hidden").get<int64_t>();
    cfg.max_seq_len = j.at("max_seq_len").get<int64_t>();
    const auto& t = j.at("ttt");
    cfg.ttt.dim = t.at("dim").get<int64_t>();
    cfg.ttt.inner_lr = t.at("inner_lr").get<double>();
    cfg.ttt.mini_batch_size = t.at("mini_batch_size").get<int64_t>();
    cfg.ttt.initializer_range = t.at("initializer_range").get<double>();
    return cfg;
}

namespace detail {

template <class T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_pod(std::istream& is, const char* what) {
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) {
        throw DataError(std::string("checkpoint: truncated while reading ") + what);
    }
    return v;
}

}  // namespace detail

template <class S>
void save_checkpoint(const std::string& path, const ModelConfig& cfg, const ModelParamsT<S>& params,
                     int64_t epoch) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("checkpoint: cannot open for writing: " + path);

    os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    detail::write_pod(os, kCheckpointVersion);
    detail::write_pod(os, static_cast<uint32_t>(sizeof(S)));
    detail::write_pod(os, epoch);

    const std::string cfg_json = model_config_to_json(cfg).dump();
    detail::write_pod(os, static_cast<uint64_t>(cfg_json.size()));
    os.write(cfg_json.data(), static_cast<std::streamsize>(cfg_json.size()));

    detail::write_pod(os, static_cast<uint32_t>(kParamCount));
    for_each_param(params, [&](const char* name, const TensorT<S>& t) {
        const uint32_t name_len = static_cast<uint32_t>(std::strlen(name));
        detail::write_pod(os, name_len);
        os.write(name, name_len);
        detail::write_pod(os, static_cast<uint32_t>(t.rank()));
        for (int64_t d = 0; d < t.rank(); ++d) detail::write_pod(os, t.dim(d));
        os.write(reinterpret_cast<const char*>(t.data()),
                 static_cast<std::streamsize>(static_cast<size_t>(t.numel()) * sizeof(S)));
    });
    if (!os) throw DataError("checkpoint: write failed: " + path);
}

struct CheckpointInfo {
    ModelConfig config;
    int64_t epoch = 0;
    uint32_t scalar_width = 8;
};

inline CheckpointInfo peek_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("checkpoint: cannot open: " + path);
    char magic[8];
    if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
        throw DataError("checkpoint: bad magic in " + path);
    }
    const auto version = detail::read_pod<uint32_t>(is, "version");
    if (version != kCheckpointVersion) {
        throw DataError("checkpoint: unsupported format version " + std::to_string(version));
    }
    CheckpointInfo info;
    info.scalar_width = detail::read_pod<uint32_t>(is, "scalar width");
    info.epoch = detail::read_pod<int64_t>(is, "epoch");
    const auto json_len = detail::read_pod<uint64_t>(is, "config length");
    std::string cfg_json(json_len, '\0');
    if (!is.read(cfg_json.data(), static_cast<std::streamsize>(json_len))) {
        throw DataError("checkpoint: truncated config in " + path);
    }
    nlohmann::json j = nlohmann::json::parse(cfg_json, nullptr, false);
    if (j.is_discarded()) throw DataError("checkpoint: corrupt config json in " + path);
    info.config = model_config_from_json(j);
    return info;
}

template <class S>
std::pair<ModelConfig, ModelParamsT<S>> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("checkpoint: cannot open: " + path);
    char magic[8];
    if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
        throw DataError("checkpoint: bad magic in " + path);
    }
    const auto version = detail::read_pod<uint32_t>(is, "version");
    if (version != kCheckpointVersion) {
        throw DataError("checkpoint: unsupported format version " + std::to_string(version));
    }
    const auto width = detail::read_pod<uint32_t>(is, "scalar width");
    if (width != sizeof(S)) {
        throw DataError("checkpoint: stores " + std::to_string(width * 8) +
                        "-bit values, loader expects " + std::to_string(sizeof(S) * 8) + "-bit");
    }
    (void)detail::read_pod<int64_t>(is, "epoch");
    const auto json_len = detail::read_pod<uint64_t>(is, "config length");
    std::string cfg_json(json_len, '\0');
    if (!is.read(cfg_json.data(), static_cast<std::streamsize>(json_len))) {
        throw DataError("checkpoint: truncated config in " + path);
    }
    nlohmann::json j = nlohmann::json::parse(cfg_json, nullptr, false);
    if (j.is_discarded()) throw DataError("checkpoint: corrupt config json in " + path);
    ModelConfig cfg = model_config_from_json(j);

    const auto n_params = detail::read_pod<uint32_t>(is, "param count");
    if (n_params != kParamCount) {
        throw DataError("checkpoint: expects " + std::to_string(kParamCount) + " parameters, found " +
                        std::to_string(n_params));
    }
    ModelParamsT<S> params;
    for_each_param(params, [&](const char* name, TensorT<S>& t) {
        const auto name_len = detail::read_pod<uint32_t>(is, "name length");
        std::string stored(name_len, '\0');
        if (!is.read(stored.data(), name_len)) throw DataError("checkpoint: truncated name");
        if (stored != name) {
            throw DataError("checkpoint: parameter order mismatch: expected " + std::string(name) +
                            ", found " + stored);
        }
        const auto rank = detail::read_pod<uint32_t>(is, "rank");
        std::vector<int64_t> dims(rank);
        for (auto& d : dims) d = detail::read_pod<int64_t>(is, "dimension");
        TensorT<S> tensor(dims);
        if (!is.read(reinterpret_cast<char*>(tensor.data()),
                     static_cast<std::streamsize>(static_cast<size_t>(tensor.numel()) * sizeof(S)))) {
            throw DataError(std::string("checkpoint: truncated data for ") + name);
        }
        t = std::move(tensor);
    });
    return {cfg, std::move(params)};
}

}  // namespace ttt4rec
