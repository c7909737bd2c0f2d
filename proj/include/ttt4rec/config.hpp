#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ttt4rec/data.hpp"
#include "ttt4rec/model.hpp"
#include "ttt4rec/training.hpp"

namespace ttt4rec {

// Fully resolved run configuration. Loaded from a JSON config file, then
// adjusted by explicit command-line flags; a serialized copy is written into
// the run directory before any work starts. Unknown config keys are errors.
struct RunConfig {
    std::string dataset_cache;
    std::string out_dir = "run";
    uint64_t seed = 42;
    std::string precision = "f64";  // "f64" or "f32"

    int64_t embed_dim = 64;
    int64_t mlp_hidden = 0;   // 0 = 2 * embed_dim
    int64_t max_seq_len = 0;  // 0 = the cached dataset's default

    double inner_lr = 0.1;
    int64_t mini_batch_size = 1;
    double initializer_range = 0.02;

    TrainConfig train;

    void validate() const;

    // Model config for a concrete vocabulary and window length.
    ModelConfig model_config(int32_t vocab_size, int64_t cache_max_seq_len) const;
};

struct CliOverrides {
    std::optional<uint64_t> seed;
    std::optional<int> epochs;
    std::optional<double> lr;
    std::optional<double> inner_lr;
    std::optional<int64_t> mini_batch_size;
    std::optional<double> initializer_range;
    std::optional<int64_t> embed_dim;
    std::optional<int64_t> max_seq_len;
    std::optional<std::string> out;
};

RunConfig default_run_config();
RunConfig load_run_config(const std::string& path);
void apply_overrides(RunConfig& cfg, const CliOverrides& o);
std::string run_config_to_json_text(const RunConfig& cfg);

// Hyperparameter grid: the cartesian product of initializer_range and
// mini_batch_size values over a shared base run configuration, enumerated
// in lexicographic order.
struct GridSpec {
    std::vector<double> initializer_range;
    std::vector<int64_t> mini_batch_size;
    RunConfig base;
};

GridSpec load_grid_spec(const std::string& path);

}  // namespace ttt4rec
