#include "ttt4rec/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace ttt4rec {

namespace {

using nlohmann::json;

json read_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    json j = json::parse(is, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config file is not valid JSON: " + path);
    if (!j.is_object()) throw ConfigError("config file must hold a JSON object: " + path);
    return j;
}

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.count(it.key())) {
            throw ConfigError("unknown config key '" + where + it.key() + "'");
        }
    }
}

template <class T>
void maybe(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

TrainTargets train_targets_from_string(const std::string& s) {
    if (s == "final") return TrainTargets::FinalOnly;
    if (s == "all_prefixes") return TrainTargets::AllPrefixes;
    if (s == "last_k") return TrainTargets::LastK;
    throw ConfigError("train.train_targets must be one of final|all_prefixes|last_k, got '" + s + "'");
}

std::string train_targets_to_string(TrainTargets t) {
    switch (t) {
        case TrainTargets::FinalOnly: return "final";
        case TrainTargets::AllPrefixes: return "all_prefixes";
        case TrainTargets::LastK: return "last_k";
    }
    return "final";
}

RunConfig run_config_from_json(const json& j) {
    RunConfig cfg = default_run_config();
    reject_unknown_keys(j, {"dataset_cache", "out_dir", "seed", "precision", "model", "ttt", "train"},
                        "");
    maybe(j, "dataset_cache", cfg.dataset_cache);
    maybe(j, "out_dir", cfg.out_dir);
    maybe(j, "seed", cfg.seed);
    maybe(j, "precision", cfg.precision);

    if (j.contains("model")) {
        const json& m = j.at("model");
        reject_unknown_keys(m, {"embed_dim", "mlp_hidden", "max_seq_len"}, "model.");
        maybe(m, "embed_dim", cfg.embed_dim);
        maybe(m, "mlp_hidden", cfg.mlp_hidden);
        maybe(m, "max_seq_len", cfg.max_seq_len);
    }
    if (j.contains("ttt")) {
        const json& t = j.at("ttt");
        reject_unknown_keys(t, {"inner_lr", "mini_batch_size", "initializer_range"}, "ttt.");
        maybe(t, "inner_lr", cfg.inner_lr);
        maybe(t, "mini_batch_size", cfg.mini_batch_size);
        maybe(t, "initializer_range", cfg.initializer_range);
    }
    if (j.contains("train")) {
        const json& t = j.at("train");
        reject_unknown_keys(t,
                            {"outer_lr", "epochs", "batch_size", "eval_every_epoch", "beta1", "beta2",
                             "epsilon", "grad_clip_norm", "threads", "train_targets", "last_k",
                             "train_negatives", "eval_negatives"},
                            "train.");
        maybe(t, "outer_lr", cfg.train.outer_lr);
        maybe(t, "epochs", cfg.train.epochs);
        maybe(t, "batch_size", cfg.train.batch_size);
        maybe(t, "eval_every_epoch", cfg.train.eval_every_epoch);
        maybe(t, "beta1", cfg.train.beta1);
        maybe(t, "beta2", cfg.train.beta2);
        maybe(t, "epsilon", cfg.train.epsilon);
        maybe(t, "grad_clip_norm", cfg.train.grad_clip_norm);
        maybe(t, "threads", cfg.train.threads);
        if (t.contains("train_targets")) {
            cfg.train.split.targets = train_targets_from_string(t.at("train_targets").get<std::string>());
        }
        maybe(t, "last_k", cfg.train.split.last_k);
        maybe(t, "train_negatives", cfg.train.train_negatives);
        maybe(t, "eval_negatives", cfg.train.eval_negatives);
    }
    cfg.train.seed = cfg.seed;
    return cfg;
}

json run_config_to_json(const RunConfig& cfg) {
    return json{
        {"dataset_cache", cfg.dataset_cache},
        {"out_dir", cfg.out_dir},
        {"seed", cfg.seed},
        {"precision", cfg.precision},
        {"model",
         {{"embed_dim", cfg.embed_dim}, {"mlp_hidden", cfg.mlp_hidden}, {"max_seq_len", cfg.max_seq_len}}},
        {"ttt",
         {{"inner_lr", cfg.inner_lr},
          {"mini_batch_size", cfg.mini_batch_size},
          {"initializer_range", cfg.initializer_range}}},
        {"train",
         {{"outer_lr", cfg.train.outer_lr},
          {"epochs", cfg.train.epochs},
          {"batch_size", cfg.train.batch_size},
          {"eval_every_epoch", cfg.train.eval_every_epoch},
          {"beta1", cfg.train.beta1},
          {"beta2", cfg.train.beta2},
          {"epsilon", cfg.train.epsilon},
          {"grad_clip_norm", cfg.train.grad_clip_norm},
          {"threads", cfg.train.threads},
          {"train_targets", train_targets_to_string(cfg.train.split.targets)},
          {"last_k", cfg.train.split.last_k},
          {"train_negatives", cfg.train.train_negatives},
          {"eval_negatives", cfg.train.eval_negatives}}},
    };
}

}  // namespace

void RunConfig::validate() const {
    if (precision != "f64" && precision != "f32") {
        throw ConfigError("precision must be 'f64' or 'f32', got '" + precision + "'");
    }
    if (embed_dim <= 0) throw ConfigError("model.embed_dim must be positive");
    if (mlp_hidden < 0) throw ConfigError("model.mlp_hidden must be >= 0 (0 = 2 * embed_dim)");
    if (max_seq_len < 0) throw ConfigError("model.max_seq_len must be >= 0 (0 = cache default)");
    if (inner_lr <= 0.0) throw ConfigError("ttt.inner_lr must be positive");
    if (mini_batch_size < 1) throw ConfigError("ttt.mini_batch_size must be >= 1");
    if (initializer_range <= 0.0) throw ConfigError("ttt.initializer_range must be positive");
    train.validate();
}

ModelConfig RunConfig::model_config(int32_t vocab_size, int64_t cache_max_seq_len) const {
    ModelConfig m;
    m.vocab_size = vocab_size;
    m.embed_dim = embed_dim;
    m.mlp_hidden = mlp_hidden > 0 ? mlp_hidden : 2 * embed_dim;
    m.max_seq_len = max_seq_len > 0 ? max_seq_len : cache_max_seq_len;
    m.ttt.dim = embed_dim;
    m.ttt.inner_lr = inner_lr;
    m.ttt.mini_batch_size = mini_batch_size;
    m.ttt.initializer_range = initializer_range;
    return m;
}

RunConfig default_run_config() { return RunConfig{}; }

RunConfig load_run_config(const std::string& path) {
    return run_config_from_json(read_json_file(path));
}

void apply_overrides(RunConfig& cfg, const CliOverrides& o) {
    if (o.seed) cfg.seed = *o.seed;
    if (o.epochs) cfg.train.epochs = *o.epochs;
    if (o.lr) cfg.train.outer_lr = *o.lr;
    if (o.inner_lr) cfg.inner_lr = *o.inner_lr;
    if (o.mini_batch_size) cfg.mini_batch_size = *o.mini_batch_size;
    if (o.initializer_range) cfg.initializer_range = *o.initializer_range;
    if (o.embed_dim) cfg.embed_dim = *o.embed_dim;
    if (o.max_seq_len) cfg.max_seq_len = *o.max_seq_len;
    if (o.out) cfg.out_dir = *o.out;
    cfg.train.seed = cfg.seed;
}

std::string run_config_to_json_text(const RunConfig& cfg) {
    return run_config_to_json(cfg).dump(2) + "\n";
}

GridSpec load_grid_spec(const std::string& path) {
    json j = read_json_file(path);
    reject_unknown_keys(j, {"initializer_range", "mini_batch_size", "config", "base"}, "");
    GridSpec spec;
    if (!j.contains("initializer_range") || !j.contains("mini_batch_size")) {
        throw ConfigError("grid spec needs 'initializer_range' and 'mini_batch_size' arrays");
    }
    spec.initializer_range = j.at("initializer_range").get<std::vector<double>>();
    spec.mini_batch_size = j.at("mini_batch_size").get<std::vector<int64_t>>();
    if (spec.initializer_range.empty() || spec.mini_batch_size.empty()) {
        throw ConfigError("grid spec axes must be nonempty");
    }
    if (j.contains("config")) {
        spec.base = load_run_config(j.at("config").get<std::string>());
    } else if (j.contains("base")) {
        spec.base = run_config_from_json(j.at("base"));
    } else {
        throw ConfigError("grid spec needs a base config ('config' path or inline 'base' object)");
    }
    return spec;
}

}  // namespace ttt4rec
