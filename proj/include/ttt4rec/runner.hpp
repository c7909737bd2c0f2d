#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ttt4rec/checkpoint.hpp"
#include "ttt4rec/config.hpp"
#include "ttt4rec/data.hpp"
#include "ttt4rec/eval.hpp"
#include "ttt4rec/model.hpp"
#include "ttt4rec/training.hpp"

namespace ttt4rec {

namespace detail {

inline std::string fmt_fixed(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

inline std::string fmt_compact(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw DataError("cannot open for writing: " + path.string());
    os << content;
    if (!os) throw DataError("write failed: " + path.string());
}

inline std::string metrics_csv_header() { return "epoch,train_loss,ndcg5,ndcg10,hr5,hr10\n"; }

inline std::string metrics_csv_row(const EpochStats& s) {
    std::string row = std::to_string(s.epoch) + "," + fmt_fixed(s.mean_train_loss);
    if (s.metrics) {
        row += "," + fmt_fixed(s.metrics->ndcg5) + "," + fmt_fixed(s.metrics->ndcg10) + "," +
               fmt_fixed(s.metrics->hr5) + "," + fmt_fixed(s.metrics->hr10);
    } else {
        row += ",,,,";
    }
    return row + "\n";
}

inline nlohmann::json metrics_to_json(const MetricsReport& m) {
    return nlohmann::json{
        {"ndcg5", m.ndcg5}, {"ndcg10", m.ndcg10}, {"hr5", m.hr5}, {"hr10", m.hr10}, {"count", m.count}};
}

}  // namespace detail

struct RunOutcome {
    std::filesystem::path run_dir;
    std::vector<EpochStats> epochs;
    MetricsReport final_metrics;
    std::filesystem::path final_checkpoint;
};

// Full training run: loads the cached dataset, splits it, trains with
// per-epoch checkpoints and metric rows, and leaves a self-describing run
// directory behind. Wall-clock timing goes to stdout only, so a rerun with
// the same config and seed reproduces every artifact byte for byte.
template <class S>
RunOutcome run_training_impl(const RunConfig& cfg) {
    cfg.validate();
    if (cfg.dataset_cache.empty()) throw ConfigError("run config needs dataset_cache");

    Dataset dataset = read_dataset_cache(cfg.dataset_cache);
    if (cfg.max_seq_len > 0) dataset.max_seq_len = cfg.max_seq_len;
    const ModelConfig model_cfg = cfg.model_config(dataset.vocab_size, dataset.max_seq_len);
    model_cfg.validate();

    TrainConfig train_cfg = cfg.train;
    train_cfg.seed = cfg.seed;

    Split split = split_leave_one_out(dataset, train_cfg.split);
    EvalContext ctx = EvalContext::from_dataset(dataset);

    namespace fs = std::filesystem;
    const fs::path run_dir(cfg.out_dir);
    fs::create_directories(run_dir);
    detail::write_text_file(run_dir / "resolved_config.json", run_config_to_json_text(cfg));

    ModelParamsT<S> params = init_params<S>(model_cfg, cfg.seed);

    std::string csv = detail::metrics_csv_header();
    std::string jsonl;
    int64_t last_epoch = 0;

    EpochSink<S> sink = [&](const EpochStats& stats, const ModelParamsT<S>& p) {
        csv += detail::metrics_csv_row(stats);
        nlohmann::json row{{"epoch", stats.epoch}, {"train_loss", stats.mean_train_loss}};
        if (stats.metrics) row["metrics"] = detail::metrics_to_json(*stats.metrics);
        jsonl += row.dump() + "\n";

        char name[64];
        std::snprintf(name, sizeof(name), "ckpt_epoch_%03d.bin", stats.epoch);
        save_checkpoint(run_dir / name, model_cfg, p, stats.epoch);
        last_epoch = stats.epoch;

        std::cout << "epoch " << stats.epoch << " loss " << detail::fmt_fixed(stats.mean_train_loss);
        if (stats.metrics) {
            std::cout << " ndcg5 " << detail::fmt_fixed(stats.metrics->ndcg5) << " hr10 "
                      << detail::fmt_fixed(stats.metrics->hr10);
        }
        std::cout << " (" << detail::fmt_compact(stats.seconds) << "s)" << std::endl;
    };

    TrainResult result = train(params, model_cfg, train_cfg, split, ctx, sink);

    RunOutcome outcome;
    outcome.run_dir = run_dir;
    outcome.epochs = result.epochs;
    if (!result.epochs.empty() && result.epochs.back().metrics) {
        outcome.final_metrics = *result.epochs.back().metrics;
    } else {
        outcome.final_metrics = evaluate(params, model_cfg, std::span<const RawInstance>(split.test),
                                         ctx, train_cfg.seed, train_cfg.eval_negatives);
    }

    detail::write_text_file(run_dir / "metrics.csv", csv);
    detail::write_text_file(run_dir / "epochs.jsonl", jsonl);

    outcome.final_checkpoint = run_dir / "ckpt_final.bin";
    save_checkpoint(outcome.final_checkpoint.string(), model_cfg, params, last_epoch);

    nlohmann::json report{{"epochs", train_cfg.epochs},
                          {"train_instances", split.train.size()},
                          {"test_instances", split.test.size()},
                          {"final_metrics", detail::metrics_to_json(outcome.final_metrics)}};
    detail::write_text_file(run_dir / "final_report.json", report.dump(2) + "\n");
    return outcome;
}

inline RunOutcome run_training(const RunConfig& cfg) {
    if (cfg.precision == "f32") return run_training_impl<float>(cfg);
    return run_training_impl<double>(cfg);
}

// Evaluates a checkpoint against a cached dataset under the 1:99 protocol.
// Writes a structured report and a CSV row matching the training-curve
// schema when an output path is given.
template <class S>
MetricsReport run_eval_impl(const std::string& checkpoint_path, const Dataset& dataset,
                            uint64_t seed, int n_negatives) {
    auto [model_cfg, params] = load_checkpoint<S>(checkpoint_path);
    if (model_cfg.vocab_size != dataset.vocab_size) {
        throw DataError("checkpoint vocab_size " + std::to_string(model_cfg.vocab_size) +
                        " does not match dataset vocab_size " + std::to_string(dataset.vocab_size));
    }
    Split split = split_leave_one_out(dataset);
    EvalContext ctx = EvalContext::from_dataset(dataset);
    return evaluate(params, model_cfg, std::span<const RawInstance>(split.test), ctx, seed,
                    n_negatives);
}

struct EvalOutcome {
    MetricsReport metrics;
    int64_t checkpoint_epoch = 0;
};

inline EvalOutcome run_eval(const std::string& checkpoint_path, const std::string& cache_path,
                            uint64_t seed, const std::string& out_path = {}, int n_negatives = 99) {
    Dataset dataset = read_dataset_cache(cache_path);
    CheckpointInfo info = peek_checkpoint(checkpoint_path);
    EvalOutcome outcome;
    outcome.checkpoint_epoch = info.epoch;
    outcome.metrics = info.scalar_width == 4
                          ? run_eval_impl<float>(checkpoint_path, dataset, seed, n_negatives)
                          : run_eval_impl<double>(checkpoint_path, dataset, seed, n_negatives);

    if (!out_path.empty()) {
        nlohmann::json report{{"checkpoint", checkpoint_path},
                              {"seed", seed},
                              {"negatives", n_negatives},
                              {"metrics", detail::metrics_to_json(outcome.metrics)}};
        detail::write_text_file(out_path, report.dump(2) + "\n");
        EpochStats row;
        row.epoch = static_cast<int>(outcome.checkpoint_epoch);
        row.metrics = outcome.metrics;
        detail::write_text_file(out_path + ".csv",
                                detail::metrics_csv_header() + detail::metrics_csv_row(row));
    }
    return outcome;
}

struct GridCell {
    double initializer_range = 0.0;
    int64_t mini_batch_size = 0;
    bool ok = false;
    bool skipped = false;  // already complete before this invocation
    MetricsReport metrics;
    std::string error;
};

struct GridOutcome {
    std::vector<GridCell> cells;
    std::filesystem::path results_csv;
    size_t failures = 0;
};

inline std::string grid_cell_dir_name(double sigma, int64_t b) {
    return "sigma" + detail::fmt_compact(sigma) + "_mb" + std::to_string(b);
}

// Runs one train+eval per grid cell, skipping cells whose run directory
// already holds a final report, and records per-cell failures without
// aborting the grid.
inline GridOutcome run_grid(const GridSpec& spec, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    GridOutcome outcome;

    for (double sigma : spec.initializer_range) {
        for (int64_t b : spec.mini_batch_size) {
            GridCell cell;
            cell.initializer_range = sigma;
            cell.mini_batch_size = b;
            const fs::path cell_dir = fs::path(out_dir) / grid_cell_dir_name(sigma, b);
            const fs::path marker = cell_dir / "final_report.json";
            try {
                if (fs::exists(marker)) {
                    std::ifstream is(marker);
                    nlohmann::json j = nlohmann::json::parse(is);
                    const auto& m = j.at("final_metrics");
                    cell.metrics.ndcg5 = m.at("ndcg5").get<double>();
                    cell.metrics.ndcg10 = m.at("ndcg10").get<double>();
                    cell.metrics.hr5 = m.at("hr5").get<double>();
                    cell.metrics.hr10 = m.at("hr10").get<double>();
                    cell.metrics.count = m.at("count").get<int64_t>();
                    cell.ok = true;
                    cell.skipped = true;
                } else {
                    RunConfig cfg = spec.base;
                    cfg.initializer_range = sigma;
                    cfg.mini_batch_size = b;
                    cfg.out_dir = cell_dir.string();
                    RunOutcome run = run_training(cfg);
                    cell.metrics = run.final_metrics;
                    cell.ok = true;
                }
            } catch (const std::exception& e) {
                cell.ok = false;
                cell.error = e.what();
                ++outcome.failures;
            }
            outcome.cells.push_back(std::move(cell));
        }
    }

    std::string csv = "initializer_range,mini_batch_size,ndcg5,ndcg10,hr5,hr10\n";
    std::string failures;
    for (const GridCell& c : outcome.cells) {
        if (c.ok) {
            csv += detail::fmt_compact(c.initializer_range) + "," + std::to_string(c.mini_batch_size) +
                   "," + detail::fmt_fixed(c.metrics.ndcg5) + "," + detail::fmt_fixed(c.metrics.ndcg10) +
                   "," + detail::fmt_fixed(c.metrics.hr5) + "," + detail::fmt_fixed(c.metrics.hr10) + "\n";
        } else {
            std::string one_line = c.error;
            for (char& ch : one_line) {
                if (ch == '\n' || ch == ',') ch = ' ';
            }
            failures += detail::fmt_compact(c.initializer_range) + "," +
                        std::to_string(c.mini_batch_size) + "," + one_line + "\n";
        }
    }
    outcome.results_csv = std::filesystem::path(out_dir) / "grid_results.csv";
    detail::write_text_file(outcome.results_csv, csv);
    if (!failures.empty()) {
        detail::write_text_file(std::filesystem::path(out_dir) / "failures.csv",
                                "initializer_range,mini_batch_size,error\n" + failures);
    }
    return outcome;
}

// Parses an interaction log, builds filtered chronological sequences, and
// writes the dataset cache. Returns a printable summary.
struct IngestSummary {
    size_t users = 0;
    int32_t items = 0;
    size_t interactions = 0;
    size_t malformed_lines = 0;
    double density = 0.0;
};

inline IngestSummary run_ingest(const std::string& format, const std::string& input_path,
                                const std::string& output_path, int min_interactions,
                                int64_t max_seq_len) {
    InteractionLog log;
    if (format == "movielens") {
        log = parse_movielens(input_path);
    } else if (format == "amazon") {
        log = parse_amazon(input_path);
    } else {
        throw ConfigError("ingest format must be 'movielens' or 'amazon', got '" + format + "'");
    }
    if (max_seq_len <= 0) max_seq_len = format == "movielens" ? 200 : 50;
    Dataset dataset = build_sequences(log, min_interactions, max_seq_len);
    write_dataset_cache(output_path, dataset);

    IngestSummary s;
    s.users = dataset.users.size();
    s.items = dataset.vocab_size;
    s.malformed_lines = log.malformed_lines;
    for (const auto& u : dataset.users) s.interactions += u.events.size();
    s.density = s.users && s.items
                    ? static_cast<double>(s.interactions) /
                          (static_cast<double>(s.users) * static_cast<double>(s.items))
                    : 0.0;
    return s;
}

}  // namespace ttt4rec
