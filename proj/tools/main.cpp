// Command-line entry point: ingest interaction logs, train TTT4Rec models,
// evaluate checkpoints, and run hyperparameter grids.

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ttt4rec/config.hpp"
#include "ttt4rec/runner.hpp"

namespace {

struct TrainArgs {
    std::string config_path;
    ttt4rec::CliOverrides overrides;
};

void add_override_flags(CLI::App* cmd, ttt4rec::CliOverrides& o) {
    cmd->add_option("--seed", o.seed, "Global RNG seed");
    cmd->add_option("--epochs", o.epochs, "Training epochs");
    cmd->add_option("--lr", o.lr, "Outer-loop learning rate");
    cmd->add_option("--inner-lr", o.inner_lr, "TTT inner-loop learning rate (eta)");
    cmd->add_option("--mini-batch-size", o.mini_batch_size, "TTT mini-batch size (tokens)");
    cmd->add_option("--initializer-range", o.initializer_range, "TTT parameter init std-dev");
    cmd->add_option("--embed-dim", o.embed_dim, "Embedding width K");
    cmd->add_option("--max-seq-len", o.max_seq_len, "History window length N");
    cmd->add_option("--out", o.out, "Output (run) directory");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"TTT4Rec: sequential recommendation with a TTT-Linear feature extractor"};
    app.require_subcommand(1);

    // ingest
    std::string ingest_format, ingest_input, ingest_output;
    int ingest_min_interactions = 5;
    int64_t ingest_max_seq_len = 0;
    CLI::App* ingest = app.add_subcommand("ingest", "Parse an interaction log into a dataset cache");
    ingest->add_option("--format", ingest_format, "Input format: movielens | amazon")->required();
    ingest->add_option("--input", ingest_input, "Path to the raw interaction log")->required();
    ingest->add_option("--output", ingest_output, "Path for the dataset cache")->required();
    ingest->add_option("--min-interactions", ingest_min_interactions,
                       "Drop users with fewer interactions (default 5)");
    ingest->add_option("--max-seq-len", ingest_max_seq_len,
                       "Default history window (0 = per-format default)");

    // train
    TrainArgs train_args;
    CLI::App* train = app.add_subcommand("train", "Train a model from a config file");
    train->add_option("--config", train_args.config_path, "Run config JSON");
    add_override_flags(train, train_args.overrides);

    // eval
    std::string eval_checkpoint, eval_cache, eval_out;
    uint64_t eval_seed = 42;
    CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset cache");
    eval_cmd->add_option("--checkpoint", eval_checkpoint, "Checkpoint path")->required();
    eval_cmd->add_option("--dataset", eval_cache, "Dataset cache path")->required();
    eval_cmd->add_option("--seed", eval_seed, "Seed for evaluation negative sampling");
    eval_cmd->add_option("--out", eval_out, "Write the report to this path (plus .csv row)");

    // grid
    std::string grid_spec_path, grid_out;
    CLI::App* grid = app.add_subcommand("grid", "Run a hyperparameter grid search");
    grid->add_option("--spec", grid_spec_path, "Grid spec JSON")->required();
    grid->add_option("--out", grid_out, "Grid output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest) {
            auto summary = ttt4rec::run_ingest(ingest_format, ingest_input, ingest_output,
                                               ingest_min_interactions, ingest_max_seq_len);
            std::cout << "users " << summary.users << "\nitems " << summary.items
                      << "\ninteractions " << summary.interactions << "\nmalformed_lines "
                      << summary.malformed_lines << "\ndensity "
                      << ttt4rec::detail::fmt_compact(summary.density) << "\ncache " << ingest_output
                      << std::endl;
        } else if (*train) {
            ttt4rec::RunConfig cfg = train_args.config_path.empty()
                                         ? ttt4rec::default_run_config()
                                         : ttt4rec::load_run_config(train_args.config_path);
            ttt4rec::apply_overrides(cfg, train_args.overrides);
            auto outcome = ttt4rec::run_training(cfg);
            std::cout << "run_dir " << outcome.run_dir.string() << "\nfinal ndcg5 "
                      << ttt4rec::detail::fmt_fixed(outcome.final_metrics.ndcg5) << " ndcg10 "
                      << ttt4rec::detail::fmt_fixed(outcome.final_metrics.ndcg10) << " hr5 "
                      << ttt4rec::detail::fmt_fixed(outcome.final_metrics.hr5) << " hr10 "
                      << ttt4rec::detail::fmt_fixed(outcome.final_metrics.hr10) << std::endl;
        } else if (*eval_cmd) {
            auto outcome = ttt4rec::run_eval(eval_checkpoint, eval_cache, eval_seed, eval_out);
            std::cout << "ndcg5 " << ttt4rec::detail::fmt_fixed(outcome.metrics.ndcg5) << "\nndcg10 "
                      << ttt4rec::detail::fmt_fixed(outcome.metrics.ndcg10) << "\nhr5 "
                      << ttt4rec::detail::fmt_fixed(outcome.metrics.hr5) << "\nhr10 "
                      << ttt4rec::detail::fmt_fixed(outcome.metrics.hr10) << "\ncount "
                      << outcome.metrics.count << std::endl;
        } else if (*grid) {
            ttt4rec::GridSpec spec = ttt4rec::load_grid_spec(grid_spec_path);
            auto outcome = ttt4rec::run_grid(spec, grid_out);
            size_t ok = 0, skipped = 0;
            for (const auto& c : outcome.cells) {
                ok += c.ok ? 1 : 0;
                skipped += c.skipped ? 1 : 0;
            }
            std::cout << "cells " << outcome.cells.size() << " ok " << ok << " skipped " << skipped
                      << " failed " << outcome.failures << "\nresults " << outcome.results_csv.string()
                      << std::endl;
            if (outcome.failures > 0) return 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    return 0;
}
