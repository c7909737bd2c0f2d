#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <unordered_set>
#include <vector>

#include "ttt4rec/data.hpp"
#include "ttt4rec/error.hpp"
#include "ttt4rec/model.hpp"

namespace ttt4rec {

struct RankingResult {
    int64_t instance = 0;
    int rank = 0;  // 1-based rank of the positive among all candidates
};

struct MetricsReport {
    double ndcg5 = 0.0;
    double ndcg10 = 0.0;
    double hr5 = 0.0;
    double hr10 = 0.0;
    int64_t count = 0;
};

// Single-relevant-item NDCG: 1/log2(rank+1) inside the cutoff, else 0.
inline double ndcg_at_k(int rank, int k) {
    if (rank < 1 || k < 1) throw Error("ndcg_at_k: rank and K must be >= 1");
    if (rank > k) return 0.0;
    return 1.0 / std::log2(static_cast<double>(rank) + 1.0);
}

inline double hr_at_k(int rank, int k) {
    if (rank < 1 || k < 1) throw Error("hr_at_k: rank and K must be >= 1");
    return rank <= k ? 1.0 : 0.0;
}

// Scores the positive and the sampled negatives against one shared F_s and
// ranks the positive pessimistically: tied negatives count against it.
template <class S>
RankingResult rank_candidates(const ModelParamsT<S>& params, const ModelConfig& cfg,
                              std::span<const int32_t> history, int32_t positive,
                              std::span<const int32_t> negatives, int64_t instance_id = 0) {
    std::unordered_set<int32_t> seen;
    seen.insert(positive);
    for (int32_t n : negatives) {
        if (!seen.insert(n).second) {
            throw DataError("rank_candidates: duplicate candidate " + std::to_string(n));
        }
    }

    TraceT<S> trace;
    BoundModelT<S> m = bind_model(trace, params);
    std::vector<int32_t> window = pad_history(std::vector<int32_t>(history.begin(), history.end()),
                                              cfg.max_seq_len);
    VarT<S> f_s = sequence_features_for(m, cfg, window);

    auto score_of = [&](int32_t candidate) {
        return static_cast<double>(score(f_s, target_tower(m, candidate)).value()[0]);
    };
    const double positive_score = score_of(positive);
    int rank = 1;
    for (int32_t n : negatives) {
        if (score_of(n) >= positive_score) ++rank;
    }
    return {instance_id, rank};
}

// Per-user exclusion sets and vocabulary for negative sampling at
// evaluation time.
struct EvalContext {
    int32_t vocab_size = 0;
    std::vector<std::unordered_set<int32_t>> excluded_by_user;  // indexed by dense user id

    static EvalContext from_dataset(const Dataset& dataset) {
        EvalContext ctx;
        ctx.vocab_size = dataset.vocab_size;
        int32_t max_user = 0;
        for (const auto& u : dataset.users) max_user = std::max(max_user, u.user);
        ctx.excluded_by_user.resize(static_cast<size_t>(max_user) + 1);
        for (const auto& u : dataset.users) {
            auto& set = ctx.excluded_by_user[static_cast<size_t>(u.user)];
            for (const auto& [item, ts] : u.events) set.insert(item);
        }
        return ctx;
    }

    const std::unordered_set<int32_t>& excluded_for(int32_t user) const {
        return excluded_by_user[static_cast<size_t>(user)];
    }
};

inline constexpr uint64_t kEvalNegativeTag = 0xE7A1;

// Ranks every test instance against `n_negatives` sampled negatives and
// averages the four ranking metrics. Negatives are fixed per
// (seed, user, instance index), so runs with the same seed are comparable
// epoch over epoch.
template <class S>
MetricsReport evaluate(const ModelParamsT<S>& params, const ModelConfig& cfg,
                       std::span<const RawInstance> test, const EvalContext& ctx, uint64_t seed,
                       int n_negatives = 99) {
    if (test.empty()) throw Error("evaluate: empty test set");
    MetricsReport report;
    for (size_t i = 0; i < test.size(); ++i) {
        const RawInstance& inst = test[i];
        RngStream rng(derive_seed(
            {seed, kEvalNegativeTag, static_cast<uint64_t>(inst.user), static_cast<uint64_t>(i)}));
        std::unordered_set<int32_t> excluded = ctx.excluded_for(inst.user);
        excluded.insert(inst.positive);
        auto negatives = sample_negatives(excluded, n_negatives, ctx.vocab_size, rng);
        RankingResult r = rank_candidates(params, cfg, inst.history, inst.positive, negatives,
                                          static_cast<int64_t>(i));
        report.ndcg5 += ndcg_at_k(r.rank, 5);
        report.ndcg10 += ndcg_at_k(r.rank, 10);
        report.hr5 += hr_at_k(r.rank, 5);
        report.hr10 += hr_at_k(r.rank, 10);
        ++report.count;
    }
    const double n = static_cast<double>(report.count);
    report.ndcg5 /= n;
    report.ndcg10 /= n;
    report.hr5 /= n;
    report.hr10 /= n;
    return report;
}

}  // namespace ttt4rec
