#pragma once

#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "ttt4rec/error.hpp"
#include "ttt4rec/rng.hpp"

namespace ttt4rec {

// One parsed interaction with densified ids. Dense ids start at 1; id 0 is
// reserved for the padding token and never assigned to a real user or item.
struct InteractionRecord {
    int32_t user = 0;
    int32_t item = 0;
    double rating = 0.0;
    int64_t timestamp = 0;
    int64_t file_order = 0;  // tie-breaker for equal timestamps
};

struct InteractionLog {
    std::vector<InteractionRecord> records;
    int32_t n_users = 0;
    int32_t n_items = 0;
    size_t total_lines = 0;
    size_t malformed_lines = 0;
    std::vector<std::string> malformed_samples;  // "line N: <content>", capped
};

// MovieLens-1M ratings: lines of `UserID::MovieID::Rating::Timestamp`.
InteractionLog parse_movielens(const std::string& path);

// Amazon ratings-only CSV: lines of `user,item,rating,timestamp`.
InteractionLog parse_amazon(const std::string& path);

// Per-user chronological (item, timestamp) events after filtering; the
// intermediate form the dataset cache stores.
struct UserEvents {
    int32_t user = 0;
    std::vector<std::pair<int32_t, int64_t>> events;  // sorted by (ts, file order)
};

struct Dataset {
    std::vector<UserEvents> users;  // sorted by dense user id
    int32_t vocab_size = 0;
    int64_t max_seq_len = 0;

    std::vector<int32_t> items_of(size_t user_index) const {
        std::vector<int32_t> out;
        out.reserve(users[user_index].events.size());
        for (const auto& [item, ts] : users[user_index].events) out.push_back(item);
        return out;
    }
};

// Drops users with fewer than min_interactions records, sorts each user's
// items by (timestamp, file order), and fixes the padded window length N.
Dataset build_sequences(const InteractionLog& log, int min_interactions, int64_t max_seq_len);

// Structured-text dataset cache, one user per record, with a version header.
void write_dataset_cache(const std::string& path, const Dataset& dataset);
Dataset read_dataset_cache(const std::string& path);

// A split instance before padding: the raw history and the target item.
struct RawInstance {
    int32_t user = 0;
    std::vector<int32_t> history;
    int32_t positive = 0;
};

// Which positions of each training sequence become training targets.
enum class TrainTargets {
    FinalOnly,    // one instance per user: the item before the held-out one
    AllPrefixes,  // every position after the first, excluding the held-out one
    LastK,        // the most recent `last_k` positions, excluding the held-out one
};

struct SplitOptions {
    TrainTargets targets = TrainTargets::FinalOnly;
    int last_k = 8;
};

struct Split {
    std::vector<RawInstance> train;
    std::vector<RawInstance> test;
};

// Leave-one-out: per user the chronologically last item is the test
// positive; training targets never include it.
Split split_leave_one_out(const Dataset& dataset, const SplitOptions& options = {});

// Samples k distinct items uniformly from {1..vocab_size} \ excluded.
// `excluded` must already contain the positive item.
std::vector<int32_t> sample_negatives(const std::unordered_set<int32_t>& excluded, int k,
                                      int32_t vocab_size, RngStream& rng);

// Full per-user item sets, used to exclude a user's entire history from
// negative sampling.
std::vector<std::unordered_set<int32_t>> user_item_sets(const Dataset& dataset);

// Planted-pattern interaction log for learning-sanity checks: each user
// clicks a run of consecutive items, so the next item is always the
// successor of the last one (wrapping at vocab_size).
InteractionLog synthetic_successor_log(int32_t n_users, int32_t n_items, int min_len, int max_len,
                                       uint64_t seed);

// Left-pads (or truncates to the most recent max_seq_len items) a history
// into a fixed-length model input window.
std::vector<int32_t> pad_history(const std::vector<int32_t>& history, int64_t max_seq_len);

}  // namespace ttt4rec
