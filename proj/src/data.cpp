#include "ttt4rec/data.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string_view>
#include <unordered_map>

namespace ttt4rec {

namespace {

constexpr size_t kMaxMalformedSamples = 5;

struct IdMap {
    std::unordered_map<std::string, int32_t> dense;
    int32_t next = 1;

    int32_t get(const std::string& original) {
        auto [it, inserted] = dense.emplace(original, next);
        if (inserted) ++next;
        return it->second;
    }
};

bool parse_int64(std::string_view s, int64_t& out) {
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_double(std::string_view s, double& out) {
    if (s.empty()) return false;
    // from_chars for double is unreliable pre-libstdc++12; go through strtod.
    std::string tmp(s);
    char* end = nullptr;
    out = std::strtod(tmp.c_str(), &end);
    return end == tmp.c_str() + tmp.size();
}

std::vector<std::string_view> split_by(std::string_view line, std::string_view sep) {
    std::vector<std::string_view> parts;
    size_t pos = 0;
    while (true) {
        size_t next = line.find(sep, pos);
        if (next == std::string_view::npos) {
            parts.push_back(line.substr(pos));
            break;
        }
        parts.push_back(line.substr(pos, next - pos));
        pos = next + sep.size();
    }
    return parts;
}

InteractionLog parse_delimited(const std::string& path, std::string_view sep) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open interaction log: " + path);

    InteractionLog log;
    IdMap users, items;
    std::string line;
    size_t line_no = 0;
    auto reject = [&](const std::string& content) {
        ++log.malformed_lines;
        if (log.malformed_samples.size() < kMaxMalformedSamples) {
            log.malformed_samples.push_back("line " + std::to_string(line_no) + ": " + content);
        }
    };

    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) {
            reject(line);
            continue;
        }
        auto parts = split_by(line, sep);
        int64_t ts = 0;
        double rating = 0.0;
        if (parts.size() != 4 || parts[0].empty() || parts[1].empty() ||
            !parse_double(parts[2], rating) || !parse_int64(parts[3], ts)) {
            reject(line);
            continue;
        }
        InteractionRecord rec;
        rec.user = users.get(std::string(parts[0]));
        rec.item = items.get(std::string(parts[1]));
        rec.rating = rating;
        rec.timestamp = ts;
        rec.file_order = static_cast<int64_t>(log.records.size());
        log.records.push_back(rec);
    }
    log.total_lines = line_no;
    log.n_users = users.next - 1;
    log.n_items = items.next - 1;

    if (log.total_lines == 0) throw DataError("interaction log is empty: " + path);
    if (log.malformed_lines * 100 > log.total_lines) {
        std::ostringstream os;
        os << "interaction log " << path << ": " << log.malformed_lines << " of " << log.total_lines
           << " lines malformed (>1%); samples:";
        for (const auto& s : log.malformed_samples) os << "\n  " << s;
        throw DataError(os.str());
    }
    if (log.records.empty()) throw DataError("interaction log has no valid records: " + path);
    return log;
}

}  // namespace

InteractionLog parse_movielens(const std::string& path) { return parse_delimited(path, "::"); }

InteractionLog parse_amazon(const std::string& path) { return parse_delimited(path, ","); }

Dataset build_sequences(const InteractionLog& log, int min_interactions, int64_t max_seq_len) {
    if (max_seq_len < 2) throw ConfigError("build_sequences: max_seq_len must be >= 2");

    std::vector<std::vector<const InteractionRecord*>> per_user(static_cast<size_t>(log.n_users) + 1);
    for (const auto& rec : log.records) per_user[static_cast<size_t>(rec.user)].push_back(&rec);

    Dataset ds;
    ds.vocab_size = log.n_items;
    ds.max_seq_len = max_seq_len;
    for (int32_t u = 1; u <= log.n_users; ++u) {
        auto& recs = per_user[static_cast<size_t>(u)];
        if (recs.size() < static_cast<size_t>(min_interactions)) continue;
        std::sort(recs.begin(), recs.end(), [](const InteractionRecord* a, const InteractionRecord* b) {
            if (a->timestamp != b->timestamp) return a->timestamp < b->timestamp;
            return a->file_order < b->file_order;
        });
        UserEvents ue;
        ue.user = u;
        ue.events.reserve(recs.size());
        for (const auto* r : recs) ue.events.emplace_back(r->item, r->timestamp);
        ds.users.push_back(std::move(ue));
    }
    if (ds.users.empty()) {
        throw DataError("build_sequences: no users left after filtering (min_interactions=" +
                        std::to_string(min_interactions) + ")");
    }
    return ds;
}

void write_dataset_cache(const std::string& path, const Dataset& dataset) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw DataError("cannot open dataset cache for writing: " + path);
    os << "ttt4rec-cache v1\n";
    os << "vocab_size " << dataset.vocab_size << '\n';
    os << "max_seq_len " << dataset.max_seq_len << '\n';
    os << "users " << dataset.users.size() << '\n';
    for (const auto& u : dataset.users) {
        os << u.user << ' ' << u.events.size();
        for (const auto& [item, ts] : u.events) os << ' ' << item << ':' << ts;
        os << '\n';
    }
    if (!os) throw DataError("failed writing dataset cache: " + path);
}

Dataset read_dataset_cache(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open dataset cache: " + path);
    std::string header;
    if (!std::getline(is, header) || header != "ttt4rec-cache v1") {
        throw DataError("dataset cache " + path + " has an unknown header: '" + header + "'");
    }
    Dataset ds;
    std::string key;
    size_t n_users = 0;
    is >> key >> ds.vocab_size;
    if (key != "vocab_size") throw DataError("dataset cache: expected vocab_size, got " + key);
    is >> key >> ds.max_seq_len;
    if (key != "max_seq_len") throw DataError("dataset cache: expected max_seq_len, got " + key);
    is >> key >> n_users;
    if (key != "users") throw DataError("dataset cache: expected users, got " + key);

    ds.users.reserve(n_users);
    for (size_t i = 0; i < n_users; ++i) {
        UserEvents ue;
        size_t n_events = 0;
        if (!(is >> ue.user >> n_events)) throw DataError("dataset cache: truncated user record");
        ue.events.reserve(n_events);
        for (size_t e = 0; e < n_events; ++e) {
            int32_t item = 0;
            int64_t ts = 0;
            char colon = 0;
            if (!(is >> item >> colon >> ts) || colon != ':') {
                throw DataError("dataset cache: malformed event in user record " +
                                std::to_string(ue.user));
            }
            ue.events.emplace_back(item, ts);
        }
        ds.users.push_back(std::move(ue));
    }
    if (ds.users.empty()) throw DataError("dataset cache has no users: " + path);
    return ds;
}

Split split_leave_one_out(const Dataset& dataset, const SplitOptions& options) {
    Split split;
    for (const auto& u : dataset.users) {
        std::vector<int32_t> items;
        items.reserve(u.events.size());
        for (const auto& [item, ts] : u.events) items.push_back(item);
        if (items.size() < 2) {
            throw DataError("split_leave_one_out: user " + std::to_string(u.user) +
                            " has fewer than 2 interactions");
        }
        const size_t last = items.size() - 1;
        RawInstance test;
        test.user = u.user;
        test.history.assign(items.begin(), items.begin() + static_cast<int64_t>(last));
        test.positive = items[last];
        split.test.push_back(std::move(test));

        // Training targets come from positions before the held-out item.
        size_t first_target = 1;
        switch (options.targets) {
            case TrainTargets::FinalOnly:
                first_target = last >= 1 ? last - 1 : 0;
                break;
            case TrainTargets::AllPrefixes:
                first_target = 0;
                break;
            case TrainTargets::LastK: {
                const size_t k = static_cast<size_t>(std::max(1, options.last_k));
                first_target = last > k ? last - k : 0;
                break;
            }
        }
        for (size_t pos = first_target; pos < last; ++pos) {
            RawInstance train;
            train.user = u.user;
            train.history.assign(items.begin(), items.begin() + static_cast<int64_t>(pos));
            train.positive = items[pos];
            split.train.push_back(std::move(train));
        }
    }
    return split;
}

std::vector<int32_t> sample_negatives(const std::unordered_set<int32_t>& excluded, int k,
                                      int32_t vocab_size, RngStream& rng) {
    int64_t excluded_in_vocab = 0;
    for (int32_t id : excluded) {
        if (id >= 1 && id <= vocab_size) ++excluded_in_vocab;
    }
    const int64_t pool = static_cast<int64_t>(vocab_size) - excluded_in_vocab;
    if (pool < k) {
        throw DataError("sample_negatives: candidate pool has " + std::to_string(pool) +
                        " items, need " + std::to_string(k));
    }
    std::vector<int32_t> out;
    out.reserve(static_cast<size_t>(k));
    std::unordered_set<int32_t> taken;
    while (out.size() < static_cast<size_t>(k)) {
        int32_t candidate = static_cast<int32_t>(rng.uniform_below(static_cast<uint64_t>(vocab_size))) + 1;
        if (excluded.count(candidate) || taken.count(candidate)) continue;
        taken.insert(candidate);
        out.push_back(candidate);
    }
    return out;
}

std::vector<std::unordered_set<int32_t>> user_item_sets(const Dataset& dataset) {
    std::vector<std::unordered_set<int32_t>> sets(dataset.users.size());
    for (size_t i = 0; i < dataset.users.size(); ++i) {
        for (const auto& [item, ts] : dataset.users[i].events) sets[i].insert(item);
    }
    return sets;
}

InteractionLog synthetic_successor_log(int32_t n_users, int32_t n_items, int min_len, int max_len,
                                       uint64_t seed) {
    if (n_items < 2 || n_users < 1 || min_len < 2 || max_len < min_len) {
        throw ConfigError("synthetic_successor_log: invalid sizes");
    }
    InteractionLog log;
    log.n_users = n_users;
    log.n_items = n_items;
    for (int32_t u = 1; u <= n_users; ++u) {
        RngStream rng(derive_seed({seed, 0x5EED, static_cast<uint64_t>(u)}));
        const int len = min_len + static_cast<int>(rng.uniform_below(
                                      static_cast<uint64_t>(max_len - min_len + 1)));
        const int32_t start = static_cast<int32_t>(rng.uniform_below(static_cast<uint64_t>(n_items)));
        for (int j = 0; j < len; ++j) {
            InteractionRecord rec;
            rec.user = u;
            rec.item = (start + j) % n_items + 1;
            rec.rating = 1.0;
            rec.timestamp = j;
            rec.file_order = static_cast<int64_t>(log.records.size());
            log.records.push_back(rec);
        }
    }
    log.total_lines = log.records.size();
    return log;
}

std::vector<int32_t> pad_history(const std::vector<int32_t>& history, int64_t max_seq_len) {
    std::vector<int32_t> out(static_cast<size_t>(max_seq_len), 0);
    const size_t n = std::min(history.size(), static_cast<size_t>(max_seq_len));
    for (size_t i = 0; i < n; ++i) {
        out[static_cast<size_t>(max_seq_len) - n + i] = history[history.size() - n + i];
    }
    return out;
}

}  // namespace ttt4rec
