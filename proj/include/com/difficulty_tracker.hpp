#pragma once

#include <cmath>
#include <cstddef>
#include <mutex>
#include <ostream>
#include <string>
#include <vector>

#include "com/error.hpp"
#include "com/text.hpp"

namespace com {

/// Per-group scores s_g. Scores are difficulties (score - tau): larger is easier.
struct GroupScores {
    std::vector<double> values;
    int epoch = 0;  // epoch of the last end_epoch, 0 before any

    std::size_t size() const noexcept { return values.size(); }
    friend bool operator==(const GroupScores&, const GroupScores&) = default;
};

/// Common starting score, so the first epoch samples every object alike.
inline GroupScores init_scores(int group_total) {
    if (group_total < 1) throw ValidationError("group count must be >= 1");
    return {std::vector<double>(static_cast<std::size_t>(group_total), 0.0), 0};
}

/// Difficulty observations of augmented objects, per group, for one epoch.
/// record() is safe to call from several threads; end_epoch() is not.
class ScorePool {
public:
    explicit ScorePool(int group_total) : pools_(static_cast<std::size_t>(group_total)) {
        if (group_total < 1) throw ValidationError("group count must be >= 1");
    }

    ScorePool(const ScorePool& other) : pools_(other.pools_) {}
    ScorePool& operator=(const ScorePool& other) {
        pools_ = other.pools_;
        return *this;
    }

    void record(int group, double difficulty_value) {
        if (group < 0 || static_cast<std::size_t>(group) >= pools_.size())
            throw ValidationError("group " + std::to_string(group) + " out of range [0, " +
                                  std::to_string(pools_.size()) + ")");
        if (!std::isfinite(difficulty_value)) throw ValidationError("non-finite difficulty");
        std::lock_guard lock(mutex_);
        pools_[static_cast<std::size_t>(group)].push_back(difficulty_value);
    }

    const std::vector<double>& pool(int group) const { return pools_.at(static_cast<std::size_t>(group)); }
    std::size_t pool_size(int group) const { return pool(group).size(); }
    int group_total() const noexcept { return static_cast<int>(pools_.size()); }

    void clear() {
        for (auto& p : pools_) p.clear();
    }

private:
    std::vector<std::vector<double>> pools_;
    std::mutex mutex_;
};

/// Compensated (Neumaier) mean.
inline double pool_mean(const std::vector<double>& xs) {
    double sum = 0.0;
    double comp = 0.0;
    for (double x : xs) {
        const double t = sum + x;
        if (std::abs(sum) >= std::abs(x)) comp += (sum - t) + x;
        else comp += (x - t) + sum;
        sum = t;
    }
    return (sum + comp) / static_cast<double>(xs.size());
}

/// Non-empty pools replace their group's score with the pool mean; empty ones
/// keep the previous score. All pools are cleared.
inline GroupScores end_epoch(ScorePool& pool, GroupScores scores) {
    if (static_cast<int>(scores.size()) != pool.group_total()) throw ValidationError("score/pool group count mismatch");
    for (int g = 0; g < pool.group_total(); ++g) {
        const auto& p = pool.pool(g);
        if (!p.empty()) scores.values[static_cast<std::size_t>(g)] = pool_mean(p);
    }
    scores.epoch += 1;
    pool.clear();
    return scores;
}

/// One line per group: `epoch group s_g pool_size`. Call before end_epoch to
/// log the pool sizes that fed the update.
inline void dump_scores(std::ostream& out, const GroupScores& scores, const ScorePool* pool = nullptr,
                        int epoch_label = -1) {
    const int e = epoch_label >= 0 ? epoch_label : scores.epoch;
    for (std::size_t g = 0; g < scores.size(); ++g) {
        out << e << ' ' << g << ' ' << format_double(scores.values[g]) << ' '
            << (pool ? pool->pool_size(static_cast<int>(g)) : 0) << '\n';
    }
}

/// Reads a score log and returns the scores of its latest epoch.
inline GroupScores parse_scores(std::istream& in, int group_total) {
    GroupScores out = init_scores(group_total);
    int latest = -1;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty() || trim(line).front() == '#') continue;
        const auto parts = split(trim(line), ' ');
        if (parts.size() != 4) throw ValidationError("score log: malformed line '" + line + "'");
        const int epoch = static_cast<int>(parse_int<ValidationError>(parts[0], "epoch"));
        const auto g = parse_int<ValidationError>(parts[1], "group");
        const double s = parse_double<ValidationError>(parts[2], "score");
        if (g < 0 || g >= group_total) throw ValidationError("score log: group out of range");
        if (epoch > latest) {
            latest = epoch;
            out = init_scores(group_total);
            out.epoch = epoch;
        }
        if (epoch == latest) out.values[static_cast<std::size_t>(g)] = s;
    }
    return out;
}

}  // namespace com
