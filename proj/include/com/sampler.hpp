#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "com/clustering.hpp"
#include "com/difficulty_tracker.hpp"
#include "com/error.hpp"
#include "com/rng.hpp"

namespace com {

enum class CurriculumMode { curriculum, anti_curriculum, uniform };

inline std::string_view mode_name(CurriculumMode m) {
    switch (m) {
        case CurriculumMode::curriculum: return "curriculum";
        case CurriculumMode::anti_curriculum: return "anti_curriculum";
        case CurriculumMode::uniform: return "uniform";
    }
    return "unknown";
}

inline CurriculumMode parse_mode(std::string_view s) {
    for (auto m : {CurriculumMode::curriculum, CurriculumMode::anti_curriculum, CurriculumMode::uniform})
        if (mode_name(m) == s) return m;
    if (s == "anti") return CurriculumMode::anti_curriculum;
    throw ConfigError("unknown sampling mode '" + std::string(s) + "'");
}

struct CurriculumState {
    double epoch = 0.0;         // t
    double total_epochs = 30.0; // T
    double lambda = 0.5;        // pacing speed
    double sigma = 0.2;         // width of the sampling curve
    CurriculumMode mode = CurriculumMode::curriculum;

    void validate() const {
        if (!(total_epochs >= 1.0)) throw ConfigError("total epochs must be >= 1");
        if (!(sigma > 0.0)) throw ConfigError("sigma must be positive");
        if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
        if (!(epoch >= 0.0)) throw ConfigError("epoch must be non-negative");
    }
};

/// Group indices from easiest to hardest: scores descending, ties by
/// ascending index. Anti-curriculum reverses the list.
inline std::vector<int> sorted_groups(const GroupScores& scores, CurriculumMode mode) {
    std::vector<int> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return scores.values[static_cast<std::size_t>(a)] > scores.values[static_cast<std::size_t>(b)];
    });
    if (mode == CurriculumMode::anti_curriculum) std::reverse(order.begin(), order.end());
    return order;
}

/// 1-based rank min(floor((lambda * t / T) * G), G), raised to 1 at the start.
inline int curriculum_rank(const CurriculumState& state, int group_total) {
    const double raw = std::floor((state.lambda * state.epoch / state.total_epochs) * group_total);
    const double capped = std::min(raw, static_cast<double>(group_total));
    return std::max(1, static_cast<int>(capped));
}

struct CenterChoice {
    int rank = 1;   // 1-based position in the sorted order
    int group = 0;  // group index at that rank
    double mu = 0.0;
};

inline CenterChoice center(const GroupScores& scores, const CurriculumState& state) {
    if (scores.size() == 0) throw ValidationError("no groups to rank");
    const auto order = sorted_groups(scores, state.mode);
    CenterChoice c;
    c.rank = curriculum_rank(state, static_cast<int>(scores.size()));
    c.group = order[static_cast<std::size_t>(c.rank - 1)];
    c.mu = scores.values[static_cast<std::size_t>(c.group)];
    return c;
}

struct SamplingPlan {
    std::vector<double> curve;          // p_g, unnormalized Gaussian weight
    std::vector<double> probabilities;  // p^g, size-normalized
    std::vector<int> order;             // sorted group order used for the center
    CenterChoice choice;
    CurriculumMode mode = CurriculumMode::curriculum;

    std::size_t size() const noexcept { return probabilities.size(); }
};

/// p_g = exp(-(s_g - mu)^2 / (2 sigma^2)); p^g = p_g n_g / sum_i p_i n_i.
/// Uniform mode sets every p_g to 1, which is plain size-weighted sampling.
inline SamplingPlan plan(const GroupScores& scores, const std::vector<double>& counts, const CurriculumState& state) {
    state.validate();
    if (counts.size() != scores.size()) throw ValidationError("counts and scores differ in group count");
    if (std::none_of(counts.begin(), counts.end(), [](double n) { return n > 0.0; }))
        throw ValidationError("every group is empty; nothing to sample");

    SamplingPlan p;
    p.mode = state.mode;
    p.order = sorted_groups(scores, state.mode);
    p.choice = center(scores, state);
    const std::size_t G = scores.size();
    const double two_sigma_sq = 2.0 * state.sigma * state.sigma;

    std::vector<double> log_curve(G, 0.0);
    p.curve.assign(G, 1.0);
    if (state.mode != CurriculumMode::uniform) {
        for (std::size_t g = 0; g < G; ++g) {
            const double d = scores.values[g] - p.choice.mu;
            log_curve[g] = -(d * d) / two_sigma_sq;
            p.curve[g] = std::exp(log_curve[g]);
        }
    }

    p.probabilities.assign(G, 0.0);
    double total = 0.0;
    for (std::size_t g = 0; g < G; ++g) total += p.curve[g] * counts[g];
    if (std::isnormal(total)) {
        for (std::size_t g = 0; g < G; ++g) p.probabilities[g] = p.curve[g] * counts[g] / total;
    } else {
        // Every populated group sits far out in the tail: renormalize in log space.
        double peak = -std::numeric_limits<double>::infinity();
        for (std::size_t g = 0; g < G; ++g)
            if (counts[g] > 0.0) peak = std::max(peak, log_curve[g] + std::log(counts[g]));
        double sum = 0.0;
        for (std::size_t g = 0; g < G; ++g) {
            if (counts[g] > 0.0) p.probabilities[g] = std::exp(log_curve[g] + std::log(counts[g]) - peak);
            sum += p.probabilities[g];
        }
        for (auto& v : p.probabilities) v /= sum;
    }
    return p;
}

struct SampledObject {
    ObjectId id = 0;
    int group = 0;

    friend bool operator==(const SampledObject&, const SampledObject&) = default;
};

namespace detail {

inline void check_plan_against(const SamplingPlan& p, const GroupRegistry& reg) {
    if (p.size() != static_cast<std::size_t>(reg.G())) throw ValidationError("plan and registry differ in group count");
    for (int g = 0; g < reg.G(); ++g)
        if (p.probabilities[static_cast<std::size_t>(g)] > 0.0 && reg.sampleable[static_cast<std::size_t>(g)].empty())
            throw ValidationError("plan gives probability to group " + std::to_string(g) + " with no sampleable objects");
}

/// Inverse-CDF pick over `weights`; never returns a zero-weight entry.
inline int pick_group(const std::vector<double>& weights, double total, CounterRng& rng) {
    const double u = rng.uniform() * total;
    double acc = 0.0;
    int last_positive = -1;
    for (std::size_t g = 0; g < weights.size(); ++g) {
        if (weights[g] <= 0.0) continue;
        last_positive = static_cast<int>(g);
        acc += weights[g];
        if (u < acc) return last_positive;
    }
    return last_positive;
}

}  // namespace detail

/// k independent draws: a group by p^g, then a uniform sampleable object in it.
inline std::vector<SampledObject> draw(const SamplingPlan& p, const GroupRegistry& reg, CounterRng& rng, std::size_t k) {
    detail::check_plan_against(p, reg);
    std::vector<SampledObject> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        const int g = detail::pick_group(p.probabilities, 1.0, rng);
        const auto& pool = reg.sampleable[static_cast<std::size_t>(g)];
        out.push_back({pool[rng.index(pool.size())], g});
    }
    return out;
}

/// Up to k draws with no object repeated. Groups whose sampleable objects are
/// used up drop out and the remaining probabilities renormalize.
inline std::vector<SampledObject> draw_unique(const SamplingPlan& p, const GroupRegistry& reg, CounterRng& rng,
                                              std::size_t k) {
    detail::check_plan_against(p, reg);
    std::vector<double> weights = p.probabilities;
    double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::unordered_map<int, std::vector<ObjectId>> remaining;
    std::vector<SampledObject> out;
    out.reserve(k);
    while (out.size() < k && total > 0.0) {
        const int g = detail::pick_group(weights, total, rng);
        if (g < 0) break;
        auto it = remaining.find(g);
        if (it == remaining.end()) it = remaining.emplace(g, reg.sampleable[static_cast<std::size_t>(g)]).first;
        auto& pool = it->second;
        const auto j = rng.index(pool.size());
        out.push_back({pool[j], g});
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(j));
        if (pool.empty()) {
            weights[static_cast<std::size_t>(g)] = 0.0;
            total = std::accumulate(weights.begin(), weights.end(), 0.0);
        }
    }
    return out;
}

inline nlohmann::ordered_json plan_to_json(const SamplingPlan& p) {
    nlohmann::ordered_json j;
    j["mode"] = std::string(mode_name(p.mode));
    j["rank"] = p.choice.rank;
    j["center_group"] = p.choice.group;
    j["mu"] = p.choice.mu;
    j["order"] = p.order;
    j["curve"] = p.curve;
    j["probabilities"] = p.probabilities;
    return j;
}

}  // namespace com
