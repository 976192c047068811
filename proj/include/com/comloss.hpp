#pragma once

#include <cmath>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "com/error.hpp"

namespace com {

/// Parameters of the difficulty-adaptive loss weighting.
struct LossWeightConfig {
    double alpha = 0.001;    // momentum of the adaptive threshold
    double beta = -5.0;      // curve shape; < 0 is easy-to-hard
    double height = 1.0;     // H, re-weighting height
    double tipping = 30.0;   // t_r, epoch where the weighting flips
    double total = 30.0;     // T, total epochs

    void validate() const {
        if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha must be in (0, 1]");
        if (!(total >= 1.0)) throw ConfigError("total epochs must be >= 1");
        if (!(tipping >= 0.0 && tipping <= total)) throw ConfigError("tipping epoch must be in [0, T]");
        if (!std::isfinite(beta) || !std::isfinite(height)) throw ConfigError("beta and H must be finite");
    }

    friend bool operator==(const LossWeightConfig&, const LossWeightConfig&) = default;
};

/// Running average of original-object scores. Starts at 0.
struct ThresholdState {
    double tau = 0.0;
};

enum class ObjectOrigin { original, augmented };

struct ObjectLossRecord {
    double score = 0.0;
    double loss_cls = 0.0;
    double loss_reg = 0.0;
    ObjectOrigin origin = ObjectOrigin::original;
};

struct WeightedLossReport {
    std::vector<double> weights;
    std::vector<double> difficulties;
    double tau = 0.0;
    double total = 0.0;
};

inline void validate_score(double s) {
    if (!(s >= 0.0 && s <= 1.0)) throw ValidationError("classification score outside [0, 1]");
}

/// tau <- (1 - alpha) * tau + alpha * mean(scores). Pass original-object
/// scores only. An empty batch carries no information and leaves tau as is.
inline ThresholdState update_threshold(ThresholdState state, std::span<const double> original_scores, double alpha) {
    if (original_scores.empty()) return state;
    double sum = 0.0;
    for (double s : original_scores) {
        validate_score(s);
        sum += s;
    }
    const double mean = sum / static_cast<double>(original_scores.size());
    state.tau = (1.0 - alpha) * state.tau + alpha * mean;
    return state;
}

/// Smaller means harder.
inline double difficulty(double score, double tau) { return score - tau; }

inline double curriculum_height(double epoch, const LossWeightConfig& cfg) {
    return cfg.height * (cfg.tipping - epoch) / cfg.total;
}

/// w = 1 + h_t * (1 - e^{beta s}) / (1 + e^{beta s}).
/// The ratio equals -tanh(beta s / 2), which saturates instead of overflowing.
inline double weight(double difficulty_value, double epoch, const LossWeightConfig& cfg) {
    const double shape = -std::tanh(0.5 * cfg.beta * difficulty_value);
    return 1.0 + curriculum_height(epoch, cfg) * shape;
}

/// (1/N) * (L_n + sum_i w_i * (L_c^i + L_r^i)) over original and augmented objects.
inline double total_loss(std::span<const ObjectLossRecord> records, std::span<const double> weights,
                         double background_loss, double normalizer) {
    if (!(normalizer > 0.0)) throw ValidationError("loss normalizer N must be positive");
    if (records.size() != weights.size()) throw ValidationError("weights not aligned with records");
    double sum_original = 0.0;
    double sum_augmented = 0.0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (!(r.loss_cls >= 0.0) || !(r.loss_reg >= 0.0)) throw ValidationError("losses must be non-negative");
        const double term = weights[i] * (r.loss_cls + r.loss_reg);
        (r.origin == ObjectOrigin::original ? sum_original : sum_augmented) += term;
    }
    return (background_loss + sum_original + sum_augmented) / normalizer;
}

/// One frame's worth of weighting: update tau from the original objects, then
/// derive difficulties and weights for every object.
inline WeightedLossReport weigh_frame(ThresholdState& state, std::span<const ObjectLossRecord> records, double epoch,
                                      const LossWeightConfig& cfg, double background_loss = 0.0,
                                      double normalizer = 1.0) {
    std::vector<double> originals;
    for (const auto& r : records) {
        validate_score(r.score);
        if (r.origin == ObjectOrigin::original) originals.push_back(r.score);
    }
    state = update_threshold(state, originals, cfg.alpha);

    WeightedLossReport report;
    report.tau = state.tau;
    report.weights.reserve(records.size());
    report.difficulties.reserve(records.size());
    for (const auto& r : records) {
        const double d = difficulty(r.score, state.tau);
        report.difficulties.push_back(d);
        report.weights.push_back(weight(d, epoch, cfg));
    }
    report.total = total_loss(records, report.weights, background_loss, normalizer);
    return report;
}

// ---------------------------------------------------------------------------
// Streaming protocol
// ---------------------------------------------------------------------------

/// Line protocol for external training loops.
///
/// Request, one JSON object per line:
///     {"score": 0.83, "origin": "original" | "augmented", "t": 4, "frame": "f17"}
/// `frame` is optional. Consecutive records sharing a frame value form one
/// batch: tau is updated once from the batch's original scores, then every
/// record of the batch is answered. A record without `frame` is its own batch.
///
/// Reply, one JSON object per request line, in request order:
///     {"w": 1.42, "s_tilde": 0.31, "tau": 0.52}
class WeightStream {
public:
    explicit WeightStream(LossWeightConfig cfg, ThresholdState state = {}) : cfg_(cfg), state_(state) {
        cfg_.validate();
    }

    /// Consumes one request line, writing replies for any completed batch.
    void feed(const std::string& line, std::ostream& out) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(std::string("malformed weight record: ") + e.what());
        }
        Pending p;
        try {
            p.record.score = j.at("score").get<double>();
            const auto origin = j.at("origin").get<std::string>();
            if (origin == "original") p.record.origin = ObjectOrigin::original;
            else if (origin == "augmented") p.record.origin = ObjectOrigin::augmented;
            else throw ValidationError("origin must be 'original' or 'augmented'");
            p.epoch = j.at("t").get<double>();
            if (j.contains("frame")) p.frame = j.at("frame").dump();
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(std::string("weight record missing or mistyped field: ") + e.what());
        }
        validate_score(p.record.score);
        if (!(p.epoch >= 0.0 && p.epoch <= cfg_.total)) throw ValidationError("epoch t outside [0, T]");

        if (!pending_.empty() && (!p.frame || pending_.front().frame != p.frame)) flush(out);
        const bool standalone = !p.frame.has_value();
        pending_.push_back(std::move(p));
        if (standalone) flush(out);
    }

    void flush(std::ostream& out) {
        if (pending_.empty()) return;
        std::vector<ObjectLossRecord> records;
        records.reserve(pending_.size());
        for (const auto& p : pending_) records.push_back(p.record);
        std::vector<double> originals;
        for (const auto& r : records)
            if (r.origin == ObjectOrigin::original) originals.push_back(r.score);
        state_ = update_threshold(state_, originals, cfg_.alpha);
        for (const auto& p : pending_) {
            const double d = difficulty(p.record.score, state_.tau);
            nlohmann::ordered_json reply;
            reply["w"] = weight(d, p.epoch, cfg_);
            reply["s_tilde"] = d;
            reply["tau"] = state_.tau;
            out << reply.dump() << '\n';
        }
        pending_.clear();
    }

    void run(std::istream& in, std::ostream& out) {
        std::string line;
        while (std::getline(in, line)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            feed(line, out);
        }
        flush(out);
    }

    const ThresholdState& state() const noexcept { return state_; }

private:
    struct Pending {
        ObjectLossRecord record;
        double epoch = 0.0;
        std::optional<std::string> frame;
    };

    LossWeightConfig cfg_;
    ThresholdState state_;
    std::vector<Pending> pending_;
};

}  // namespace com
