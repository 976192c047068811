#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "com/clustering.hpp"
#include "com/comloss.hpp"
#include "com/difficulty_tracker.hpp"
#include "com/error.hpp"
#include "com/geometry.hpp"
#include "com/gt_database.hpp"
#include "com/parallel.hpp"
#include "com/rng.hpp"
#include "com/sampler.hpp"
#include "com/scene_composer.hpp"
#include "com/text.hpp"

namespace com {

// ---------------------------------------------------------------------------
// Synthetic world
// ---------------------------------------------------------------------------

struct SyntheticSpec {
    int vehicles_per_group = 4;     // per group of the vehicle rule
    int pedestrians_per_group = 2;  // per group of the pedestrian rule
    int min_objects_per_frame = 4;
    int max_objects_per_frame = 10;
    int background_points = 256;
    double min_distance = 5.0;      // lower end of the first distance bin
    double max_distance = 75.0;     // upper end of the last distance bin
    double peak_density = 10.0;     // points per occupied voxel at the sensor
    double sensor_height = 1.7;     // ground plane sits at z = -sensor_height

    void validate() const {
        if (vehicles_per_group < 0 || pedestrians_per_group < 0) throw ConfigError("object counts must be >= 0");
        if (min_objects_per_frame < 1 || max_objects_per_frame < min_objects_per_frame)
            throw ConfigError("objects per frame range is invalid");
        if (!(min_distance > 0.0 && max_distance > min_distance)) throw ConfigError("distance range is invalid");
        if (background_points < 0) throw ConfigError("background points must be >= 0");
        if (!(peak_density > 0.0)) throw ConfigError("peak density must be positive");
    }

    friend bool operator==(const SyntheticSpec&, const SyntheticSpec&) = default;
};

struct SyntheticWorld {
    std::vector<Frame> frames;
    GtDatabase db;
};

namespace detail {

struct ObjectBlueprint {
    ObjectClass cls = ObjectClass::vehicle;
    double distance = 10.0;
    double size = 4.5;
    double angle = 0.0;
    int occupied_voxels = 1;
    std::string track_id;
};

/// [lo, hi) of bin `b` for the given edges, closed to a domain.
inline std::pair<double, double> bin_range(const std::vector<double>& edges, int b, double lo_domain, double hi_domain) {
    const double lo = b == 0 ? lo_domain : edges[static_cast<std::size_t>(b - 1)];
    const double hi = b == static_cast<int>(edges.size()) ? hi_domain : edges[static_cast<std::size_t>(b)];
    return {lo, hi};
}

inline double sample_in_bin(const std::vector<double>& edges, int b, double lo_domain, double hi_domain, CounterRng& rng) {
    auto [lo, hi] = bin_range(edges, b, lo_domain, hi_domain);
    const double margin = 0.05 * (hi - lo);
    return rng.uniform(lo + margin, hi - margin);
}

/// Voxel count whose occupancy ratio lands in bin `b`; prefers non-empty objects.
inline int occupied_for_bin(const std::vector<double>& edges, int b, int total, CounterRng& rng) {
    std::vector<int> candidates;
    for (int k = 1; k <= total; ++k)
        if (bin_index(quantize(static_cast<double>(k) / total), edges) == b) candidates.push_back(k);
    if (candidates.empty()) return 0;
    return candidates[rng.index(candidates.size())];
}

inline std::vector<ObjectBlueprint> blueprints(const SyntheticSpec& spec, const ClusteringConfig& clustering,
                                               CounterRng& rng) {
    std::vector<ObjectBlueprint> out;
    const std::array<std::pair<ObjectClass, int>, 2> plan{
        {{ObjectClass::vehicle, spec.vehicles_per_group}, {ObjectClass::pedestrian, spec.pedestrians_per_group}}};
    int serial = 0;
    for (const auto& [cls, per_group] : plan) {
        const BinningRule& rule = clustering.rule(cls);
        const int total_voxels = clustering.voxels[class_index(cls)].total();
        const int G = rule.group_count();
        for (int g = 0; g < G; ++g) {
            const GroupKey key = group_key(g, rule);
            for (int n = 0; n < per_group; ++n) {
                ObjectBlueprint bp;
                bp.cls = cls;
                const auto bin = [&](Factor f) { return key[static_cast<std::size_t>(f)]; };
                const auto& edges = [&](Factor f) -> const std::vector<double>& { return rule.edges_of(f); };
                bp.distance = bin(Factor::distance) >= 0
                                  ? sample_in_bin(edges(Factor::distance), bin(Factor::distance), spec.min_distance,
                                                  spec.max_distance, rng)
                                  : rng.uniform(spec.min_distance, spec.max_distance);
                if (cls == ObjectClass::vehicle) {
                    bp.size = bin(Factor::size) >= 0 ? sample_in_bin(edges(Factor::size), bin(Factor::size), 3.0, 12.0, rng)
                                                     : rng.uniform(3.5, 5.5);
                } else {
                    bp.size = rng.uniform(1.6, 1.9);
                }
                bp.angle = bin(Factor::angle) >= 0
                               ? sample_in_bin(edges(Factor::angle), bin(Factor::angle), 0.0, half_pi, rng)
                               : rng.uniform(0.0, half_pi);
                bp.occupied_voxels = bin(Factor::occupancy) >= 0
                                         ? occupied_for_bin(edges(Factor::occupancy), bin(Factor::occupancy), total_voxels, rng)
                                         : 1 + static_cast<int>(rng.index(static_cast<std::uint64_t>(total_voxels)));
                bp.track_id = (cls == ObjectClass::vehicle ? "v" : "p") + std::to_string(serial++);
                out.push_back(bp);
            }
        }
    }
    return out;
}

inline Box3D box_for(const ObjectBlueprint& bp, double azimuth, double sensor_height, CounterRng& rng) {
    Box3D b;
    if (bp.cls == ObjectClass::vehicle) {
        b.l = bp.size;
        b.w = std::clamp(0.42 * bp.size, 1.5, 2.6);
        b.h = std::clamp(0.36 * bp.size, 1.4, 3.8);
    } else {
        b.l = 0.8;
        b.w = 0.7;
        b.h = bp.size;
    }
    b.cz = -sensor_height + 0.5 * b.h;
    const double r = std::sqrt(std::max(bp.distance * bp.distance - b.cz * b.cz, 0.0));
    b.cx = r * std::cos(azimuth);
    b.cy = r * std::sin(azimuth);
    const double quarter_turns = static_cast<double>(rng.index(4));
    b.heading = normalize_heading(azimuth + bp.angle + quarter_turns * half_pi);
    return b;
}

/// Points spread over `occupied` distinct voxels, strictly inside each voxel.
inline void synthesize_points(std::vector<Point>& out, const Box3D& b, const VoxelScheme& scheme, int occupied,
                              double per_voxel, CounterRng& rng) {
    std::vector<int> cells(static_cast<std::size_t>(scheme.total()));
    for (int i = 0; i < scheme.total(); ++i) cells[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < occupied; ++i) {
        const auto j = static_cast<std::size_t>(i) + rng.index(cells.size() - static_cast<std::size_t>(i));
        std::swap(cells[static_cast<std::size_t>(i)], cells[j]);
    }
    const int count = std::max(1, static_cast<int>(std::lround(per_voxel)));
    for (int i = 0; i < occupied; ++i) {
        const int cell = cells[static_cast<std::size_t>(i)];
        const int li = cell / (scheme.width * scheme.height);
        const int wi = (cell / scheme.height) % scheme.width;
        const int hi = cell % scheme.height;
        for (int n = 0; n < count; ++n) {
            const Vec3 local{(-0.5 + (li + rng.uniform(0.1, 0.9)) / scheme.length) * b.l,
                             (-0.5 + (wi + rng.uniform(0.1, 0.9)) / scheme.width) * b.w,
                             (-0.5 + (hi + rng.uniform(0.1, 0.9)) / scheme.height) * b.h};
            const Vec3 w = to_world(local, b);
            out.push_back({static_cast<float>(w[0]), static_cast<float>(w[1]), static_cast<float>(w[2]),
                           static_cast<float>(rng.uniform())});
        }
    }
}

}  // namespace detail

/// Labeled frames whose objects cover every group of the vehicle and
/// pedestrian rules, plus the database built from them. Point density falls
/// with distance. Deterministic in (spec, seed).
inline SyntheticWorld generate_synthetic_db(const SyntheticSpec& spec, std::uint64_t seed,
                                            const ClusteringConfig& clustering = {}) {
    spec.validate();
    CounterRng rng(derive_seed(seed, 0x5eed));
    auto pending = detail::blueprints(spec, clustering, rng);
    for (std::size_t i = pending.size(); i > 1; --i) std::swap(pending[i - 1], pending[rng.index(i)]);

    SyntheticWorld world;
    std::size_t next = 0;
    while (next < pending.size()) {
        Frame f;
        f.frame_id = "syn_" + std::to_string(world.frames.size());
        const int span = spec.max_objects_per_frame - spec.min_objects_per_frame + 1;
        const int target = spec.min_objects_per_frame + static_cast<int>(rng.index(static_cast<std::uint64_t>(span)));
        std::vector<detail::ObjectBlueprint> deferred;
        while (static_cast<int>(f.labels.size()) < target && next < pending.size()) {
            const auto& bp = pending[next++];
            std::optional<Box3D> placed;
            for (int attempt = 0; attempt < 64 && !placed; ++attempt) {
                const Box3D b = detail::box_for(bp, rng.uniform(-std::numbers::pi, std::numbers::pi), spec.sensor_height, rng);
                const bool clear = std::none_of(f.labels.begin(), f.labels.end(), [&](const Label& l) {
                    Box3D padded = l.box;
                    padded.l += 0.5;
                    padded.w += 0.5;
                    return collide(b, padded);
                });
                if (clear) placed = b;
            }
            if (!placed) {
                deferred.push_back(bp);
                continue;
            }
            const double per_voxel = spec.peak_density * std::max(0.0, 1.0 - bp.distance / 100.0);
            detail::synthesize_points(f.points, *placed, clustering.voxels[class_index(bp.cls)], bp.occupied_voxels,
                                      per_voxel, rng);
            f.labels.push_back({*placed, bp.cls, bp.track_id, f.frame_id});
        }
        // Objects that did not fit go to the following frames.
        pending.insert(pending.begin() + static_cast<std::ptrdiff_t>(next), deferred.begin(), deferred.end());
        for (int i = 0; i < spec.background_points; ++i) {
            const double r = rng.uniform(2.0, spec.max_distance + 5.0);
            const double a = rng.uniform(-std::numbers::pi, std::numbers::pi);
            f.points.push_back({static_cast<float>(r * std::cos(a)), static_cast<float>(r * std::sin(a)),
                                static_cast<float>(-spec.sensor_height - 0.05), static_cast<float>(rng.uniform())});
        }
        world.frames.push_back(std::move(f));
    }
    world.db = build_database(world.frames, "synthetic:" + std::to_string(seed), clustering.voxels);
    return world;
}

// ---------------------------------------------------------------------------
// Detector stand-in
// ---------------------------------------------------------------------------

/// Latent difficulty in [0, 1]: grows with distance, shrinks with occupancy,
/// grows with deviation from a typical object size.
struct DifficultyModel {
    double distance_coef = 0.5;
    double occupancy_coef = 0.3;
    double size_coef = 0.2;
    double distance_scale = 75.0;  // meters
    double typical_size = 4.5;     // meters

    double operator()(const ObjectFeatures& f) const {
        const double size_dev = std::min(1.0, std::abs(f.size - typical_size) / typical_size);
        const double d = distance_coef * (f.distance / distance_scale) + occupancy_coef * (1.0 - f.occupancy) +
                         size_coef * size_dev;
        return std::clamp(d, 0.0, 1.0);
    }

    friend bool operator==(const DifficultyModel&, const DifficultyModel&) = default;
};

/// score = clamp(skill(t) - d* + N(0, noise^2), 0, 1) with
/// skill(t) = skill_start + (1 - skill_start) * t / T.
struct DetectorProxy {
    double noise = 0.05;
    double skill_start = 0.0;  // skill before the first epoch

    double skill(double epoch, double total_epochs) const {
        return std::clamp(skill_start + (1.0 - skill_start) * epoch / total_epochs, 0.0, 1.0);
    }

    double score(double epoch, double total_epochs, double latent_difficulty, CounterRng& rng) const {
        const double eps = noise > 0.0 ? noise * rng.normal() : 0.0;
        return std::clamp(skill(epoch, total_epochs) - latent_difficulty + eps, 0.0, 1.0);
    }

    friend bool operator==(const DetectorProxy&, const DetectorProxy&) = default;
};

// ---------------------------------------------------------------------------
// Experiment
// ---------------------------------------------------------------------------

struct HarnessConfig {
    int total_epochs = 30;
    double lambda = 0.5;
    double sigma = 0.2;
    CurriculumMode mode = CurriculumMode::curriculum;
    ObjectClass target = ObjectClass::vehicle;
    LossWeightConfig loss;
    ComposerConfig composer;
    ClusteringConfig clustering;
    SyntheticSpec world;
    DifficultyModel difficulty;
    DetectorProxy detector;
    std::uint64_t seed = 0;
    unsigned workers = 1;

    void validate() const {
        if (total_epochs < 1) throw ConfigError("total epochs must be >= 1");
        CurriculumState{1.0, static_cast<double>(total_epochs), lambda, sigma, mode}.validate();
        loss.validate();
        composer.validate();
        world.validate();
        for (auto c : all_classes) clustering.rule(c).validate();
        if (!(detector.noise >= 0.0)) throw ConfigError("detector noise must be >= 0");
        if (!(detector.skill_start >= 0.0 && detector.skill_start <= 1.0))
            throw ConfigError("detector skill_start must be in [0, 1]");
        if (loss.total != static_cast<double>(total_epochs)) throw ConfigError("loss T must equal total epochs");
        if (difficulty.distance_scale <= 0.0 || difficulty.typical_size <= 0.0)
            throw ConfigError("difficulty scales must be positive");
    }

    friend bool operator==(const HarnessConfig&, const HarnessConfig&) = default;
};

struct EpochTrend {
    int epoch = 0;
    double easy = 0.0;    // mean p^g over the top third of groups by score
    double medium = 0.0;
    double hard = 0.0;
    double tau = 0.0;     // after the epoch's last frame
    double mu = 0.0;
    int rank = 1;
    int center_group = 0;
    double mean_weight = 0.0;
    std::size_t inserted = 0;
    std::size_t skipped = 0;
    std::vector<double> scores;              // group scores the plan used
    std::vector<double> probabilities;       // p^g
    std::vector<std::size_t> pool_sizes;     // |P_g| at the epoch boundary
    std::vector<std::size_t> inserted_by_group;  // from composer provenance
};

struct TrendReport {
    std::uint64_t seed = 0;
    CurriculumMode mode = CurriculumMode::curriculum;
    double lambda = 0.5;
    double sigma = 0.2;
    int group_total = 0;
    std::vector<EpochTrend> epochs;
};

/// Mean p^g of the easy, medium and hard thirds, ranked by `scores`
/// (descending, ties by index). Thirds are [0, G/3), [G/3, 2G/3), [2G/3, G).
inline std::array<double, 3> tertile_means(const std::vector<double>& scores, const std::vector<double>& probabilities) {
    const auto order = sorted_groups(GroupScores{scores, 0}, CurriculumMode::curriculum);
    const std::size_t G = order.size();
    const std::array<std::size_t, 4> cut{0, G / 3, 2 * G / 3, G};
    std::array<double, 3> out{};
    for (int t = 0; t < 3; ++t) {
        double sum = 0.0;
        for (std::size_t i = cut[t]; i < cut[t + 1]; ++i) sum += probabilities[static_cast<std::size_t>(order[i])];
        const std::size_t n = cut[t + 1] - cut[t];
        out[t] = n ? sum / static_cast<double>(n) : 0.0;
    }
    return out;
}

namespace detail {

struct FrameOutcome {
    std::vector<ObjectLossRecord> records;
    std::vector<int> groups;  // -1 for original objects
    std::size_t inserted = 0;
    std::size_t skipped = 0;
};

}  // namespace detail

/// Runs the closed loop for epochs 1..T on a synthetic world:
/// plan -> compose -> score -> weight -> pool -> end_epoch.
inline TrendReport run_experiment(const HarnessConfig& cfg, const SyntheticWorld& world) {
    cfg.validate();
    const BinningRule& rule = cfg.clustering.rule(cfg.target);
    const GroupRegistry registry = build_registry(world.db, cfg.target, rule);
    const auto counts = registry.sampleable_counts();
    const DatabaseIndex index(world.db);

    // Latent difficulty of every original target-class object, per frame.
    std::vector<std::vector<double>> original_difficulty(world.frames.size());
    parallel_for(world.frames.size(), cfg.workers, [&](std::size_t i) {
        for (const auto& o : extract_objects(world.frames[i], cfg.clustering.voxels))
            if (o.label.cls == cfg.target) original_difficulty[i].push_back(cfg.difficulty(o.features));
    });

    TrendReport report;
    report.seed = cfg.seed;
    report.mode = cfg.mode;
    report.lambda = cfg.lambda;
    report.sigma = cfg.sigma;
    report.group_total = registry.G();

    GroupScores scores = init_scores(registry.G());
    ScorePool pool(registry.G());
    ThresholdState threshold;
    const double T = static_cast<double>(cfg.total_epochs);

    for (int t = 1; t <= cfg.total_epochs; ++t) {
        const CurriculumState state{static_cast<double>(t), T, cfg.lambda, cfg.sigma, cfg.mode};
        const SamplingPlan p = plan(scores, counts, state);

        EpochTrend trend;
        trend.epoch = t;
        trend.mu = p.choice.mu;
        trend.rank = p.choice.rank;
        trend.center_group = p.choice.group;
        trend.scores = scores.values;
        trend.probabilities = p.probabilities;
        const auto thirds = tertile_means(scores.values, p.probabilities);
        trend.easy = thirds[0];
        trend.medium = thirds[1];
        trend.hard = thirds[2];
        trend.inserted_by_group.assign(static_cast<std::size_t>(registry.G()), 0);

        ClassSamplings samplings{};
        samplings[class_index(cfg.target)] = ClassSampling{&registry, &p};

        std::vector<detail::FrameOutcome> outcomes(world.frames.size());
        const std::uint64_t epoch_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(t));
        parallel_for(world.frames.size(), cfg.workers, [&](std::size_t i) {
            CounterRng rng(derive_seed(epoch_seed, i));
            const AugmentedFrame af = compose(world.frames[i], index, samplings, cfg.composer, rng);
            auto& out = outcomes[i];
            for (double d : original_difficulty[i]) {
                out.records.push_back({cfg.detector.score(t, T, d, rng), 0.0, 0.0, ObjectOrigin::original});
                out.groups.push_back(-1);
            }
            for (const auto& r : af.provenance) {
                if (!r.accepted) {
                    ++out.skipped;
                    continue;
                }
                ++out.inserted;
                const double d = cfg.difficulty(index.at(r.object_id).features);
                out.records.push_back({cfg.detector.score(t, T, d, rng), 0.0, 0.0, ObjectOrigin::augmented});
                out.groups.push_back(r.group);
            }
        });

        // Sequential reduction in frame order keeps tau and the pools independent of scheduling.
        double weight_sum = 0.0;
        std::size_t weight_count = 0;
        for (const auto& out : outcomes) {
            const auto rep = weigh_frame(threshold, out.records, t, cfg.loss);
            for (std::size_t k = 0; k < out.records.size(); ++k) {
                weight_sum += rep.weights[k];
                ++weight_count;
                if (out.groups[k] >= 0) {
                    pool.record(out.groups[k], rep.difficulties[k]);
                    ++trend.inserted_by_group[static_cast<std::size_t>(out.groups[k])];
                }
            }
            trend.inserted += out.inserted;
            trend.skipped += out.skipped;
        }
        trend.tau = threshold.tau;
        trend.mean_weight = weight_count ? weight_sum / static_cast<double>(weight_count) : 1.0;
        trend.pool_sizes.reserve(static_cast<std::size_t>(registry.G()));
        for (int g = 0; g < registry.G(); ++g) trend.pool_sizes.push_back(pool.pool_size(g));
        scores = end_epoch(pool, scores);
        report.epochs.push_back(std::move(trend));
    }
    return report;
}

inline TrendReport run_experiment(const HarnessConfig& cfg) {
    cfg.validate();
    return run_experiment(cfg, generate_synthetic_db(cfg.world, cfg.seed, cfg.clustering));
}

/// Per-epoch mean of the tertile curves over several reports of equal length.
inline std::vector<std::array<double, 3>> average_tertiles(const std::vector<TrendReport>& reports) {
    if (reports.empty()) return {};
    std::vector<std::array<double, 3>> out(reports.front().epochs.size(), {0.0, 0.0, 0.0});
    for (const auto& r : reports) {
        if (r.epochs.size() != out.size()) throw ValidationError("reports differ in epoch count");
        for (std::size_t e = 0; e < out.size(); ++e) {
            out[e][0] += r.epochs[e].easy;
            out[e][1] += r.epochs[e].medium;
            out[e][2] += r.epochs[e].hard;
        }
    }
    for (auto& row : out)
        for (auto& v : row) v /= static_cast<double>(reports.size());
    return out;
}

/// epoch,easy,medium,hard,tau,mu,rank,center_group,mean_weight,inserted,skipped
inline void write_trend_csv(std::ostream& out, const TrendReport& r) {
    out << "# seed=" << r.seed << " mode=" << mode_name(r.mode) << " lambda=" << format_double(r.lambda)
        << " sigma=" << format_double(r.sigma) << " groups=" << r.group_total << '\n';
    out << "epoch,easy,medium,hard,tau,mu,rank,center_group,mean_weight,inserted,skipped\n";
    for (const auto& e : r.epochs) {
        out << e.epoch << ',' << format_double(e.easy) << ',' << format_double(e.medium) << ','
            << format_double(e.hard) << ',' << format_double(e.tau) << ',' << format_double(e.mu) << ',' << e.rank
            << ',' << e.center_group << ',' << format_double(e.mean_weight) << ',' << e.inserted << ','
            << e.skipped << '\n';
    }
}

/// Minimal SVG line chart of the three tertile curves (epoch 2 onward).
inline std::string trend_svg(const std::vector<std::array<double, 3>>& curves) {
    const double width = 640, height = 360, pad = 40;
    double peak = 0.0;
    for (std::size_t e = 1; e < curves.size(); ++e)
        for (double v : curves[e]) peak = std::max(peak, v);
    if (peak <= 0.0) peak = 1.0;
    const std::size_t n = curves.size();
    auto x = [&](std::size_t e) { return pad + (width - 2 * pad) * (n > 2 ? double(e - 1) / double(n - 2) : 0.0); };
    auto y = [&](double v) { return height - pad - (height - 2 * pad) * v / peak; };
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    const char* colors[3] = {"#2a9d8f", "#e9c46a", "#e76f51"};
    const char* names[3] = {"easy", "medium", "hard"};
    for (int k = 0; k < 3; ++k) {
        svg << "<polyline fill=\"none\" stroke=\"" << colors[k] << "\" stroke-width=\"2\" points=\"";
        for (std::size_t e = 1; e < n; ++e) svg << format_double(x(e)) << ',' << format_double(y(curves[e][k])) << ' ';
        svg << "\"/>\n<text x=\"" << width - pad - 60 << "\" y=\"" << pad + 16 * k << "\" fill=\"" << colors[k]
            << "\" font-size=\"12\">" << names[k] << "</text>\n";
    }
    svg << "<line x1=\"" << pad << "\" y1=\"" << height - pad << "\" x2=\"" << width - pad << "\" y2=\""
        << height - pad << "\" stroke=\"black\"/>\n"
        << "<line x1=\"" << pad << "\" y1=\"" << pad << "\" x2=\"" << pad << "\" y2=\"" << height - pad
        << "\" stroke=\"black\"/>\n</svg>\n";
    return svg.str();
}

// ---------------------------------------------------------------------------
// Parameter sweep
// ---------------------------------------------------------------------------

struct SweepCell {
    double lambda = 0.5;
    double sigma = 0.2;
    CurriculumMode mode = CurriculumMode::curriculum;
};

struct SweepRow {
    SweepCell cell;
    double easy_early = 0.0;  // epoch 2
    double easy_final = 0.0;
    double medium_peak = 0.0;
    int medium_peak_epoch = 0;
    double hard_early = 0.0;
    double hard_final = 0.0;
    int hardest_rank_epoch = -1;  // first epoch whose rank reaches G, -1 if never
    std::vector<int> rank_trace;
};

inline SweepRow summarize(const SweepCell& cell, const std::vector<TrendReport>& reports) {
    SweepRow row;
    row.cell = cell;
    const auto curves = average_tertiles(reports);
    if (curves.size() >= 2) {
        row.easy_early = curves[1][0];
        row.hard_early = curves[1][2];
        row.easy_final = curves.back()[0];
        row.hard_final = curves.back()[2];
        row.medium_peak = -1.0;
        for (std::size_t e = 1; e < curves.size(); ++e) {
            if (curves[e][1] > row.medium_peak) {
                row.medium_peak = curves[e][1];
                row.medium_peak_epoch = static_cast<int>(e) + 1;
            }
        }
    }
    const auto& first = reports.front();
    for (const auto& e : first.epochs) {
        row.rank_trace.push_back(e.rank);
        if (row.hardest_rank_epoch < 0 && e.rank == first.group_total) row.hardest_rank_epoch = e.epoch;
    }
    return row;
}

/// Every cell shares all other settings of `base`; each runs `seeds` seeds
/// (base.seed, base.seed + 1, ...) on the same synthetic worlds.
inline std::vector<SweepRow> sweep(const HarnessConfig& base, const std::vector<SweepCell>& grid, int seeds = 1) {
    if (grid.empty()) throw ConfigError("sweep grid is empty");
    if (seeds < 1) throw ConfigError("sweep needs at least one seed");
    std::vector<SyntheticWorld> worlds;
    for (int s = 0; s < seeds; ++s)
        worlds.push_back(generate_synthetic_db(base.world, base.seed + static_cast<std::uint64_t>(s), base.clustering));
    std::vector<SweepRow> rows;
    for (const auto& cell : grid) {
        std::vector<TrendReport> reports;
        for (int s = 0; s < seeds; ++s) {
            HarnessConfig cfg = base;
            cfg.lambda = cell.lambda;
            cfg.sigma = cell.sigma;
            cfg.mode = cell.mode;
            cfg.seed = base.seed + static_cast<std::uint64_t>(s);
            reports.push_back(run_experiment(cfg, worlds[static_cast<std::size_t>(s)]));
        }
        rows.push_back(summarize(cell, reports));
    }
    return rows;
}

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
    out << "lambda,sigma,mode,easy_early,easy_final,medium_peak,medium_peak_epoch,hard_early,hard_final,"
           "hardest_rank_epoch\n";
    for (const auto& r : rows) {
        out << format_double(r.cell.lambda) << ',' << format_double(r.cell.sigma) << ',' << mode_name(r.cell.mode)
            << ',' << format_double(r.easy_early) << ',' << format_double(r.easy_final) << ','
            << format_double(r.medium_peak) << ',' << r.medium_peak_epoch << ',' << format_double(r.hard_early)
            << ',' << format_double(r.hard_final) << ',' << r.hardest_rank_epoch << '\n';
    }
}

}  // namespace com
