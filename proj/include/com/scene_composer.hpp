#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "com/clustering.hpp"
#include "com/comloss.hpp"
#include "com/error.hpp"
#include "com/geometry.hpp"
#include "com/gt_database.hpp"
#include "com/rng.hpp"
#include "com/sampler.hpp"

namespace com {

struct ComposerConfig {
    std::array<int, class_count> thresholds{15, 10, 10};  // Gamma per class
    int max_attempts = 10;
    // Re-pose candidates by a random yaw about the sensor origin after the
    // original pose is rejected. Off by default: objects keep their recorded pose.
    bool random_yaw = false;
    // BEV overlaps no larger than this (meters along a separating axis) count as touching.
    double touch_tolerance = 1e-9;
    // Drop scene points that fall inside an inserted box. Breaks point-count
    // conservation; off by default.
    bool remove_covered_points = false;

    int threshold(ObjectClass c) const { return thresholds[class_index(c)]; }

    void validate() const {
        for (int g : thresholds)
            if (g < 0) throw ConfigError("Gamma must be >= 0");
        if (max_attempts < 1) throw ConfigError("max placement attempts must be >= 1");
    }

    friend bool operator==(const ComposerConfig&, const ComposerConfig&) = default;
};

/// Number of objects to add so the class reaches its threshold.
inline int quota(int original_count, int threshold) { return std::max(0, threshold - original_count); }

/// Bird's-eye-view overlap with positive area (separating-axis test on the
/// two oriented rectangles). Edge or corner contact is not a collision.
inline bool collide(const Box3D& a, const Box3D& b, double tolerance = 1e-9) {
    const auto ca = bev_corners(a);
    const auto cb = bev_corners(b);
    const std::array<std::array<double, 2>, 4> axes{{{std::cos(a.heading), std::sin(a.heading)},
                                                     {-std::sin(a.heading), std::cos(a.heading)},
                                                     {std::cos(b.heading), std::sin(b.heading)},
                                                     {-std::sin(b.heading), std::cos(b.heading)}}};
    for (const auto& axis : axes) {
        double amin = INFINITY, amax = -INFINITY, bmin = INFINITY, bmax = -INFINITY;
        for (int i = 0; i < 4; ++i) {
            const double pa = ca[i][0] * axis[0] + ca[i][1] * axis[1];
            const double pb = cb[i][0] * axis[0] + cb[i][1] * axis[1];
            amin = std::min(amin, pa);
            amax = std::max(amax, pa);
            bmin = std::min(bmin, pb);
            bmax = std::max(bmax, pb);
        }
        if (amax <= bmin + tolerance || bmax <= amin + tolerance) return false;
    }
    return true;
}

struct Placement {
    std::optional<Box3D> pose;  // empty when every attempt was rejected
    int attempts = 0;
    std::string reason;         // why the object was skipped
};

/// First candidate is the object's recorded pose; later candidates (only with
/// random_yaw) rotate that pose about the sensor origin.
inline Placement place(const std::vector<Box3D>& occupied, const GtObject& obj, CounterRng& rng,
                       const ComposerConfig& cfg) {
    Placement out;
    if (obj.empty()) {
        out.reason = "no_points";
        return out;
    }
    const int attempts = cfg.random_yaw ? cfg.max_attempts : 1;
    for (int a = 0; a < attempts; ++a) {
        Box3D candidate = obj.label.box;
        if (a > 0) {
            const double yaw = rng.uniform(-std::numbers::pi, std::numbers::pi);
            const double c = std::cos(yaw), s = std::sin(yaw);
            candidate.cx = obj.label.box.cx * c - obj.label.box.cy * s;
            candidate.cy = obj.label.box.cx * s + obj.label.box.cy * c;
            candidate.heading = normalize_heading(obj.label.box.heading + yaw);
        }
        ++out.attempts;
        const bool blocked = std::any_of(occupied.begin(), occupied.end(),
                                         [&](const Box3D& b) { return collide(candidate, b, cfg.touch_tolerance); });
        if (!blocked) {
            out.pose = candidate;
            out.reason.clear();
            return out;
        }
        out.reason = "collision";
    }
    return out;
}

/// What happened to one drawn object.
struct InsertionRecord {
    ObjectId object_id = 0;
    int group = 0;
    ObjectClass cls = ObjectClass::vehicle;
    bool accepted = false;
    Box3D pose;
    std::size_t point_count = 0;
    std::string skip_reason;

    friend bool operator==(const InsertionRecord&, const InsertionRecord&) = default;
};

struct AugmentedFrame {
    Frame frame;
    std::vector<ObjectOrigin> origins;  // aligned with frame.labels
    std::vector<InsertionRecord> provenance;

    std::size_t inserted_count() const {
        return static_cast<std::size_t>(std::count_if(provenance.begin(), provenance.end(),
                                                      [](const InsertionRecord& r) { return r.accepted; }));
    }

    friend bool operator==(const AugmentedFrame&, const AugmentedFrame&) = default;
};

/// id -> object lookup over a loaded database.
class DatabaseIndex {
public:
    explicit DatabaseIndex(const GtDatabase& db) {
        for (const auto& part : db.by_class)
            for (const auto& o : part) by_id_.emplace(o.object_id, &o);
    }

    const GtObject& at(ObjectId id) const {
        auto it = by_id_.find(id);
        if (it == by_id_.end()) throw ValidationError("object id " + std::to_string(id) + " not in database");
        return *it->second;
    }

    bool contains(ObjectId id) const { return by_id_.count(id) != 0; }

private:
    std::unordered_map<ObjectId, const GtObject*> by_id_;
};

/// Registry and plan used to draw one class.
struct ClassSampling {
    const GroupRegistry* registry = nullptr;
    const SamplingPlan* plan = nullptr;
};

using ClassSamplings = std::array<std::optional<ClassSampling>, class_count>;

/// Re-poses box-local points at `pose` in world coordinates.
inline void append_world_points(std::vector<Point>& out, const GtObject& obj, const Box3D& pose) {
    for (const auto& p : obj.points) {
        const Vec3 w = to_world({p.x, p.y, p.z}, pose);
        out.push_back({static_cast<float>(w[0]), static_cast<float>(w[1]), static_cast<float>(w[2]), p.intensity});
    }
}

/// Fills every sampled class up to its threshold. Classes are handled in
/// enum order; within a class, draws are placed in draw order. Original
/// labels and points are copied unchanged.
inline AugmentedFrame compose(const Frame& frame, const DatabaseIndex& index, const ClassSamplings& samplings,
                              const ComposerConfig& cfg, CounterRng& rng) {
    cfg.validate();
    AugmentedFrame out;
    out.frame = frame;
    out.origins.assign(frame.labels.size(), ObjectOrigin::original);

    std::vector<Box3D> occupied;
    occupied.reserve(frame.labels.size() + 32);
    for (const auto& l : frame.labels) occupied.push_back(l.box);

    for (auto cls : all_classes) {
        const auto& sampling = samplings[class_index(cls)];
        if (!sampling) continue;
        const int present = static_cast<int>(std::count_if(frame.labels.begin(), frame.labels.end(),
                                                           [&](const Label& l) { return l.cls == cls; }));
        const int wanted = quota(present, cfg.threshold(cls));
        if (wanted == 0) continue;
        const auto draws = draw_unique(*sampling->plan, *sampling->registry, rng, static_cast<std::size_t>(wanted));
        for (const auto& d : draws) {
            const GtObject& obj = index.at(d.id);
            const Placement placed = place(occupied, obj, rng, cfg);
            InsertionRecord rec{d.id, d.group, cls, false, obj.label.box, obj.points.size(), placed.reason};
            if (placed.pose) {
                rec.accepted = true;
                rec.pose = *placed.pose;
                occupied.push_back(*placed.pose);
                Label label{*placed.pose, cls, obj.label.track_id, frame.frame_id};
                out.frame.labels.push_back(std::move(label));
                out.origins.push_back(ObjectOrigin::augmented);
                append_world_points(out.frame.points, obj, *placed.pose);
            }
            out.provenance.push_back(std::move(rec));
        }
    }

    if (cfg.remove_covered_points) {
        std::vector<Box3D> inserted;
        for (const auto& r : out.provenance)
            if (r.accepted) inserted.push_back(r.pose);
        const std::size_t original_points = frame.points.size();
        std::vector<Point> kept;
        kept.reserve(out.frame.points.size());
        for (std::size_t i = 0; i < out.frame.points.size(); ++i) {
            const auto& p = out.frame.points[i];
            const bool covered = i < original_points && std::any_of(inserted.begin(), inserted.end(), [&](const Box3D& b) {
                                     return point_in_box(p, b);
                                 });
            if (!covered) kept.push_back(p);
        }
        out.frame.points = std::move(kept);
    }
    return out;
}

/// One provenance line per frame.
inline std::string provenance_line(const AugmentedFrame& af) {
    nlohmann::ordered_json j;
    j["frame_id"] = af.frame.frame_id;
    j["inserted"] = nlohmann::ordered_json::array();
    j["skipped"] = nlohmann::ordered_json::array();
    for (const auto& r : af.provenance) {
        nlohmann::ordered_json e;
        e["object_id"] = r.object_id;
        e["group"] = r.group;
        e["class"] = std::string(class_name(r.cls));
        if (r.accepted) {
            e["pose"] = {{"cx", r.pose.cx}, {"cy", r.pose.cy}, {"cz", r.pose.cz}, {"heading", r.pose.heading}};
            e["points"] = r.point_count;
            j["inserted"].push_back(std::move(e));
        } else {
            e["reason"] = r.skip_reason;
            j["skipped"].push_back(std::move(e));
        }
    }
    return j.dump();
}

}  // namespace com
