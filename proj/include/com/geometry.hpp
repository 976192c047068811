#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "com/error.hpp"

namespace com {

/// LiDAR return. Single precision to match the on-disk KITTI layout.
struct Point {
    float x = 0.f;
    float y = 0.f;
    float z = 0.f;
    float intensity = 0.f;

    friend bool operator==(const Point&, const Point&) = default;
};

/// Oriented box: center, extents along the local length/width/height axes,
/// and yaw about +z.
struct Box3D {
    double cx = 0.0;
    double cy = 0.0;
    double cz = 0.0;
    double l = 1.0;
    double w = 1.0;
    double h = 1.0;
    double heading = 0.0;

    friend bool operator==(const Box3D&, const Box3D&) = default;
};

struct ObjectFeatures {
    double distance = 0.0;   // f_d, meters
    double size = 0.0;       // f_s, meters
    double angle = 0.0;      // f_a, radians in [0, pi/2)
    double occupancy = 0.0;  // f_o, in [0, 1]

    friend bool operator==(const ObjectFeatures&, const ObjectFeatures&) = default;
};

/// Equal-size voxel partition of a box along its local axes.
struct VoxelScheme {
    int length = 1;
    int width = 1;
    int height = 1;

    bool valid() const noexcept { return length >= 1 && width >= 1 && height >= 1; }
    int total() const noexcept { return length * width * height; }

    friend bool operator==(const VoxelScheme&, const VoxelScheme&) = default;
};

inline constexpr VoxelScheme vehicle_voxels{3, 2, 2};
inline constexpr VoxelScheme pedestrian_voxels{1, 1, 5};

inline constexpr double half_pi = std::numbers::pi / 2.0;

/// Maps any angle into (-pi, pi].
inline double normalize_heading(double a) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double r = std::fmod(a, two_pi);
    if (r <= -std::numbers::pi) r += two_pi;
    if (r > std::numbers::pi) r -= two_pi;
    return r;
}

/// Floored modulo into [0, m).
inline double floored_mod(double x, double m) {
    double r = std::fmod(x, m);
    if (r < 0.0) r += m;
    if (r >= m) r = 0.0;
    return r;
}

inline void validate_box(const Box3D& b) {
    const bool finite = std::isfinite(b.cx) && std::isfinite(b.cy) && std::isfinite(b.cz) &&
                        std::isfinite(b.l) && std::isfinite(b.w) && std::isfinite(b.h) &&
                        std::isfinite(b.heading);
    if (!finite) throw ValidationError("box has non-finite field");
    if (!(b.l > 0.0 && b.w > 0.0 && b.h > 0.0)) throw ValidationError("box dimensions must be positive");
}

using Vec3 = std::array<double, 3>;

/// World coordinates -> box-local frame (translate by -center, rotate by -heading).
inline Vec3 to_local(double x, double y, double z, const Box3D& b) {
    const double c = std::cos(b.heading);
    const double s = std::sin(b.heading);
    const double dx = x - b.cx;
    const double dy = y - b.cy;
    return {dx * c + dy * s, -dx * s + dy * c, z - b.cz};
}

inline Vec3 to_local(const Point& p, const Box3D& b) { return to_local(p.x, p.y, p.z, b); }

/// Box-local frame -> world coordinates.
inline Vec3 to_world(const Vec3& local, const Box3D& b) {
    const double c = std::cos(b.heading);
    const double s = std::sin(b.heading);
    return {b.cx + local[0] * c - local[1] * s, b.cy + local[0] * s + local[1] * c, b.cz + local[2]};
}

inline bool inside_extent(const Vec3& local, double l, double w, double h) noexcept {
    return std::abs(local[0]) <= 0.5 * l && std::abs(local[1]) <= 0.5 * w && std::abs(local[2]) <= 0.5 * h;
}

/// Faces are inclusive.
inline bool point_in_box(const Point& p, const Box3D& b) { return inside_extent(to_local(p, b), b.l, b.w, b.h); }

inline double feature_distance(const Box3D& b) { return std::sqrt(b.cx * b.cx + b.cy * b.cy + b.cz * b.cz); }

inline double feature_size(const Box3D& b) { return std::max({b.l, b.w, b.h}); }

/// Heading relative to the azimuth of the box center, reduced into [0, pi/2).
/// A box centered at the origin has azimuth 0.
inline double feature_angle(const Box3D& b) {
    const double azimuth = (b.cx == 0.0 && b.cy == 0.0) ? 0.0 : std::atan2(b.cy, b.cx);
    return floored_mod(b.heading - azimuth, half_pi);
}

namespace detail {

inline Vec3 coords(const Vec3& v) noexcept { return v; }
inline Vec3 coords(const Point& p) noexcept { return {p.x, p.y, p.z}; }

// A coordinate on a shared voxel face lands in the higher-index voxel; the
// upper box face is folded into the last voxel.
inline int voxel_axis_index(double u, double extent, int divisions) {
    const double frac = (u + 0.5 * extent) / extent;
    auto i = static_cast<int>(std::floor(frac * divisions));
    return std::clamp(i, 0, divisions - 1);
}

}  // namespace detail

/// Occupancy of points already expressed in the box-local frame of a box with
/// the given extents. Points outside the extents are ignored.
template <typename LocalRange>
double occupancy_local(const LocalRange& local_points, double l, double w, double h, const VoxelScheme& scheme) {
    if (!scheme.valid()) throw ValidationError("voxel scheme counts must be >= 1");
    std::vector<char> hit(static_cast<std::size_t>(scheme.total()), 0);
    int filled = 0;
    for (const auto& p : local_points) {
        const Vec3 u = detail::coords(p);
        if (!inside_extent(u, l, w, h)) continue;
        const int i = detail::voxel_axis_index(u[0], l, scheme.length);
        const int j = detail::voxel_axis_index(u[1], w, scheme.width);
        const int k = detail::voxel_axis_index(u[2], h, scheme.height);
        auto& cell = hit[static_cast<std::size_t>((i * scheme.width + j) * scheme.height + k)];
        if (!cell) {
            cell = 1;
            ++filled;
        }
    }
    return static_cast<double>(filled) / static_cast<double>(scheme.total());
}

inline double feature_occupancy(std::span<const Point> points, const Box3D& b, const VoxelScheme& scheme) {
    std::vector<Vec3> local;
    local.reserve(points.size());
    for (const auto& p : points) local.push_back(to_local(p, b));
    return occupancy_local(local, b.l, b.w, b.h, scheme);
}

inline ObjectFeatures compute_features(const Box3D& b, std::span<const Point> points, const VoxelScheme& scheme) {
    return {feature_distance(b), feature_size(b), feature_angle(b), feature_occupancy(points, b, scheme)};
}

/// Bird's-eye-view rectangle corners, counter-clockwise.
inline std::array<std::array<double, 2>, 4> bev_corners(const Box3D& b) {
    const double c = std::cos(b.heading);
    const double s = std::sin(b.heading);
    const double hl = 0.5 * b.l;
    const double hw = 0.5 * b.w;
    std::array<std::array<double, 2>, 4> out{};
    const double sx[4] = {hl, -hl, -hl, hl};
    const double sy[4] = {hw, hw, -hw, -hw};
    for (int i = 0; i < 4; ++i) out[i] = {b.cx + sx[i] * c - sy[i] * s, b.cy + sx[i] * s + sy[i] * c};
    return out;
}

}  // namespace com
