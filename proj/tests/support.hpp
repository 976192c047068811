#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "com/gt_database.hpp"
#include "com/rng.hpp"

namespace testing {

/// Pearson statistic over categories with positive expected mass.
inline double chi_square(const std::vector<std::size_t>& observed, const std::vector<double>& probabilities,
                         std::size_t total, int* dof = nullptr) {
    double stat = 0.0;
    int cells = 0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        const double expected = probabilities[i] * static_cast<double>(total);
        if (expected <= 0.0) continue;
        const double d = static_cast<double>(observed[i]) - expected;
        stat += d * d / expected;
        ++cells;
    }
    if (dof) *dof = cells - 1;
    return stat;
}

inline double chi_square_critical(int dof, double significance = 0.001) {
    boost::math::chi_squared dist(dof);
    return boost::math::quantile(complement(dist, significance));
}

inline com::Box3D random_box(com::CounterRng& rng, double extent = 60.0) {
    return {rng.uniform(-extent, extent), rng.uniform(-extent, extent), rng.uniform(-2.0, 1.0),
            rng.uniform(0.5, 6.0),        rng.uniform(0.5, 3.0),        rng.uniform(0.5, 3.0),
            rng.uniform(-3.14159, 3.14159)};
}

/// A frame with `labels` vehicles on a grid (never overlapping) and points
/// scattered inside and around each box.
inline com::Frame grid_frame(const std::string& id, int labels, com::CounterRng& rng, int points_per_box = 20) {
    com::Frame f;
    f.frame_id = id;
    for (int i = 0; i < labels; ++i) {
        com::Box3D b{10.0 * (i % 5) - 20.0, 10.0 * (i / 5) - 20.0, -0.8, rng.uniform(3.0, 5.0), rng.uniform(1.5, 2.2),
                     rng.uniform(1.4, 1.8), rng.uniform(-3.0, 3.0)};
        f.labels.push_back({b, static_cast<com::ObjectClass>(i % 3), "t" + std::to_string(i), id});
        for (int n = 0; n < points_per_box; ++n) {
            const com::Vec3 local{rng.uniform(-0.7, 0.7) * b.l, rng.uniform(-0.7, 0.7) * b.w,
                                  rng.uniform(-0.7, 0.7) * b.h};
            const auto w = com::to_world(local, b);
            f.points.push_back({static_cast<float>(w[0]), static_cast<float>(w[1]), static_cast<float>(w[2]),
                                static_cast<float>(rng.uniform())});
        }
    }
    return f;
}

}  // namespace testing
