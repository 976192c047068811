#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <vector>

#include "com/clustering.hpp"
#include "support.hpp"

using namespace com;

namespace {

/// Linear scan over explicit [lo, hi) intervals.
int brute_bin(double v, const std::vector<double>& edges) {
    const double inf = std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b <= edges.size(); ++b) {
        const double lo = b == 0 ? -inf : edges[b - 1];
        const double hi = b == edges.size() ? inf : edges[b];
        if (v >= lo && v < hi) return static_cast<int>(b);
    }
    return -1;
}

int brute_group(const ObjectFeatures& f, const BinningRule& rule) {
    // Enumerate every group and return the one whose key matches.
    for (int g = 0; g < rule.group_count(); ++g) {
        const auto key = group_key(g, rule);
        bool match = true;
        for (auto factor : all_factors) {
            if (!rule.is_active(factor)) continue;
            if (key[static_cast<std::size_t>(factor)] != brute_bin(factor_value(f, factor), rule.edges_of(factor))) {
                match = false;
                break;
            }
        }
        if (match) return g;
    }
    return -1;
}

ObjectFeatures random_features(CounterRng& rng) {
    return {rng.uniform(0, 90), rng.uniform(0.3, 14), rng.uniform(0, half_pi), rng.uniform(0, 1)};
}

}  // namespace

TEST_CASE("default rules give 135 vehicle groups and 15 pedestrian groups") {
    CHECK(default_vehicle_rule().group_count() == 135);
    CHECK(default_pedestrian_rule().group_count() == 15);
    CHECK(default_rule(ObjectClass::cyclist) == default_pedestrian_rule());
}

TEST_CASE("default bin edges") {
    const auto r = default_vehicle_rule();
    CHECK(r.edges_of(Factor::distance) == std::vector<double>{30, 50});
    CHECK(r.edges_of(Factor::size) == std::vector<double>{4, 8});
    CHECK(r.edges_of(Factor::angle) == std::vector<double>{std::numbers::pi / 6, std::numbers::pi / 3});
    CHECK(r.edges_of(Factor::occupancy) == std::vector<double>{0.2, 0.4, 0.6, 0.8});
}

TEST_CASE("assign_group examples") {
    CHECK(assign_group({10, 4.5, 0.1, 0.9}, default_vehicle_rule()) == 19);
    CHECK(group_key(19, default_vehicle_rule()) == GroupKey{0, 1, 0, 4});
    CHECK(assign_group({60, 1.7, 0.3, 0.05}, default_pedestrian_rule()) == 10);
    CHECK(bin_index(30.0, {30, 50}) == 1);
    CHECK(bin_index(std::nextafter(30.0, 0.0), {30, 50}) == 0);
    CHECK(bin_index(1.0, {0.2, 0.4, 0.6, 0.8}) == 4);
    CHECK(bin_index(0.0, {0.2, 0.4, 0.6, 0.8}) == 0);
}

TEST_CASE("reduced rules") {
    const auto v = default_vehicle_rule();
    CHECK(reduced_rule(v, {Factor::distance}).group_count() == 3);
    CHECK(reduced_rule(v, std::vector<Factor>{}).group_count() == 1);
    CHECK(reduced_rule(v, {Factor::occupancy, Factor::distance}).group_count() == 15);
    CHECK(assign_group({99, 99, 1, 1}, reduced_rule(v, std::vector<Factor>{})) == 0);
}

TEST_CASE("assign_group agrees with a brute-force scan on 10,000 random features") {
    CounterRng rng(2024);
    const auto vehicle = default_vehicle_rule();
    const auto ped = default_pedestrian_rule();
    int agree = 0;
    for (int i = 0; i < 10000; ++i) {
        const auto f = random_features(rng);
        agree += assign_group(f, vehicle) == brute_group(f, vehicle);
        agree += assign_group(f, ped) == brute_group(f, ped);
    }
    CHECK(agree == 20000);
}

TEST_CASE("group_key inverts assign_group") {
    const auto rule = default_vehicle_rule();
    for (int g = 0; g < rule.group_count(); ++g) {
        const auto key = group_key(g, rule);
        int rebuilt = 0;
        for (auto f : all_factors) rebuilt = rebuilt * rule.bins_of(f) + key[static_cast<std::size_t>(f)];
        CHECK(rebuilt == g);
    }
}

TEST_CASE("bins are stable under tiny perturbations away from edges") {
    CounterRng rng(77);
    const std::vector<double> edges{30, 50};
    for (int i = 0; i < 10000; ++i) {
        const double v = rng.uniform(0, 90);
        const bool near_edge = std::any_of(edges.begin(), edges.end(), [&](double e) { return std::abs(v - e) < 1e-9; });
        if (near_edge) continue;
        const double eps = rng.uniform(-1e-10, 1e-10);
        CHECK(bin_index(v + eps, edges) == bin_index(v, edges));
    }
}

TEST_CASE("registry partitions the database") {
    CounterRng rng(31);
    std::vector<Frame> frames;
    for (int i = 0; i < 20; ++i) frames.push_back(testing::grid_frame("f" + std::to_string(i), 9, rng, i % 4 ? 15 : 0));
    const auto db = build_database(frames);
    for (auto cls : all_classes) {
        const auto reg = build_registry(db, cls, default_rule(cls));
        double total = 0;
        for (double n : reg.counts()) total += n;
        CHECK(total == static_cast<double>(db.objects(cls).size()));
        CHECK(reg.object_count() == db.objects(cls).size());
        for (const auto& o : db.objects(cls)) {
            const int g = reg.group_of.at(o.object_id);
            const auto& m = reg.members[static_cast<std::size_t>(g)];
            CHECK(std::count(m.begin(), m.end(), o.object_id) == 1);
            const auto& s = reg.sampleable[static_cast<std::size_t>(g)];
            CHECK(std::count(s.begin(), s.end(), o.object_id) == (o.empty() ? 0 : 1));
        }
    }
}

TEST_CASE("empty database gives all-zero counts") {
    const auto reg = build_registry(GtDatabase{}, ObjectClass::vehicle, default_vehicle_rule());
    CHECK(reg.G() == 135);
    for (double n : reg.counts()) CHECK(n == 0.0);
}

TEST_CASE("registry text round trip") {
    CounterRng rng(8);
    std::vector<Frame> frames;
    for (int i = 0; i < 5; ++i) frames.push_back(testing::grid_frame("r" + std::to_string(i), 9, rng, i == 0 ? 0 : 10));
    const auto db = build_database(frames);
    const auto reg = build_registry(db, ObjectClass::vehicle, default_vehicle_rule());
    std::istringstream in(registry_text(reg));
    const auto back = parse_registry(in);
    CHECK(back.G() == reg.G());
    CHECK(back.members == reg.members);
    CHECK(back.sampleable == reg.sampleable);
    CHECK(registry_text(back) == registry_text(reg));

    std::istringstream bad("com-registry 1\nclass vehicle\ngroups 3\nobject 1 7 1\n");
    CHECK_THROWS_AS(parse_registry(bad), ValidationError);
}

TEST_CASE("rule validation") {
    auto r = default_vehicle_rule();
    r.edges[0] = {50, 30};
    CHECK_THROWS_AS(r.validate(), ConfigError);
    ClusteringConfig cfg;
    CHECK_THROWS_AS(apply_clustering_entry(cfg, "rule.vehicle.distance", "50,30"), ConfigError);
    CHECK_THROWS_AS(apply_clustering_entry(cfg, "rule.vehicle.color", "1"), ConfigError);
    CHECK_FALSE(apply_clustering_entry(cfg, "lambda", "1"));
}

TEST_CASE("clustering entries round trip") {
    ClusteringConfig cfg;
    REQUIRE(apply_clustering_entry(cfg, "rule.pedestrian.factors", "distance,size"));
    REQUIRE(apply_clustering_entry(cfg, "rule.pedestrian.size", "1.2,1.9"));
    REQUIRE(apply_clustering_entry(cfg, "voxels.cyclist", "2,1,4"));
    CHECK(cfg.rule(ObjectClass::pedestrian).group_count() == 9);

    ClusteringConfig back;
    for (const auto& [k, v] : clustering_entries(cfg)) REQUIRE(apply_clustering_entry(back, k, v));
    CHECK(back == cfg);
}
