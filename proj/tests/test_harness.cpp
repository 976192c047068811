#include <catch_amalgamated.hpp>

#include <algorithm>
#include <sstream>
#include <vector>

#include "com/harness.hpp"

using namespace com;

namespace {

std::string csv(const TrendReport& r) {
    std::ostringstream out;
    write_trend_csv(out, r);
    return out.str();
}

HarnessConfig small_config() {
    HarnessConfig cfg;
    cfg.world.vehicles_per_group = 2;
    cfg.world.pedestrians_per_group = 1;
    return cfg;
}

}  // namespace

TEST_CASE("synthetic world covers every group") {
    const auto world = generate_synthetic_db(SyntheticSpec{}, 3);
    const auto vehicles = build_registry(world.db, ObjectClass::vehicle, default_vehicle_rule());
    REQUIRE(vehicles.G() == 135);
    for (int g = 0; g < 135; ++g) {
        INFO("group " << g);
        CHECK(vehicles.members[static_cast<std::size_t>(g)].size() >= 1);
        CHECK(vehicles.sampleable[static_cast<std::size_t>(g)].size() >= 1);
    }
    const auto peds = build_registry(world.db, ObjectClass::pedestrian, default_pedestrian_rule());
    for (int g = 0; g < peds.G(); ++g) CHECK(peds.members[static_cast<std::size_t>(g)].size() >= 1);
}

TEST_CASE("synthetic world is deterministic in its seed") {
    const SyntheticSpec spec;
    const auto a = serialize_database(generate_synthetic_db(spec, 9).db);
    const auto b = serialize_database(generate_synthetic_db(spec, 9).db);
    const auto c = serialize_database(generate_synthetic_db(spec, 10).db);
    CHECK(a == b);
    CHECK(a != c);
}

TEST_CASE("synthetic world with no objects is empty") {
    SyntheticSpec spec;
    spec.vehicles_per_group = 0;
    spec.pedestrians_per_group = 0;
    const auto world = generate_synthetic_db(spec, 1);
    CHECK(world.db.size() == 0);
    CHECK(world.frames.empty());
}

TEST_CASE("synthetic frames are collision free and thin out with distance") {
    const auto world = generate_synthetic_db(SyntheticSpec{}, 4);
    for (const auto& f : world.frames)
        for (std::size_t a = 0; a < f.labels.size(); ++a)
            for (std::size_t b = a + 1; b < f.labels.size(); ++b) REQUIRE_FALSE(collide(f.labels[a].box, f.labels[b].box));

    double near = 0, far = 0;
    int n_near = 0, n_far = 0;
    for (const auto& o : world.db.objects(ObjectClass::vehicle)) {
        if (o.empty()) continue;
        const double per_voxel = static_cast<double>(o.points.size()) / (o.features.occupancy * vehicle_voxels.total());
        if (o.features.distance < 30) near += per_voxel, ++n_near;
        if (o.features.distance >= 50) far += per_voxel, ++n_far;
    }
    CHECK(near / n_near > far / n_far);
}

TEST_CASE("difficulty model range and monotonicity") {
    const DifficultyModel m;
    CounterRng rng(1);
    for (int i = 0; i < 2000; ++i) {
        const ObjectFeatures f{rng.uniform(0, 120), rng.uniform(0.5, 15), rng.uniform(0, half_pi), rng.uniform(0, 1)};
        const double d = m(f);
        REQUIRE(d >= 0.0);
        REQUIRE(d <= 1.0);
        ObjectFeatures farther = f;
        farther.distance += rng.uniform(0, 20);
        REQUIRE(m(farther) >= d);
        ObjectFeatures fuller = f;
        fuller.occupancy = std::min(1.0, f.occupancy + rng.uniform(0, 0.5));
        REQUIRE(m(fuller) <= d);
    }
}

TEST_CASE("detector proxy is monotone in skill and anti-monotone in difficulty") {
    DetectorProxy p;
    p.noise = 0.0;
    CounterRng rng(1);
    CHECK(p.score(15, 30, 0.2, rng) == Catch::Approx(0.3));
    CHECK(p.score(1, 30, 0.9, rng) == 0.0);
    CHECK(p.score(30, 30, 0.0, rng) == 1.0);
    for (int t = 1; t < 30; ++t) {
        CHECK(p.score(t + 1, 30, 0.3, rng) >= p.score(t, 30, 0.3, rng));
        CHECK(p.score(t, 30, 0.4, rng) <= p.score(t, 30, 0.3, rng));
    }
}

TEST_CASE("experiment is deterministic and independent of worker count") {
    HarnessConfig cfg = small_config();
    cfg.seed = 5;
    const auto a = csv(run_experiment(cfg));
    const auto b = csv(run_experiment(cfg));
    cfg.workers = 4;
    const auto c = csv(run_experiment(cfg));
    CHECK(a == b);
    CHECK(a == c);
}

TEST_CASE("pools hold exactly the inserted objects of the epoch") {
    HarnessConfig cfg = small_config();
    const auto r = run_experiment(cfg);
    REQUIRE(r.epochs.size() == 30);
    for (const auto& e : r.epochs) {
        CHECK(e.pool_sizes == e.inserted_by_group);
        std::size_t total = 0;
        for (auto n : e.inserted_by_group) total += n;
        CHECK(total == e.inserted);
    }
}

TEST_CASE("tertile means account for all probability mass") {
    const auto r = run_experiment(small_config());
    const std::size_t G = static_cast<std::size_t>(r.group_total);
    for (const auto& e : r.epochs) {
        const double mass = e.easy * static_cast<double>(G / 3) + e.medium * static_cast<double>(2 * G / 3 - G / 3) +
                            e.hard * static_cast<double>(G - 2 * G / 3);
        CHECK_THAT(mass, Catch::Matchers::WithinAbs(1.0, 1e-12));
    }
}

TEST_CASE("noise-free runs have a rising threshold and rising ranks") {
    HarnessConfig cfg = small_config();
    cfg.detector.noise = 0.0;
    const auto r = run_experiment(cfg);
    for (std::size_t e = 1; e < r.epochs.size(); ++e) {
        CHECK(r.epochs[e].tau >= r.epochs[e - 1].tau);
        CHECK(r.epochs[e].rank >= r.epochs[e - 1].rank);
    }
}

TEST_CASE("uniform mode keeps tertile means flat") {
    HarnessConfig cfg = small_config();
    cfg.mode = CurriculumMode::uniform;
    const auto r = run_experiment(cfg);
    const double flat = 1.0 / r.group_total;
    for (std::size_t e = 1; e < r.epochs.size(); ++e) {
        CHECK_THAT(r.epochs[e].easy, Catch::Matchers::WithinRel(flat, 0.15));
        CHECK_THAT(r.epochs[e].medium, Catch::Matchers::WithinRel(flat, 0.15));
        CHECK_THAT(r.epochs[e].hard, Catch::Matchers::WithinRel(flat, 0.15));
    }
}

TEST_CASE("invalid configs fail before any work") {
    HarnessConfig cfg;
    cfg.sigma = -1;
    CHECK_THROWS_AS(run_experiment(cfg), ConfigError);
    cfg = {};
    cfg.total_epochs = 10;  // loss T left at 30
    CHECK_THROWS_AS(run_experiment(cfg), ConfigError);
    cfg = {};
    cfg.world.max_objects_per_frame = 0;
    CHECK_THROWS_AS(run_experiment(cfg), ConfigError);
}

TEST_CASE("sweep rows") {
    HarnessConfig cfg = small_config();
    cfg.total_epochs = 10;
    cfg.loss.total = 10;
    cfg.loss.tipping = 10;
    CHECK(sweep(cfg, {{0.5, 0.2, CurriculumMode::curriculum}}).size() == 1);
    CHECK_THROWS_AS(sweep(cfg, {}), ConfigError);

    const auto rows = sweep(cfg, {{0.5, 0.2, CurriculumMode::curriculum}, {0.5, 0.2, CurriculumMode::anti_curriculum}});
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].cell.lambda == rows[1].cell.lambda);
    CHECK(rows[0].cell.sigma == rows[1].cell.sigma);
    CHECK(rows[0].cell.mode != rows[1].cell.mode);
}

TEST_CASE("larger lambda reaches the hardest rank no later") {
    HarnessConfig cfg = small_config();
    std::vector<SweepCell> grid;
    for (double l : {0.5, 1.0, 1.2, 1.5, 2.0, 3.0}) grid.push_back({l, 0.2, CurriculumMode::curriculum});
    const auto rows = sweep(cfg, grid);
    auto reached = [](const SweepRow& r) { return r.hardest_rank_epoch < 0 ? 1 << 30 : r.hardest_rank_epoch; };
    CHECK(rows[0].hardest_rank_epoch == -1);
    for (std::size_t i = 1; i < rows.size(); ++i) CHECK(reached(rows[i]) <= reached(rows[i - 1]));
    CHECK(rows[1].hardest_rank_epoch == 30);
    CHECK(rows[4].hardest_rank_epoch == 15);
}

TEST_CASE("trend outputs") {
    const auto r = run_experiment(small_config());
    const auto text = csv(r);
    CHECK(text.find("epoch,easy,medium,hard,tau,mu,rank") != std::string::npos);
    CHECK(std::count(text.begin(), text.end(), '\n') == 32);
    const auto svg = trend_svg(average_tertiles({r}));
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("polyline") != std::string::npos);
}
