#include <catch_amalgamated.hpp>

#include <algorithm>
#include <vector>

#include "com/scene_composer.hpp"
#include "support.hpp"

using namespace com;

namespace {

GtObject object_at(ObjectId id, const Box3D& b, int points, ObjectClass cls = ObjectClass::vehicle) {
    GtObject o;
    o.object_id = id;
    o.label = {b, cls, "o" + std::to_string(id), "src"};
    for (int i = 0; i < points; ++i) o.points.push_back({0.1f * static_cast<float>(i % 5), 0.0f, 0.0f, 0.5f});
    return o;
}

struct Fixture {
    GtDatabase db;
    GroupRegistry reg;
    SamplingPlan plan;
};

/// One class, one group: uniform GT-Aug over the given objects.
Fixture single_group(std::vector<GtObject> objects, ObjectClass cls = ObjectClass::vehicle) {
    Fixture f;
    for (auto& o : objects) f.db.by_class[class_index(cls)].push_back(std::move(o));
    f.reg = build_registry(f.db, cls, reduced_rule(default_rule(cls), std::vector<Factor>{}));
    f.plan = plan(init_scores(1), f.reg.sampleable_counts(), {1, 30, 0.5, 0.2, CurriculumMode::uniform});
    return f;
}

}  // namespace

TEST_CASE("quota examples") {
    CHECK(quota(5, 15) == 10);
    CHECK(quota(20, 15) == 0);
    CHECK(quota(15, 15) == 0);
    CHECK(quota(0, 0) == 0);
}

TEST_CASE("collide examples") {
    const Box3D a{0, 0, 0, 1, 1, 1, 0};
    CHECK(collide(a, a));
    CHECK_FALSE(collide(a, Box3D{100, 0, 0, 1, 1, 1, 0}));
    CHECK_FALSE(collide(a, Box3D{1, 0, 0, 1, 1, 1, 0}));      // shared edge only
    CHECK_FALSE(collide(a, Box3D{1, 1, 0, 1, 1, 1, 0}));      // shared corner only
    CHECK(collide(a, Box3D{0.99, 0, 0, 1, 1, 1, 0}));
    CHECK(collide(a, Box3D{0, 0, 50, 1, 1, 1, 0}));           // bird's-eye view ignores height
    // A diamond whose vertex pokes into the square, and one that stops short.
    CHECK(collide(a, Box3D{1.2, 0, 0, 1, 1, 1, std::numbers::pi / 4}));
    CHECK_FALSE(collide(a, Box3D{1.25, 0, 0, 1, 1, 1, std::numbers::pi / 4}));
}

TEST_CASE("collide is symmetric") {
    CounterRng rng(6);
    for (int i = 0; i < 5000; ++i) {
        const Box3D a = testing::random_box(rng, 5), b = testing::random_box(rng, 5);
        REQUIRE(collide(a, b) == collide(b, a));
    }
}

TEST_CASE("place examples") {
    CounterRng rng(1);
    const ComposerConfig cfg;
    const auto obj = object_at(0, Box3D{10, 0, 0, 4, 2, 1.5, 0}, 5);
    const auto empty_frame = place({}, obj, rng, cfg);
    REQUIRE(empty_frame.pose);
    CHECK(*empty_frame.pose == obj.label.box);

    const auto blocked = place({Box3D{11, 0.5, 0, 4, 2, 1.5, 0.3}}, obj, rng, cfg);
    CHECK_FALSE(blocked.pose);
    CHECK(blocked.reason == "collision");

    CHECK(place({}, object_at(1, obj.label.box, 0), rng, cfg).reason == "no_points");
}

TEST_CASE("random yaw re-poses blocked objects about the origin") {
    CounterRng rng(3);
    ComposerConfig cfg;
    cfg.random_yaw = true;
    cfg.max_attempts = 50;
    const auto obj = object_at(0, Box3D{10, 0, 0, 4, 2, 1.5, 0}, 5);
    const auto placed = place({obj.label.box}, obj, rng, cfg);
    REQUIRE(placed.pose);
    CHECK(placed.attempts > 1);
    CHECK_THAT(std::hypot(placed.pose->cx, placed.pose->cy), Catch::Matchers::WithinAbs(10.0, 1e-9));
}

TEST_CASE("compose leaves a frame at its threshold untouched") {
    CounterRng rng(2);
    const auto frame = testing::grid_frame("full", 15, rng);
    Frame vehicles_only = frame;
    for (auto& l : vehicles_only.labels) l.cls = ObjectClass::vehicle;
    auto fx = single_group({object_at(0, Box3D{100, 100, 0, 4, 2, 1.5, 0}, 10)});
    ClassSamplings s{};
    s[0] = ClassSampling{&fx.reg, &fx.plan};
    const AugmentedFrame out = compose(vehicles_only, DatabaseIndex(fx.db), s, ComposerConfig{}, rng);
    CHECK(out.frame == vehicles_only);
    CHECK(out.provenance.empty());
}

TEST_CASE("compose inserts one object into a frame one short of the threshold") {
    CounterRng rng(2);
    Frame frame = testing::grid_frame("short", 14, rng);
    for (auto& l : frame.labels) l.cls = ObjectClass::vehicle;
    auto fx = single_group({object_at(0, Box3D{100, 100, 0, 4, 2, 1.5, 0}, 12)});
    ClassSamplings s{};
    s[0] = ClassSampling{&fx.reg, &fx.plan};
    const AugmentedFrame out = compose(frame, DatabaseIndex(fx.db), s, ComposerConfig{}, rng);
    REQUIRE(out.inserted_count() == 1);
    CHECK(out.frame.points.size() == frame.points.size() + 12);
    CHECK(out.frame.labels.size() == 15);
    CHECK(out.origins.back() == ObjectOrigin::augmented);
    CHECK(out.frame.labels.back().frame_id == "short");
}

TEST_CASE("the second copy of an object is rejected") {
    CounterRng rng(2);
    const Box3D b{30, 0, 0, 4, 2, 1.5, 0};
    // Same pose twice under different ids.
    auto fx = single_group({object_at(0, b, 4), object_at(1, b, 4)});
    ClassSamplings s{};
    s[0] = ClassSampling{&fx.reg, &fx.plan};
    const AugmentedFrame out = compose(Frame{"e", {}, {}}, DatabaseIndex(fx.db), s, ComposerConfig{}, rng);
    REQUIRE(out.provenance.size() == 2);
    CHECK(out.provenance[0].accepted);
    CHECK_FALSE(out.provenance[1].accepted);
    CHECK(out.provenance[1].skip_reason == "collision");
}

TEST_CASE("compose invariants on random frames") {
    CounterRng rng(42);
    std::vector<GtObject> pool;
    for (ObjectId id = 0; id < 60; ++id) {
        Box3D b = testing::random_box(rng, 40);
        b.l = rng.uniform(3, 5);
        b.w = rng.uniform(1.5, 2.2);
        pool.push_back(object_at(id, b, 1 + static_cast<int>(rng.index(30))));
    }
    auto fx = single_group(pool);
    const DatabaseIndex index(fx.db);
    ClassSamplings s{};
    s[0] = ClassSampling{&fx.reg, &fx.plan};
    for (int i = 0; i < 100; ++i) {
        Frame frame = testing::grid_frame("r" + std::to_string(i), static_cast<int>(rng.index(20)), rng);
        for (auto& l : frame.labels) l.cls = ObjectClass::vehicle;
        CounterRng local(derive_seed(5, static_cast<std::uint64_t>(i)));
        const AugmentedFrame out = compose(frame, index, s, ComposerConfig{}, local);

        // Originals are kept verbatim, in front.
        REQUIRE(std::equal(frame.labels.begin(), frame.labels.end(), out.frame.labels.begin()));
        REQUIRE(std::equal(frame.points.begin(), frame.points.end(), out.frame.points.begin()));
        std::size_t added = 0;
        for (const auto& r : out.provenance)
            if (r.accepted) added += r.point_count;
        CHECK(out.frame.points.size() == frame.points.size() + added);
        CHECK(out.provenance.size() <= static_cast<std::size_t>(quota(static_cast<int>(frame.labels.size()), 15)));
        for (std::size_t a = 0; a < out.frame.labels.size(); ++a)
            for (std::size_t b = a + 1; b < out.frame.labels.size(); ++b)
                REQUIRE_FALSE(collide(out.frame.labels[a].box, out.frame.labels[b].box));

        CounterRng again(derive_seed(5, static_cast<std::uint64_t>(i)));
        CHECK(compose(frame, index, s, ComposerConfig{}, again) == out);
    }
}

TEST_CASE("removing covered points is opt-in") {
    CounterRng rng(2);
    Frame frame{"bg", {{30.0f, 0.0f, 0.0f, 0.1f}, {-30.0f, 0.0f, 0.0f, 0.1f}}, {}};
    auto fx = single_group({object_at(0, Box3D{30, 0, 0, 4, 2, 1.5, 0}, 3)});
    ClassSamplings s{};
    s[0] = ClassSampling{&fx.reg, &fx.plan};
    ComposerConfig cfg;
    CHECK(compose(frame, DatabaseIndex(fx.db), s, cfg, rng).frame.points.size() == 5);
    cfg.remove_covered_points = true;
    const auto out = compose(frame, DatabaseIndex(fx.db), s, cfg, rng);
    CHECK(out.frame.points.size() == 4);
    CHECK(out.frame.points[0].x == -30.0f);
}

TEST_CASE("provenance lines") {
    CounterRng rng(2);
    auto fx = single_group({object_at(7, Box3D{30, 0, 0, 4, 2, 1.5, 0}, 3), object_at(8, Box3D{30, 0, 0, 4, 2, 1.5, 0}, 3)});
    ClassSamplings s{};
    s[0] = ClassSampling{&fx.reg, &fx.plan};
    const auto out = compose(Frame{"p", {}, {}}, DatabaseIndex(fx.db), s, ComposerConfig{}, rng);
    const auto j = nlohmann::json::parse(provenance_line(out));
    CHECK(j["frame_id"] == "p");
    CHECK(j["inserted"].size() == 1);
    CHECK(j["skipped"].size() == 1);
    CHECK(j["skipped"][0]["reason"] == "collision");
    CHECK(j["inserted"][0]["points"] == 3);
}
