#include <catch_amalgamated.hpp>

#include <filesystem>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cli_runner.hpp"
#include "com/config.hpp"

namespace fs = std::filesystem;
using testing::run_cli;

namespace {

/// Synthetic manifest and database shared by the tests in this file.
const fs::path& workspace() {
    static const fs::path dir = [] {
        const auto d = fs::temp_directory_path() / "com_test_cli";
        fs::remove_all(d);
        fs::create_directories(d);
        const std::string small = "--set world.vehicles_per_group=1 --set world.pedestrians_per_group=1 ";
        REQUIRE(run_cli("synth " + small + "--out '" + (d / "world").string() + "'").code == 0);
        REQUIRE(run_cli("build-db --manifest '" + (d / "world" / "manifest.jsonl").string() + "' --out '" +
                        (d / "db.bin").string() + "'")
                    .code == 0);
        return d;
    }();
    return dir;
}

std::string db() { return "'" + (workspace() / "db.bin").string() + "'"; }

}  // namespace

TEST_CASE("cluster prints G for the default vehicle rule") {
    const auto r = run_cli("cluster --db " + db());
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind("G=135\n", 0) == 0);
    const auto p = run_cli("cluster --class pedestrian --db " + db());
    CHECK(p.out.rfind("G=15\n", 0) == 0);
}

TEST_CASE("weights with beta = 0 are all one") {
    std::string input;
    for (int i = 0; i < 50; ++i)
        input += R"({"score":)" + std::to_string(0.02 * i) + R"(,"origin":")" + (i % 2 ? "augmented" : "original") +
                 R"(","t":)" + std::to_string(i % 30) + "}\n";
    const auto r = run_cli("weights --set beta=0", input);
    REQUIRE(r.code == 0);
    std::istringstream lines(r.out);
    std::string line;
    int n = 0;
    while (std::getline(lines, line)) {
        CHECK(nlohmann::json::parse(line)["w"].get<double>() == 1.0);
        ++n;
    }
    CHECK(n == 50);
}

TEST_CASE("sample is reproducible from the seed") {
    const auto a = run_cli("sample --db " + db() + " --epoch 3 --k 40 --seed 9");
    const auto b = run_cli("sample --db " + db() + " --epoch 3 --k 40 --seed 9");
    const auto c = run_cli("sample --db " + db() + " --epoch 3 --k 40 --seed 10");
    REQUIRE(a.code == 0);
    CHECK(a.out == b.out);
    CHECK(a.out != c.out);
    const auto j = nlohmann::json::parse(a.out);
    CHECK(j["draws"].size() == 40);
    CHECK(j["seed"] == 9);
}

TEST_CASE("errors map to exit codes with a one-line message") {
    const auto unknown_key = run_cli("config --set nonsense=1");
    CHECK(unknown_key.code == 2);
    CHECK(unknown_key.err.rfind("error code=2 kind=config msg=\"", 0) == 0);
    CHECK(std::count(unknown_key.err.begin(), unknown_key.err.end(), '\n') == 1);

    CHECK(run_cli("frobnicate").code == 2);
    CHECK(run_cli("cluster --db /nonexistent/db.bin").code == 3);

    const auto junk = workspace() / "junk.bin";
    std::ofstream(junk, std::ios::binary) << "not a database at all, just text";
    const auto bad = run_cli("cluster --db '" + junk.string() + "'");
    CHECK(bad.code == 4);
    CHECK(bad.err.find("kind=validation") != std::string::npos);

    CHECK(run_cli("weights", "{\"score\": 2, \"origin\": \"original\", \"t\": 1}\n").code == 4);
}

TEST_CASE("config dump and reload agree") {
    const auto cfg_path = workspace() / "run.cfg";
    REQUIRE(run_cli("config --set lambda=0.7 --set gamma.vehicle=20 --out '" + cfg_path.string() + "'").code == 0);
    const auto again = run_cli("config --config '" + cfg_path.string() + "'");
    REQUIRE(again.code == 0);
    CHECK(again.out == testing::slurp(cfg_path));
    CHECK(again.out.find("lambda = 0.7\n") != std::string::npos);
}

TEST_CASE("help documents every config key") {
    const auto r = run_cli("--help");
    CHECK(r.code == 0);
    for (const auto& k : com::config_schema()) CHECK(r.out.find("  " + k.name + " = ") != std::string::npos);
}

TEST_CASE("compose writes frames and provenance") {
    const auto out = workspace() / "aug";
    const auto r = run_cli("compose --manifest '" + (workspace() / "world" / "manifest.jsonl").string() + "' --db " +
                           db() + " --epoch 2 --out '" + out.string() + "'");
    REQUIRE(r.code == 0);
    CHECK(fs::exists(out / "manifest.jsonl"));
    CHECK(fs::exists(out / "provenance.jsonl"));
    CHECK(r.out.find("inserted=") != std::string::npos);
}
