#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "com/clustering.hpp"
#include "com/error.hpp"
#include "com/harness.hpp"
#include "com/text.hpp"

namespace com {

/// Paths used by CLI commands when no flag overrides them. Empty means unset.
struct RunPaths {
    std::string manifest;
    std::string db;
    std::string registry;
    std::string scores;
    std::string output;

    friend bool operator==(const RunPaths&, const RunPaths&) = default;
};

/// Every tunable of the pipeline. The harness settings double as the
/// defaults for sampling, weighting and composition.
struct RunConfig {
    HarnessConfig run;
    RunPaths paths;

    void validate() const { run.validate(); }

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

struct ConfigKey {
    std::string name;
    std::string help;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, std::string_view)> set;
};

namespace detail {

inline bool parse_bool(std::string_view s, std::string_view key) {
    const auto t = trim(s);
    if (t == "true" || t == "1") return true;
    if (t == "false" || t == "0") return false;
    throw ConfigError("invalid boolean '" + std::string(t) + "' for " + std::string(key));
}

inline ConfigKey real_key(std::string name, std::string help, double HarnessConfig::*outer) {
    return {name, std::move(help), [outer](const RunConfig& c) { return format_double(c.run.*outer); },
            [outer, name](RunConfig& c, std::string_view v) { c.run.*outer = parse_double(v, name); }};
}

template <typename S>
ConfigKey nested_real(std::string name, std::string help, S HarnessConfig::*part, double S::*field) {
    return {name, std::move(help), [=](const RunConfig& c) { return format_double(c.run.*part.*field); },
            [=](RunConfig& c, std::string_view v) { c.run.*part.*field = parse_double(v, name); }};
}

template <typename S>
ConfigKey nested_int(std::string name, std::string help, S HarnessConfig::*part, int S::*field) {
    return {name, std::move(help), [=](const RunConfig& c) { return std::to_string(c.run.*part.*field); },
            [=](RunConfig& c, std::string_view v) { c.run.*part.*field = static_cast<int>(parse_int(v, name)); }};
}

template <typename S>
ConfigKey nested_bool(std::string name, std::string help, S HarnessConfig::*part, bool S::*field) {
    return {name, std::move(help), [=](const RunConfig& c) { return std::string(c.run.*part.*field ? "true" : "false"); },
            [=](RunConfig& c, std::string_view v) { c.run.*part.*field = parse_bool(v, name); }};
}

inline ConfigKey path_key(std::string name, std::string help, std::string RunPaths::*field) {
    return {name, std::move(help), [=](const RunConfig& c) { return c.paths.*field; },
            [=](RunConfig& c, std::string_view v) { c.paths.*field = std::string(trim(v)); }};
}

inline std::vector<ConfigKey> build_schema() {
    using H = HarnessConfig;
    std::vector<ConfigKey> keys;
    keys.push_back(nested_real("alpha", "momentum of the adaptive threshold tau", &H::loss, &LossWeightConfig::alpha));
    keys.push_back(nested_real("beta", "loss weight curve shape (< 0 is easy-to-hard)", &H::loss, &LossWeightConfig::beta));
    keys.push_back(nested_real("height", "loss re-weighting height H", &H::loss, &LossWeightConfig::height));
    keys.push_back(nested_real("tipping", "tipping epoch t_r", &H::loss, &LossWeightConfig::tipping));
    keys.push_back({"epochs", "total epochs T",
                    [](const RunConfig& c) { return std::to_string(c.run.total_epochs); },
                    [](RunConfig& c, std::string_view v) {
                        c.run.total_epochs = static_cast<int>(parse_int(v, "epochs"));
                        c.run.loss.total = c.run.total_epochs;
                    }});
    keys.push_back(real_key("lambda", "curriculum pacing speed", &H::lambda));
    keys.push_back(real_key("sigma", "width of the Gaussian sampling curve", &H::sigma));
    keys.push_back({"mode", "curriculum | anti_curriculum | uniform",
                    [](const RunConfig& c) { return std::string(mode_name(c.run.mode)); },
                    [](RunConfig& c, std::string_view v) { c.run.mode = parse_mode(trim(v)); }});
    for (auto cls : all_classes) {
        const std::string cn(class_name(cls));
        keys.push_back({"gamma." + cn, "object count threshold for " + cn,
                        [cls](const RunConfig& c) { return std::to_string(c.run.composer.threshold(cls)); },
                        [cls, cn](RunConfig& c, std::string_view v) {
                            c.run.composer.thresholds[class_index(cls)] = static_cast<int>(parse_int(v, "gamma." + cn));
                        }});
    }
    keys.push_back(nested_int("composer.max_attempts", "placement attempts per object (random_yaw only)", &H::composer,
                              &ComposerConfig::max_attempts));
    keys.push_back(nested_bool("composer.random_yaw", "retry rejected objects at a random yaw about the sensor",
                               &H::composer, &ComposerConfig::random_yaw));
    keys.push_back(nested_real("composer.touch_tolerance", "BEV overlap (m) still counted as touching",
                               &H::composer, &ComposerConfig::touch_tolerance));
    keys.push_back(nested_bool("composer.remove_covered_points", "drop scene points inside inserted boxes",
                               &H::composer, &ComposerConfig::remove_covered_points));
    keys.push_back({"seed", "base random seed",
                    [](const RunConfig& c) { return std::to_string(c.run.seed); },
                    [](RunConfig& c, std::string_view v) {
                        const auto s = parse_int(v, "seed");
                        if (s < 0) throw ConfigError("seed must be >= 0");
                        c.run.seed = static_cast<std::uint64_t>(s);
                    }});
    keys.push_back({"workers", "worker threads, 0 = all cores",
                    [](const RunConfig& c) { return std::to_string(c.run.workers); },
                    [](RunConfig& c, std::string_view v) {
                        const auto w = parse_int(v, "workers");
                        if (w < 0) throw ConfigError("workers must be >= 0");
                        c.run.workers = static_cast<unsigned>(w);
                    }});
    keys.push_back({"target", "class the experiment trains on",
                    [](const RunConfig& c) { return std::string(class_name(c.run.target)); },
                    [](RunConfig& c, std::string_view v) {
                        try {
                            c.run.target = parse_class(trim(v));
                        } catch (const ValidationError& e) {
                            throw ConfigError(std::string("target: ") + e.what());
                        }
                    }});
    keys.push_back(nested_int("world.vehicles_per_group", "synthetic vehicles per vehicle group", &H::world,
                              &SyntheticSpec::vehicles_per_group));
    keys.push_back(nested_int("world.pedestrians_per_group", "synthetic pedestrians per pedestrian group", &H::world,
                              &SyntheticSpec::pedestrians_per_group));
    keys.push_back(nested_int("world.min_objects_per_frame", "fewest labels per synthetic frame", &H::world,
                              &SyntheticSpec::min_objects_per_frame));
    keys.push_back(nested_int("world.max_objects_per_frame", "most labels per synthetic frame", &H::world,
                              &SyntheticSpec::max_objects_per_frame));
    keys.push_back(nested_int("world.background_points", "ground points per synthetic frame", &H::world,
                              &SyntheticSpec::background_points));
    keys.push_back(nested_real("world.min_distance", "nearest synthetic object (m)", &H::world, &SyntheticSpec::min_distance));
    keys.push_back(nested_real("world.max_distance", "farthest synthetic object (m)", &H::world, &SyntheticSpec::max_distance));
    keys.push_back(nested_real("world.peak_density", "points per occupied voxel at the sensor", &H::world,
                               &SyntheticSpec::peak_density));
    keys.push_back(nested_real("world.sensor_height", "sensor height above ground (m)", &H::world,
                               &SyntheticSpec::sensor_height));
    keys.push_back(nested_real("difficulty.distance", "distance coefficient of the latent difficulty", &H::difficulty,
                               &DifficultyModel::distance_coef));
    keys.push_back(nested_real("difficulty.occupancy", "occupancy coefficient of the latent difficulty", &H::difficulty,
                               &DifficultyModel::occupancy_coef));
    keys.push_back(nested_real("difficulty.size", "size-deviation coefficient of the latent difficulty", &H::difficulty,
                               &DifficultyModel::size_coef));
    keys.push_back(nested_real("difficulty.distance_scale", "distance normalizer (m)", &H::difficulty,
                               &DifficultyModel::distance_scale));
    keys.push_back(nested_real("difficulty.typical_size", "size with zero deviation (m)", &H::difficulty,
                               &DifficultyModel::typical_size));
    keys.push_back(nested_real("detector.noise", "std-dev of detector score noise", &H::detector, &DetectorProxy::noise));
    keys.push_back(nested_real("detector.skill_start", "detector skill before epoch 1", &H::detector,
                               &DetectorProxy::skill_start));
    for (const auto& [name, value] : clustering_entries(ClusteringConfig{})) {
        const std::string help = name.ends_with(".factors") ? "active factors, comma-separated or none"
                                 : name.starts_with("voxels.") ? "voxel counts length,width,height"
                                                               : "ascending bin edges, comma-separated or none";
        keys.push_back({name, help,
                        [name](const RunConfig& c) {
                            for (const auto& [k, v] : clustering_entries(c.run.clustering))
                                if (k == name) return v;
                            return std::string{};
                        },
                        [name](RunConfig& c, std::string_view v) { apply_clustering_entry(c.run.clustering, name, v); }});
    }
    keys.push_back(path_key("path.manifest", "frame manifest (JSON Lines)", &RunPaths::manifest));
    keys.push_back(path_key("path.db", "object database file", &RunPaths::db));
    keys.push_back(path_key("path.registry", "group registry file", &RunPaths::registry));
    keys.push_back(path_key("path.scores", "group score log", &RunPaths::scores));
    keys.push_back(path_key("path.output", "primary output file or directory", &RunPaths::output));
    return keys;
}

}  // namespace detail

inline const std::vector<ConfigKey>& config_schema() {
    static const std::vector<ConfigKey> schema = detail::build_schema();
    return schema;
}

inline const ConfigKey& config_key(std::string_view name) {
    for (const auto& k : config_schema())
        if (k.name == name) return k;
    throw ConfigError("unknown config key '" + std::string(name) + "'");
}

inline void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value) {
    config_key(trim(key)).set(cfg, value);
}

/// `key = value` per line; `#` starts a comment. Unknown or repeated keys are
/// errors. Keys not mentioned keep their defaults.
inline RunConfig parse_config(std::istream& in, RunConfig cfg = {}) {
    std::set<std::string, std::less<>> seen;
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        auto body = std::string_view(line);
        if (const auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
        body = trim(body);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("config line " + std::to_string(number) + ": expected 'key = value'");
        const auto key = trim(body.substr(0, eq));
        if (!seen.insert(std::string(key)).second) throw ConfigError("config key '" + std::string(key) + "' repeated");
        set_config_value(cfg, key, trim(body.substr(eq + 1)));
    }
    cfg.validate();
    return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path.string() + "'");
    return parse_config(in);
}

inline void dump_config(std::ostream& out, const RunConfig& cfg) {
    for (const auto& k : config_schema()) out << k.name << " = " << k.get(cfg) << '\n';
}

inline std::string config_text(const RunConfig& cfg) {
    std::ostringstream out;
    dump_config(out, cfg);
    return out.str();
}

/// One line per key with its default, for --help.
inline std::string config_help() {
    const RunConfig defaults;
    std::ostringstream out;
    out << "Config keys (file: key = value, '#' comments):\n";
    for (const auto& k : config_schema())
        out << "  " << k.name << " = " << k.get(defaults) << "\n      " << k.help << '\n';
    return out.str();
}

}  // namespace com
