#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "com/error.hpp"
#include "com/gt_database.hpp"
#include "com/text.hpp"

namespace com {

/// Clustering factors in their fixed composition order.
enum class Factor : std::uint8_t { distance = 0, size = 1, angle = 2, occupancy = 3 };

inline constexpr std::size_t factor_count = 4;
inline constexpr std::array<Factor, factor_count> all_factors{Factor::distance, Factor::size, Factor::angle,
                                                              Factor::occupancy};

inline std::string_view factor_name(Factor f) {
    switch (f) {
        case Factor::distance: return "distance";
        case Factor::size: return "size";
        case Factor::angle: return "angle";
        case Factor::occupancy: return "occupancy";
    }
    return "unknown";
}

inline Factor parse_factor(std::string_view name) {
    for (auto f : all_factors)
        if (factor_name(f) == name) return f;
    throw ConfigError("unknown clustering factor '" + std::string(name) + "'");
}

inline double factor_value(const ObjectFeatures& f, Factor factor) {
    switch (factor) {
        case Factor::distance: return f.distance;
        case Factor::size: return f.size;
        case Factor::angle: return f.angle;
        case Factor::occupancy: return f.occupancy;
    }
    return 0.0;
}

/// Interior bin edges per factor plus the set of active factors.
///
/// Every bin is [lo, hi). The first bin starts at the factor's domain minimum
/// and the last is open above, so a closed upper end such as occupancy
/// [0.8, 1] needs no special case.
struct BinningRule {
    std::array<std::vector<double>, factor_count> edges;
    std::array<bool, factor_count> active{};

    const std::vector<double>& edges_of(Factor f) const { return edges[static_cast<std::size_t>(f)]; }
    bool is_active(Factor f) const { return active[static_cast<std::size_t>(f)]; }
    int bins_of(Factor f) const { return static_cast<int>(edges_of(f).size()) + 1; }

    /// G: product of bin counts over the active factors (1 when none are).
    int group_count() const {
        int g = 1;
        for (auto f : all_factors)
            if (is_active(f)) g *= bins_of(f);
        return g;
    }

    void validate() const {
        for (auto f : all_factors) {
            const auto& e = edges_of(f);
            for (std::size_t i = 0; i < e.size(); ++i) {
                if (!std::isfinite(e[i])) throw ConfigError("non-finite bin edge for " + std::string(factor_name(f)));
                if (i > 0 && !(e[i] > e[i - 1]))
                    throw ConfigError("bin edges for " + std::string(factor_name(f)) + " must be strictly increasing");
            }
        }
    }

    friend bool operator==(const BinningRule&, const BinningRule&) = default;
};

inline BinningRule make_rule(std::initializer_list<Factor> active_factors) {
    BinningRule r;
    r.edges[0] = {30.0, 50.0};
    r.edges[1] = {4.0, 8.0};
    r.edges[2] = {std::numbers::pi / 6.0, std::numbers::pi / 3.0};
    r.edges[3] = {0.2, 0.4, 0.6, 0.8};
    for (auto f : active_factors) r.active[static_cast<std::size_t>(f)] = true;
    return r;
}

/// All four factors: 3 x 3 x 3 x 5 = 135 groups.
inline BinningRule default_vehicle_rule() {
    return make_rule({Factor::distance, Factor::size, Factor::angle, Factor::occupancy});
}

/// Distance and occupancy only: 3 x 5 = 15 groups.
inline BinningRule default_pedestrian_rule() { return make_rule({Factor::distance, Factor::occupancy}); }

inline BinningRule default_rule(ObjectClass c) {
    return c == ObjectClass::vehicle ? default_vehicle_rule() : default_pedestrian_rule();
}

/// Same edges, only `factors` active. An empty set gives G = 1.
inline BinningRule reduced_rule(const BinningRule& rule, std::initializer_list<Factor> factors) {
    BinningRule r = rule;
    r.active.fill(false);
    for (auto f : factors) r.active[static_cast<std::size_t>(f)] = true;
    return r;
}

inline BinningRule reduced_rule(const BinningRule& rule, const std::vector<Factor>& factors) {
    BinningRule r = rule;
    r.active.fill(false);
    for (auto f : factors) r.active[static_cast<std::size_t>(f)] = true;
    return r;
}

/// Number of edges <= value, i.e. the index of the half-open bin holding it.
inline int bin_index(double value, const std::vector<double>& edges) {
    return static_cast<int>(std::upper_bound(edges.begin(), edges.end(), value) - edges.begin());
}

/// Row-major composition over (distance, size, angle, occupancy), skipping
/// inactive factors.
inline int assign_group(const ObjectFeatures& features, const BinningRule& rule) {
    int index = 0;
    for (auto f : all_factors) {
        if (!rule.is_active(f)) continue;
        index = index * rule.bins_of(f) + bin_index(factor_value(features, f), rule.edges_of(f));
    }
    return index;
}

using GroupKey = std::array<int, factor_count>;  // -1 marks an inactive factor

inline GroupKey group_key(int group, const BinningRule& rule) {
    GroupKey key{-1, -1, -1, -1};
    for (int i = static_cast<int>(factor_count) - 1; i >= 0; --i) {
        const auto f = all_factors[static_cast<std::size_t>(i)];
        if (!rule.is_active(f)) continue;
        key[static_cast<std::size_t>(i)] = group % rule.bins_of(f);
        group /= rule.bins_of(f);
    }
    return key;
}

/// Membership of one class's objects in difficulty groups.
struct GroupRegistry {
    ObjectClass cls = ObjectClass::vehicle;
    int group_total = 1;
    std::vector<GroupKey> keys;
    std::vector<std::vector<ObjectId>> members;     // every object, ascending id
    std::vector<std::vector<ObjectId>> sampleable;  // members with >= 1 point
    std::unordered_map<ObjectId, int> group_of;

    int G() const noexcept { return group_total; }

    std::vector<double> counts() const {
        std::vector<double> n;
        n.reserve(members.size());
        for (const auto& m : members) n.push_back(static_cast<double>(m.size()));
        return n;
    }

    /// n_g restricted to objects that can actually be drawn.
    std::vector<double> sampleable_counts() const {
        std::vector<double> n;
        n.reserve(sampleable.size());
        for (const auto& m : sampleable) n.push_back(static_cast<double>(m.size()));
        return n;
    }

    std::size_t object_count() const noexcept { return group_of.size(); }

    void add(ObjectId id, int group, bool has_points) {
        if (group < 0 || group >= group_total) throw ValidationError("group index out of range");
        if (!group_of.emplace(id, group).second) throw ValidationError("object assigned twice");
        members[static_cast<std::size_t>(group)].push_back(id);
        if (has_points) sampleable[static_cast<std::size_t>(group)].push_back(id);
    }
};

inline GroupRegistry empty_registry(ObjectClass cls, const BinningRule& rule) {
    rule.validate();
    GroupRegistry reg;
    reg.cls = cls;
    reg.group_total = rule.group_count();
    reg.members.resize(static_cast<std::size_t>(reg.group_total));
    reg.sampleable.resize(static_cast<std::size_t>(reg.group_total));
    reg.keys.reserve(static_cast<std::size_t>(reg.group_total));
    for (int g = 0; g < reg.group_total; ++g) reg.keys.push_back(group_key(g, rule));
    return reg;
}

inline GroupRegistry build_registry(const GtDatabase& db, ObjectClass cls, const BinningRule& rule) {
    GroupRegistry reg = empty_registry(cls, rule);
    for (const auto& o : db.objects(cls)) reg.add(o.object_id, assign_group(o.features, rule), !o.empty());
    return reg;
}

// ---------------------------------------------------------------------------
// Plain-text configuration
// ---------------------------------------------------------------------------

/// Binning rules and voxel schemes for every class.
///
/// Keys (one `key = value` per line in the run config):
///   rule.<class>.<factor>   comma-separated interior edges, or `none`
///   rule.<class>.factors    comma-separated active factors, or `none`
///   voxels.<class>          `length,width,height` voxel counts
/// <class> is vehicle | pedestrian | cyclist, <factor> is
/// distance | size | angle | occupancy.
struct ClusteringConfig {
    std::array<BinningRule, class_count> rules{default_vehicle_rule(), default_pedestrian_rule(),
                                               default_pedestrian_rule()};
    VoxelSchemes voxels = default_voxel_schemes;

    const BinningRule& rule(ObjectClass c) const { return rules[class_index(c)]; }

    friend bool operator==(const ClusteringConfig&, const ClusteringConfig&) = default;
};

inline std::string factor_list(const BinningRule& rule) {
    std::string out;
    for (auto f : all_factors) {
        if (!rule.is_active(f)) continue;
        if (!out.empty()) out += ',';
        out += factor_name(f);
    }
    return out.empty() ? "none" : out;
}

inline std::vector<Factor> parse_factor_list(std::string_view s) {
    std::vector<Factor> out;
    if (trim(s).empty() || trim(s) == "none") return out;
    for (const auto& name : split(s, ',')) out.push_back(parse_factor(name));
    return out;
}

inline std::vector<std::pair<std::string, std::string>> clustering_entries(const ClusteringConfig& cfg) {
    std::vector<std::pair<std::string, std::string>> out;
    for (auto c : all_classes) {
        const std::string cn(class_name(c));
        const auto& r = cfg.rule(c);
        for (auto f : all_factors) out.emplace_back("rule." + cn + "." + std::string(factor_name(f)), join_doubles(r.edges_of(f)));
        out.emplace_back("rule." + cn + ".factors", factor_list(r));
    }
    for (auto c : all_classes) {
        const auto& v = cfg.voxels[class_index(c)];
        out.emplace_back("voxels." + std::string(class_name(c)),
                         std::to_string(v.length) + "," + std::to_string(v.width) + "," + std::to_string(v.height));
    }
    return out;
}

/// Returns false when the key is not a clustering key.
inline bool apply_clustering_entry(ClusteringConfig& cfg, std::string_view key, std::string_view value) {
    const auto parts = split(key, '.');
    try {
        if (parts.size() == 3 && parts[0] == "rule") {
            auto& r = cfg.rules[class_index(parse_class(parts[1]))];
            if (parts[2] == "factors") {
                r = reduced_rule(r, parse_factor_list(value));
            } else {
                r.edges[static_cast<std::size_t>(parse_factor(parts[2]))] = parse_double_list(value, key);
                r.validate();
            }
            return true;
        }
        if (parts.size() == 2 && parts[0] == "voxels") {
            const auto counts = split(value, ',');
            if (counts.size() != 3) throw ConfigError("voxels needs three counts");
            VoxelScheme v{static_cast<int>(parse_int(counts[0], key)), static_cast<int>(parse_int(counts[1], key)),
                          static_cast<int>(parse_int(counts[2], key))};
            if (!v.valid()) throw ConfigError("voxel counts must be >= 1");
            cfg.voxels[class_index(parse_class(parts[1]))] = v;
            return true;
        }
    } catch (const ValidationError& e) {
        throw ConfigError(std::string(key) + ": " + e.what());
    }
    return false;
}

// ---------------------------------------------------------------------------
// Registry files
// ---------------------------------------------------------------------------

/// Text layout:
///     com-registry 1
///     class <name>
///     groups <G>
///     object <id> <group> <points:0|1>     (ascending id)
inline std::string registry_text(const GroupRegistry& reg) {
    std::vector<std::pair<ObjectId, int>> rows(reg.group_of.begin(), reg.group_of.end());
    std::sort(rows.begin(), rows.end());
    std::unordered_map<ObjectId, bool> has_points;
    for (const auto& s : reg.sampleable)
        for (auto id : s) has_points[id] = true;
    std::ostringstream out;
    out << "com-registry 1\nclass " << class_name(reg.cls) << "\ngroups " << reg.G() << "\n";
    for (const auto& [id, g] : rows) out << "object " << id << ' ' << g << ' ' << (has_points.count(id) ? 1 : 0) << '\n';
    return out.str();
}

inline void save_registry(const GroupRegistry& reg, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << registry_text(reg);
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

inline GroupRegistry parse_registry(std::istream& in) {
    std::string line;
    auto expect = [&](std::string_view tag) {
        if (!std::getline(in, line)) throw ValidationError("registry truncated");
        const auto parts = split(line, ' ');
        if (parts.size() != 2 || parts[0] != tag) throw ValidationError("registry: expected '" + std::string(tag) + "'");
        return parts[1];
    };
    if (expect("com-registry") != "1") throw ValidationError("registry: unsupported version");
    GroupRegistry reg;
    reg.cls = parse_class(expect("class"));
    reg.group_total = static_cast<int>(parse_int<ValidationError>(expect("groups"), "groups"));
    if (reg.group_total < 1) throw ValidationError("registry: groups must be >= 1");
    reg.members.resize(static_cast<std::size_t>(reg.group_total));
    reg.sampleable.resize(static_cast<std::size_t>(reg.group_total));
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const auto parts = split(line, ' ');
        if (parts.size() != 4 || parts[0] != "object") throw ValidationError("registry: malformed line '" + line + "'");
        reg.add(static_cast<ObjectId>(parse_int<ValidationError>(parts[1], "object id")),
                static_cast<int>(parse_int<ValidationError>(parts[2], "group")), parts[3] == "1");
    }
    return reg;
}

inline GroupRegistry load_registry(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open registry '" + path.string() + "'");
    return parse_registry(in);
}

}  // namespace com
