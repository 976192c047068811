#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <boost/crc.hpp>
#include <nlohmann/json.hpp>

#include "com/error.hpp"
#include "com/geometry.hpp"
#include "com/parallel.hpp"

namespace com {

enum class ObjectClass : std::uint8_t { vehicle = 0, pedestrian = 1, cyclist = 2 };

inline constexpr std::size_t class_count = 3;
inline constexpr std::array<ObjectClass, class_count> all_classes{ObjectClass::vehicle, ObjectClass::pedestrian,
                                                                   ObjectClass::cyclist};

inline std::string_view class_name(ObjectClass c) {
    switch (c) {
        case ObjectClass::vehicle: return "vehicle";
        case ObjectClass::pedestrian: return "pedestrian";
        case ObjectClass::cyclist: return "cyclist";
    }
    return "unknown";
}

inline ObjectClass parse_class(std::string_view name) {
    for (auto c : all_classes)
        if (class_name(c) == name) return c;
    throw ValidationError("unknown object class '" + std::string(name) + "'");
}

inline std::size_t class_index(ObjectClass c) { return static_cast<std::size_t>(c); }

struct Label {
    Box3D box;
    ObjectClass cls = ObjectClass::vehicle;
    std::string track_id;
    std::string frame_id;

    friend bool operator==(const Label&, const Label&) = default;
};

struct Frame {
    std::string frame_id;
    std::vector<Point> points;
    std::vector<Label> labels;

    friend bool operator==(const Frame&, const Frame&) = default;
};

using ObjectId = std::uint64_t;

/// One database entry. Points are stored in the box-local frame so the object
/// can be re-posed anywhere; all scalars are single-precision representable.
struct GtObject {
    ObjectId object_id = 0;
    Label label;
    std::vector<Point> points;
    ObjectFeatures features;

    /// Zero-point objects stay in the database but are never sampled.
    bool empty() const noexcept { return points.empty(); }

    friend bool operator==(const GtObject&, const GtObject&) = default;
};

using VoxelSchemes = std::array<VoxelScheme, class_count>;
inline constexpr VoxelSchemes default_voxel_schemes{vehicle_voxels, pedestrian_voxels, pedestrian_voxels};

struct GtDatabase {
    static constexpr std::uint32_t current_version = 1;

    std::uint32_t version = current_version;
    std::string source_id;
    std::array<std::vector<GtObject>, class_count> by_class;

    std::size_t size() const noexcept {
        std::size_t n = 0;
        for (const auto& part : by_class) n += part.size();
        return n;
    }

    const std::vector<GtObject>& objects(ObjectClass c) const { return by_class[class_index(c)]; }

    /// Linear lookup across partitions; use an index for hot paths.
    const GtObject* find(ObjectId id) const {
        for (const auto& part : by_class)
            for (const auto& o : part)
                if (o.object_id == id) return &o;
        return nullptr;
    }

    friend bool operator==(const GtDatabase&, const GtDatabase&) = default;
};

// ---------------------------------------------------------------------------
// Extraction
// ---------------------------------------------------------------------------

// The volatile keeps g++ 11 -O3 from vectorizing adjacent round trips into a
// no-op (seen in quantize_box: w and h came back unrounded).
inline double quantize(double v) {
    volatile float f = static_cast<float>(v);
    return static_cast<double>(f);
}

inline double quantize_heading(double a) {
    float f = static_cast<float>(normalize_heading(a));
    if (static_cast<double>(f) > std::numbers::pi) f = std::nextafter(f, 0.0f);
    if (static_cast<double>(f) <= -std::numbers::pi) f = std::nextafter(f, 0.0f);
    return static_cast<double>(f);
}

inline Box3D quantize_box(const Box3D& b) {
    return {quantize(b.cx), quantize(b.cy), quantize(b.cz), quantize(b.l), quantize(b.w), quantize(b.h),
            quantize_heading(b.heading)};
}

/// Features derived from the stored box and the stored box-local points.
inline ObjectFeatures recompute_features(const GtObject& obj, const VoxelScheme& scheme) {
    const Box3D& b = obj.label.box;
    return {quantize(feature_distance(b)), quantize(feature_size(b)), quantize(feature_angle(b)),
            quantize(occupancy_local(obj.points, b.l, b.w, b.h, scheme))};
}

/// One object per label, with interior points cropped and moved to the
/// box-local frame. Object ids are left at 0; build_database assigns them.
inline std::vector<GtObject> extract_objects(const Frame& frame,
                                             const VoxelSchemes& schemes = default_voxel_schemes) {
    std::vector<GtObject> out;
    out.reserve(frame.labels.size());
    for (const auto& label : frame.labels) {
        validate_box(label.box);
        GtObject obj;
        obj.label = label;
        obj.label.box = quantize_box(label.box);
        if (obj.label.frame_id.empty()) obj.label.frame_id = frame.frame_id;
        // Crop against the annotated box in double precision.
        for (const auto& p : frame.points) {
            const Vec3 local = to_local(p, label.box);
            if (!inside_extent(local, label.box.l, label.box.w, label.box.h)) continue;
            obj.points.push_back({static_cast<float>(local[0]), static_cast<float>(local[1]),
                                  static_cast<float>(local[2]), p.intensity});
        }
        obj.features = recompute_features(obj, schemes[class_index(label.cls)]);
        out.push_back(std::move(obj));
    }
    return out;
}

/// Ids are dense, assigned in frame order then label order.
inline GtDatabase build_database(std::span<const Frame> frames, std::string source_id = {},
                                 const VoxelSchemes& schemes = default_voxel_schemes, unsigned workers = 1) {
    std::unordered_set<std::string> seen;
    for (const auto& f : frames)
        if (!seen.insert(f.frame_id).second) throw ValidationError("duplicate frame_id '" + f.frame_id + "'");

    std::vector<std::vector<GtObject>> per_frame(frames.size());
    parallel_for(frames.size(), workers, [&](std::size_t i) { per_frame[i] = extract_objects(frames[i], schemes); });

    GtDatabase db;
    db.source_id = std::move(source_id);
    ObjectId next = 0;
    for (auto& objs : per_frame) {
        for (auto& o : objs) {
            o.object_id = next++;
            db.by_class[class_index(o.label.cls)].push_back(std::move(o));
        }
    }
    return db;
}

// ---------------------------------------------------------------------------
// Binary persistence
// ---------------------------------------------------------------------------

inline constexpr std::string_view db_magic = "COMGTDB1";

/// CRC-64/XZ (ECMA-182 polynomial, reflected, init and xorout all ones).
inline std::uint64_t crc64(std::span<const std::uint8_t> bytes) {
    boost::crc_optimal<64, 0x42F0E1EBA9EA3693ULL, ~0ULL, ~0ULL, true, true> crc;
    crc.process_bytes(bytes.data(), bytes.size());
    return crc.checksum();
}

namespace detail {

class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
    void str(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        buf_.insert(buf_.end(), s.begin(), s.end());
    }
    void raw(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
    std::vector<std::uint8_t>& bytes() { return buf_; }

private:
    std::vector<std::uint8_t> buf_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint8_t u8() { return take(1)[0]; }
    std::uint32_t u32() {
        auto b = take(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        auto b = take(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    std::string str() {
        const auto n = u32();
        auto b = take(n);
        return {reinterpret_cast<const char*>(b.data()), b.size()};
    }
    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

private:
    std::span<const std::uint8_t> take(std::size_t n) {
        if (n > remaining()) throw FormatError("database payload is internally inconsistent");
        auto s = bytes_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

}  // namespace detail

/// File layout (all integers and floats little-endian):
///
///     "COMGTDB1"               8 bytes
///     version                  u32
///     payload_size             u64
///     payload                  payload_size bytes
///     crc64(payload)           u64, CRC-64/XZ
///
/// payload := str source_id, u32 n_classes,
///            n_classes x { u8 class, u64 n_objects, n_objects x object }
/// object  := u64 id, f32 x7 box (cx cy cz l w h heading), str track_id,
///            str frame_id, f32 x4 features (d s a o), u64 n_points,
///            n_points x f32 x4 (x y z intensity)
/// str     := u32 length, bytes
inline std::vector<std::uint8_t> serialize_database(const GtDatabase& db) {
    detail::ByteWriter payload;
    payload.str(db.source_id);
    payload.u32(static_cast<std::uint32_t>(class_count));
    for (auto c : all_classes) {
        const auto& part = db.objects(c);
        payload.u8(static_cast<std::uint8_t>(c));
        payload.u64(part.size());
        for (const auto& o : part) {
            payload.u64(o.object_id);
            const Box3D& b = o.label.box;
            for (double v : {b.cx, b.cy, b.cz, b.l, b.w, b.h, b.heading}) payload.f32(v);
            payload.str(o.label.track_id);
            payload.str(o.label.frame_id);
            const auto& f = o.features;
            for (double v : {f.distance, f.size, f.angle, f.occupancy}) payload.f32(v);
            payload.u64(o.points.size());
            for (const auto& p : o.points)
                for (float v : {p.x, p.y, p.z, p.intensity}) payload.u32(std::bit_cast<std::uint32_t>(v));
        }
    }

    detail::ByteWriter file;
    file.raw(db_magic);
    file.u32(db.version);
    file.u64(payload.bytes().size());
    auto& out = file.bytes();
    out.insert(out.end(), payload.bytes().begin(), payload.bytes().end());
    file.u64(crc64(payload.bytes()));
    return std::move(out);
}

inline GtDatabase deserialize_database(std::span<const std::uint8_t> bytes) {
    constexpr std::size_t header = 8 + 4 + 8;
    const std::size_t magic_len = std::min(bytes.size(), db_magic.size());
    if (std::memcmp(bytes.data(), db_magic.data(), magic_len) != 0) throw FormatError("bad magic bytes");
    if (bytes.size() < header) throw TruncatedError("database header truncated");

    detail::ByteReader head(bytes.subspan(8, header - 8));
    const std::uint32_t version = head.u32();
    if (version != GtDatabase::current_version)
        throw VersionError("unsupported database version " + std::to_string(version));
    const std::uint64_t payload_size = head.u64();
    if (payload_size > bytes.size() || bytes.size() - header < payload_size + 8)
        throw TruncatedError("database payload truncated");
    if (bytes.size() - header > payload_size + 8) throw FormatError("trailing bytes after checksum");

    const auto payload = bytes.subspan(header, payload_size);
    detail::ByteReader tail(bytes.subspan(header + payload_size, 8));
    if (tail.u64() != crc64(payload)) throw ChecksumError("database checksum mismatch");

    GtDatabase db;
    db.version = version;
    detail::ByteReader r(payload);
    db.source_id = r.str();
    const std::uint32_t n_classes = r.u32();
    if (n_classes != class_count) throw FormatError("unexpected class table count");
    for (std::uint32_t ci = 0; ci < n_classes; ++ci) {
        const std::uint8_t cid = r.u8();
        if (cid >= class_count) throw FormatError("unknown class id in database");
        const auto cls = static_cast<ObjectClass>(cid);
        const std::uint64_t n = r.u64();
        auto& part = db.by_class[cid];
        for (std::uint64_t k = 0; k < n; ++k) {
            GtObject o;
            o.object_id = r.u64();
            Box3D& b = o.label.box;
            b.cx = r.f32();
            b.cy = r.f32();
            b.cz = r.f32();
            b.l = r.f32();
            b.w = r.f32();
            b.h = r.f32();
            b.heading = r.f32();
            o.label.cls = cls;
            o.label.track_id = r.str();
            o.label.frame_id = r.str();
            o.features.distance = r.f32();
            o.features.size = r.f32();
            o.features.angle = r.f32();
            o.features.occupancy = r.f32();
            const std::uint64_t np = r.u64();
            if (np > r.remaining() / 16) throw FormatError("point count exceeds payload");
            o.points.resize(np);
            for (auto& p : o.points) {
                p.x = r.f32();
                p.y = r.f32();
                p.z = r.f32();
                p.intensity = r.f32();
            }
            part.push_back(std::move(o));
        }
    }
    if (r.remaining() != 0) throw FormatError("unparsed bytes in payload");
    return db;
}

inline void save_database(const GtDatabase& db, const std::filesystem::path& path) {
    detail::write_file_bytes(path, serialize_database(db));
}

inline GtDatabase load_database(const std::filesystem::path& path) {
    return deserialize_database(detail::read_file_bytes(path));
}

// ---------------------------------------------------------------------------
// Frame manifests and KITTI-style point files
// ---------------------------------------------------------------------------

/// Raw little-endian float32 quadruples (x, y, z, intensity), no header.
inline std::vector<Point> read_points(const std::filesystem::path& path) {
    const auto bytes = detail::read_file_bytes(path);
    if (bytes.size() % 16 != 0) throw ValidationError("point file '" + path.string() + "' is not a multiple of 16 bytes");
    std::vector<Point> pts(bytes.size() / 16);
    detail::ByteReader r(bytes);
    for (auto& p : pts) {
        p.x = r.f32();
        p.y = r.f32();
        p.z = r.f32();
        p.intensity = r.f32();
    }
    return pts;
}

inline void write_points(const std::filesystem::path& path, std::span<const Point> points) {
    detail::ByteWriter w;
    for (const auto& p : points)
        for (float v : {p.x, p.y, p.z, p.intensity}) w.u32(std::bit_cast<std::uint32_t>(v));
    detail::write_file_bytes(path, w.bytes());
}

struct ManifestRecord {
    std::string frame_id;
    std::string point_file;
    std::vector<Label> labels;
};

inline nlohmann::ordered_json label_to_json(const Label& l) {
    nlohmann::ordered_json j;
    j["cx"] = l.box.cx;
    j["cy"] = l.box.cy;
    j["cz"] = l.box.cz;
    j["l"] = l.box.l;
    j["w"] = l.box.w;
    j["h"] = l.box.h;
    j["heading"] = l.box.heading;
    j["class"] = std::string(class_name(l.cls));
    if (!l.track_id.empty()) j["track_id"] = l.track_id;
    return j;
}

inline std::string manifest_line(const ManifestRecord& rec) {
    nlohmann::ordered_json j;
    j["frame_id"] = rec.frame_id;
    j["point_file"] = rec.point_file;
    j["labels"] = nlohmann::ordered_json::array();
    for (const auto& l : rec.labels) j["labels"].push_back(label_to_json(l));
    return j.dump();
}

inline ManifestRecord parse_manifest_line(std::string_view line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed manifest record: ") + e.what());
    }
    try {
        ManifestRecord rec;
        rec.frame_id = j.at("frame_id").get<std::string>();
        rec.point_file = j.at("point_file").get<std::string>();
        for (const auto& jl : j.at("labels")) {
            Label l;
            l.box = {jl.at("cx").get<double>(), jl.at("cy").get<double>(), jl.at("cz").get<double>(),
                     jl.at("l").get<double>(),  jl.at("w").get<double>(),  jl.at("h").get<double>(),
                     normalize_heading(jl.at("heading").get<double>())};
            validate_box(l.box);
            l.cls = parse_class(jl.at("class").get<std::string>());
            if (jl.contains("track_id")) l.track_id = jl.at("track_id").get<std::string>();
            l.frame_id = rec.frame_id;
            rec.labels.push_back(std::move(l));
        }
        return rec;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("manifest record missing or mistyped field: ") + e.what());
    }
}

inline std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
    std::vector<ManifestRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        out.push_back(parse_manifest_line(line));
    }
    return out;
}

/// Loads every frame of a manifest; point files resolve relative to the
/// manifest's directory.
inline std::vector<Frame> load_frames(const std::filesystem::path& manifest_path, unsigned workers = 1) {
    const auto records = read_manifest(manifest_path);
    const auto base = manifest_path.parent_path();
    std::vector<Frame> frames(records.size());
    parallel_for(records.size(), workers, [&](std::size_t i) {
        frames[i].frame_id = records[i].frame_id;
        frames[i].labels = records[i].labels;
        frames[i].points = read_points(base / records[i].point_file);
    });
    return frames;
}

/// Writes `<dir>/<frame_id>.bin` and returns the manifest record for it.
inline ManifestRecord write_frame(const std::filesystem::path& dir, const Frame& frame) {
    ManifestRecord rec{frame.frame_id, frame.frame_id + ".bin", frame.labels};
    write_points(dir / rec.point_file, frame.points);
    return rec;
}

inline void write_manifest(const std::filesystem::path& manifest_path, std::span<const Frame> frames) {
    const auto dir = manifest_path.parent_path();
    std::ofstream out(manifest_path, std::ios::trunc);
    if (!out) throw IoError("cannot open manifest '" + manifest_path.string() + "' for writing");
    for (const auto& f : frames) out << manifest_line(write_frame(dir, f)) << '\n';
    if (!out) throw IoError("write to '" + manifest_path.string() + "' failed");
}

}  // namespace com
