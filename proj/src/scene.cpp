#include "adaco/scene.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace adaco {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<uint8_t> read_file_bytes(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::io_failure, "cannot open " + path.string());
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
    return bytes;
}

void write_file_bytes(const fs::path& path, const void* data, size_t size)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::io_failure, "cannot write " + path.string());
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    if (!out) fail(ErrorCode::io_failure, "short write to " + path.string());
}

uint16_t load_u16le(const uint8_t* p)
{
    return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

void store_u16le(uint8_t* p, uint16_t v)
{
    p[0] = static_cast<uint8_t>(v & 0xff);
    p[1] = static_cast<uint8_t>(v >> 8);
}

float load_f32le(const uint8_t* p)
{
    uint32_t u = static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
                 (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
    return std::bit_cast<float>(u);
}

void store_f32le(uint8_t* p, float v)
{
    const uint32_t u = std::bit_cast<uint32_t>(v);
    p[0] = static_cast<uint8_t>(u & 0xff);
    p[1] = static_cast<uint8_t>((u >> 8) & 0xff);
    p[2] = static_cast<uint8_t>((u >> 16) & 0xff);
    p[3] = static_cast<uint8_t>((u >> 24) & 0xff);
}

json load_json(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) fail(ErrorCode::io_failure, "cannot open " + path.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) fail(ErrorCode::malformed_file, "invalid JSON in " + path.string());
    return j;
}

Mat4 mat4_from_json(const json& arr, const std::string& what)
{
    if (!arr.is_array() || arr.size() != 16)
        fail(ErrorCode::malformed_file, what + " must be 16 row-major numbers");
    Mat4 m;
    for (size_t i = 0; i < 16; ++i) {
        if (!arr[i].is_number()) fail(ErrorCode::malformed_file, what + " must be numeric");
        m.m[i] = arr[i].get<double>();
    }
    return m;
}

json mat4_to_json(const Mat4& m)
{
    json arr = json::array();
    for (const double v : m.m) arr.push_back(v);
    return arr;
}

}  // namespace

std::optional<uint16_t> ClassVocabulary::index_of(const std::string& name) const
{
    for (size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return static_cast<uint16_t>(i);
    return std::nullopt;
}

void ClassVocabulary::validate() const
{
    if (names.size() < 2) fail(ErrorCode::invalid_argument, "vocabulary needs at least 2 classes");
    if (names.size() > 65534) fail(ErrorCode::invalid_argument, "vocabulary exceeds 65534 classes");
    std::set<std::string> unique(names.begin(), names.end());
    if (unique.size() != names.size())
        fail(ErrorCode::invalid_argument, "vocabulary names must be unique");
}

void validate_labels(const LabelArray& labels, uint16_t num_classes, const std::string& what)
{
    for (const uint16_t l : labels) {
        if (l >= num_classes && l != kUnlabeledId)
            fail(ErrorCode::label_out_of_range,
                 what + ": label " + std::to_string(l) + " outside [0, " +
                     std::to_string(num_classes) + ") and not the unlabeled sentinel");
    }
}

void SampleScene::validate() const
{
    classes.validate();
    const size_t n = points.size();
    if (noisy_labels.size() != n)
        fail(ErrorCode::length_mismatch, "noisy_labels length != point count");
    validate_labels(noisy_labels, classes.size(), "noisy_labels");
    if (clean_labels) {
        if (clean_labels->size() != n)
            fail(ErrorCode::length_mismatch, "clean_labels length != point count");
        validate_labels(*clean_labels, classes.size(), "clean_labels");
    }
    if (features && features->rows != n)
        fail(ErrorCode::length_mismatch, "feature rows != point count");
    if (!pose.is_rigid(1e-6)) fail(ErrorCode::invalid_argument, "pose is not rigid within 1e-6");
    for (const Vec3& p : points)
        if (!p.finite()) fail(ErrorCode::invalid_argument, "non-finite point coordinate");
}

void CameraModel::validate() const
{
    if (!(fx > 0.0) || !(fy > 0.0)) fail(ErrorCode::invalid_argument, "fx and fy must be positive");
    if (!std::isfinite(fx) || !std::isfinite(fy) || !std::isfinite(cx) || !std::isfinite(cy))
        fail(ErrorCode::invalid_argument, "camera intrinsics must be finite");
    if (!extrinsic.is_rigid(1e-5))
        fail(ErrorCode::invalid_argument, "camera extrinsic is not rigid");
}

void LabelMap2D::validate(uint16_t num_classes) const
{
    if (labels.size() != static_cast<size_t>(width) * height)
        fail(ErrorCode::length_mismatch, "label map size != width*height");
    validate_labels(labels, num_classes, "label map");
    camera.validate();
}

void CorrectorConfig::validate() const
{
    if (!(derivative_threshold > 0.0 && derivative_threshold <= 1.0))
        fail(ErrorCode::invalid_argument, "derivative threshold must be in (0, 1]");
    if (!(confidence_threshold >= 0.0 && confidence_threshold <= 1.0))
        fail(ErrorCode::invalid_argument, "confidence threshold must be in [0, 1]");
    if (history_cap < 1) fail(ErrorCode::invalid_argument, "history cap must be >= 1");
    if (!(winner_divisor >= 1.0)) fail(ErrorCode::invalid_argument, "winner divisor must be >= 1");
    if (!(eps > 0.0)) fail(ErrorCode::invalid_argument, "eps must be positive");
    if (min_pts < 1) fail(ErrorCode::invalid_argument, "min_pts must be >= 1");
    if (!(block > 0.0)) fail(ErrorCode::invalid_argument, "block must be positive");
    if (ground_iterations < 1) fail(ErrorCode::invalid_argument, "ground iterations must be >= 1");
    if (!(ground_tol > 0.0)) fail(ErrorCode::invalid_argument, "ground tolerance must be positive");
}

LabelArray read_labels(const fs::path& path)
{
    const std::vector<uint8_t> bytes = read_file_bytes(path);
    if (bytes.size() % 2 != 0)
        fail(ErrorCode::malformed_file, path.string() + ": odd label file size");
    LabelArray labels(bytes.size() / 2);
    for (size_t i = 0; i < labels.size(); ++i) labels[i] = load_u16le(bytes.data() + 2 * i);
    return labels;
}

void write_labels(const LabelArray& labels, const fs::path& path)
{
    std::vector<uint8_t> bytes(labels.size() * 2);
    for (size_t i = 0; i < labels.size(); ++i) store_u16le(bytes.data() + 2 * i, labels[i]);
    write_file_bytes(path, bytes.data(), bytes.size());
}

SampleScene read_scene(const fs::path& dir, const ReadOptions& options)
{
    const fs::path points_path = dir / "points.bin";
    const std::vector<uint8_t> bytes = read_file_bytes(points_path);
    if (bytes.size() % 12 != 0)
        fail(ErrorCode::malformed_file, points_path.string() + ": size not a multiple of 12");
    const size_t n = bytes.size() / 12;

    SampleScene scene;
    scene.points.resize(n);
    for (size_t i = 0; i < n; ++i) {
        const uint8_t* rec = bytes.data() + 12 * i;
        scene.points[i] = {load_f32le(rec), load_f32le(rec + 4), load_f32le(rec + 8)};
    }

    const json meta = load_json(dir / "meta.json");
    if (!meta.contains("id") || !meta.contains("classes") || !meta.contains("pose"))
        fail(ErrorCode::malformed_file, "meta.json missing id/classes/pose");
    scene.id = meta["id"].get<std::string>();
    for (const auto& name : meta["classes"]) scene.classes.names.push_back(name.get<std::string>());
    scene.pose = mat4_from_json(meta["pose"], "pose");

    scene.noisy_labels = read_labels(dir / "noisy.labels");
    if (scene.noisy_labels.size() != n)
        fail(ErrorCode::length_mismatch, "noisy.labels count != point count");
    if (fs::exists(dir / "clean.labels")) {
        scene.clean_labels = read_labels(dir / "clean.labels");
        if (scene.clean_labels->size() != n)
            fail(ErrorCode::length_mismatch, "clean.labels count != point count");
    }

    if (options.crop) {
        const auto& [lo, hi] = *options.crop;
        std::vector<Vec3> kept_points;
        LabelArray kept_noisy;
        LabelArray kept_clean;
        for (size_t i = 0; i < n; ++i) {
            const Vec3& p = scene.points[i];
            if (p.x < lo.x || p.y < lo.y || p.z < lo.z || p.x > hi.x || p.y > hi.y || p.z > hi.z)
                continue;
            kept_points.push_back(p);
            kept_noisy.push_back(scene.noisy_labels[i]);
            if (scene.clean_labels) kept_clean.push_back((*scene.clean_labels)[i]);
        }
        scene.points = std::move(kept_points);
        scene.noisy_labels = std::move(kept_noisy);
        if (scene.clean_labels) scene.clean_labels = std::move(kept_clean);
    }

    scene.validate();
    return scene;
}

void write_scene(const SampleScene& scene, const fs::path& dir)
{
    scene.validate();
    std::error_code ec;
    fs::create_directories(dir, ec);

    std::vector<uint8_t> bytes(scene.points.size() * 12);
    for (size_t i = 0; i < scene.points.size(); ++i) {
        uint8_t* rec = bytes.data() + 12 * i;
        store_f32le(rec, static_cast<float>(scene.points[i].x));
        store_f32le(rec + 4, static_cast<float>(scene.points[i].y));
        store_f32le(rec + 8, static_cast<float>(scene.points[i].z));
    }
    write_file_bytes(dir / "points.bin", bytes.data(), bytes.size());

    write_labels(scene.noisy_labels, dir / "noisy.labels");
    if (scene.clean_labels) write_labels(*scene.clean_labels, dir / "clean.labels");

    json meta;
    meta["id"] = scene.id;
    meta["classes"] = scene.classes.names;
    meta["pose"] = mat4_to_json(scene.pose);
    std::ofstream out(dir / "meta.json", std::ios::trunc);
    if (!out) fail(ErrorCode::io_failure, "cannot write meta.json under " + dir.string());
    out << meta.dump(2) << "\n";
}

LabelMap2D read_label_map(const fs::path& map_path, const fs::path& camera_path)
{
    const std::vector<uint8_t> bytes = read_file_bytes(map_path);
    size_t pos = 0;
    while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    if (pos == bytes.size()) fail(ErrorCode::malformed_file, map_path.string() + ": missing header");
    std::istringstream header(std::string(bytes.begin(), bytes.begin() + static_cast<long>(pos)));
    LabelMap2D map;
    if (!(header >> map.width >> map.height) || map.width == 0 || map.height == 0)
        fail(ErrorCode::malformed_file, map_path.string() + ": bad \"W H\" header");
    const size_t count = static_cast<size_t>(map.width) * map.height;
    if (bytes.size() - pos - 1 != count * 2)
        fail(ErrorCode::length_mismatch, map_path.string() + ": payload size != W*H*2");
    map.labels.resize(count);
    const uint8_t* payload = bytes.data() + pos + 1;
    for (size_t i = 0; i < count; ++i) map.labels[i] = load_u16le(payload + 2 * i);

    const json cam = load_json(camera_path);
    if (!cam.contains("intrinsics") || !cam.contains("extrinsic"))
        fail(ErrorCode::malformed_file, camera_path.string() + ": missing intrinsics/extrinsic");
    const json& intr = cam["intrinsics"];
    map.camera.fx = intr.at("fx").get<double>();
    map.camera.fy = intr.at("fy").get<double>();
    map.camera.cx = intr.at("cx").get<double>();
    map.camera.cy = intr.at("cy").get<double>();
    map.camera.extrinsic = mat4_from_json(cam["extrinsic"], "extrinsic");
    map.camera.validate();
    return map;
}

void write_label_map(const LabelMap2D& map, const fs::path& map_path, const fs::path& camera_path)
{
    std::ostringstream header;
    header << map.width << " " << map.height << "\n";
    const std::string head = header.str();
    std::vector<uint8_t> bytes(head.begin(), head.end());
    const size_t payload_at = bytes.size();
    bytes.resize(payload_at + map.labels.size() * 2);
    for (size_t i = 0; i < map.labels.size(); ++i)
        store_u16le(bytes.data() + payload_at + 2 * i, map.labels[i]);
    write_file_bytes(map_path, bytes.data(), bytes.size());

    json cam;
    cam["intrinsics"] = {{"fx", map.camera.fx},
                         {"fy", map.camera.fy},
                         {"cx", map.camera.cx},
                         {"cy", map.camera.cy}};
    cam["extrinsic"] = mat4_to_json(map.camera.extrinsic);
    std::ofstream out(camera_path, std::ios::trunc);
    if (!out) fail(ErrorCode::io_failure, "cannot write " + camera_path.string());
    out << cam.dump(2) << "\n";
}

std::vector<fs::path> list_scene_dirs(const fs::path& data_dir)
{
    if (!fs::is_directory(data_dir))
        fail(ErrorCode::io_failure, data_dir.string() + " is not a directory");
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(data_dir)) {
        if (entry.is_directory() && fs::exists(entry.path() / "points.bin"))
            dirs.push_back(entry.path());
    }
    std::sort(dirs.begin(), dirs.end());
    return dirs;
}

}  // namespace adaco
