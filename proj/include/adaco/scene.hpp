#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "adaco/error.hpp"
#include "adaco/math.hpp"

namespace adaco {

// Reserved sentinel for points without a semantic annotation. Lives outside
// the [0, K) class range for every supported vocabulary (K <= 65534).
inline constexpr uint16_t kUnlabeledId = 65535;

struct ClassVocabulary {
    std::vector<std::string> names;

    uint16_t size() const { return static_cast<uint16_t>(names.size()); }
    std::optional<uint16_t> index_of(const std::string& name) const;
    void validate() const;  // K >= 2, unique names, K <= 65534
};

// Per-point label arrays are uint16; every value is either a class index in
// [0, K) or kUnlabeledId.
using LabelArray = std::vector<uint16_t>;

void validate_labels(const LabelArray& labels, uint16_t num_classes, const std::string& what);

struct SampleScene {
    std::string id;
    ClassVocabulary classes;
    std::vector<Vec3> points;
    LabelArray noisy_labels;
    std::optional<LabelArray> clean_labels;
    Mat4 pose;  // sample frame -> world frame
    std::optional<Matrix> features;

    size_t point_count() const { return points.size(); }
    void validate() const;
};

struct CameraModel {
    double fx = 1.0, fy = 1.0, cx = 0.0, cy = 0.0;  // pixels
    Mat4 extrinsic;                                 // sample frame -> camera frame
    void validate() const;
};

struct LabelMap2D {
    uint32_t width = 0, height = 0;
    LabelArray labels;  // row-major, labels[y*width + x]
    CameraModel camera;

    uint16_t at(uint32_t x, uint32_t y) const { return labels[static_cast<size_t>(y) * width + x]; }
    void validate(uint16_t num_classes) const;
};

// Knobs of the adaptive noise corrector. Defaults follow the reference
// operating point: derivative drop 0.9, confidence gate 0.9, five history
// rounds, winner divisor 3, DBSCAN eps 0.6 m / 5 points, 10 m blocks.
struct CorrectorConfig {
    double derivative_threshold = 0.9;  // r, in (0, 1]
    double confidence_threshold = 0.9;  // gamma, in [0, 1]
    int history_cap = 5;                // t_m
    double winner_divisor = 3.0;        // omega
    bool correct_once = true;
    double eps = 0.6;          // DBSCAN radius, meters
    int min_pts = 5;           // DBSCAN density
    double block = 10.0;       // x/y partition extent, meters; z unbounded
    bool freeze_ground = false;
    int ground_iterations = 200;
    double ground_tol = 0.2;   // plane inlier tolerance, meters
    uint64_t rng_seed = 0;

    void validate() const;
};

struct ReadOptions {
    // Optional axis-aligned crop applied at load time; points outside are dropped.
    std::optional<std::pair<Vec3, Vec3>> crop;
};

// Scene directory layout:
//   <dir>/points.bin     N records of 3 x float32, little-endian
//   <dir>/noisy.labels   N x uint16, little-endian
//   <dir>/clean.labels   optional, same layout
//   <dir>/meta.json      {"id", "classes", "pose" (16 row-major doubles)}
SampleScene read_scene(const std::filesystem::path& dir, const ReadOptions& options = {});
void write_scene(const SampleScene& scene, const std::filesystem::path& dir);

LabelArray read_labels(const std::filesystem::path& path);
void write_labels(const LabelArray& labels, const std::filesystem::path& path);

// Label map file: one ASCII header line "W H\n" followed by H*W uint16 (LE).
// Camera file: JSON {"intrinsics": {fx, fy, cx, cy}, "extrinsic": [16]}.
LabelMap2D read_label_map(const std::filesystem::path& map_path,
                          const std::filesystem::path& camera_path);
void write_label_map(const LabelMap2D& map, const std::filesystem::path& map_path,
                     const std::filesystem::path& camera_path);

// Lists scene subdirectories (those containing points.bin) in sorted order.
std::vector<std::filesystem::path> list_scene_dirs(const std::filesystem::path& data_dir);

}  // namespace adaco
