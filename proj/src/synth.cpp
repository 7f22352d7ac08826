#include "adaco/synth.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "adaco/rng.hpp"

namespace adaco {

namespace {

enum class Shape { box, cylinder, pole, wall };

Shape shape_for_class(uint16_t non_ground_rank)
{
    switch (non_ground_rank % 4) {
        case 0: return Shape::box;
        case 1: return Shape::cylinder;
        case 2: return Shape::pole;
        default: return Shape::wall;
    }
}

struct Placed {
    double x, y, radius;
};

struct GridKey {
    int32_t x, y, z;
    bool operator==(const GridKey&) const = default;
};

struct GridKeyHash {
    size_t operator()(const GridKey& k) const
    {
        const uint64_t h = mix64(static_cast<uint64_t>(static_cast<uint32_t>(k.x)),
                                 static_cast<uint64_t>(static_cast<uint32_t>(k.y)));
        return static_cast<size_t>(mix64(h, static_cast<uint64_t>(static_cast<uint32_t>(k.z))));
    }
};

}  // namespace

void NoiseSpec::validate(uint16_t num_classes) const
{
    const auto probability = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!probability(symmetric_rate) || !probability(boundary_rate) || !probability(unlabeled_rate))
        fail(ErrorCode::invalid_argument, "noise rates must be probabilities");
    if (boundary_band < 0.0) fail(ErrorCode::invalid_argument, "boundary band must be >= 0");
    if (!confusion.empty()) {
        if (confusion.size() != static_cast<size_t>(num_classes) * num_classes)
            fail(ErrorCode::length_mismatch, "confusion matrix must be K x K");
        for (uint16_t r = 0; r < num_classes; ++r) {
            double row = 0.0;
            for (uint16_t c = 0; c < num_classes; ++c) {
                const double p = confusion[static_cast<size_t>(r) * num_classes + c];
                if (p < 0.0) fail(ErrorCode::invalid_argument, "confusion entries must be >= 0");
                row += p;
            }
            if (std::abs(row - 1.0) > 1e-9)
                fail(ErrorCode::invalid_argument, "confusion rows must sum to 1");
        }
    }
}

void SynthConfig::validate() const
{
    classes.validate();
    if (!classes.index_of("ground"))
        fail(ErrorCode::invalid_argument, "synth vocabulary must contain a \"ground\" class");
    if (n_scenes < 1) fail(ErrorCode::invalid_argument, "n_scenes must be >= 1");
    if (!objects_per_scene.valid() || !points_per_object.valid() || !ground_points.valid())
        fail(ErrorCode::invalid_argument, "ranges must be non-empty");
    if (points_per_object.lo < 1 || ground_points.lo < 1)
        fail(ErrorCode::invalid_argument, "point densities must be positive");
    if (!(ground_extent > 0.0)) fail(ErrorCode::invalid_argument, "ground extent must be positive");
    noise.validate(classes.size());
}

SampleScene generate_scene(const SynthConfig& cfg, int index)
{
    cfg.validate();
    Rng rng(mix64(cfg.rng_seed, static_cast<uint64_t>(index)));

    SampleScene scene;
    scene.id = "scene_" + std::string(index < 10 ? "000" : index < 100 ? "00" : index < 1000 ? "0" : "") +
               std::to_string(index);
    scene.classes = cfg.classes;
    scene.pose = Mat4::translation({static_cast<double>(index) * 2.0, 0.0, 0.0}) *
                 Mat4::rotation_z(0.05 * static_cast<double>(index));

    const uint16_t ground_class = *cfg.classes.index_of("ground");
    std::vector<uint16_t> object_classes;
    for (uint16_t k = 0; k < cfg.classes.size(); ++k)
        if (k != ground_class) object_classes.push_back(k);

    LabelArray labels;
    const auto draw_range = [&](const IntRange& r) {
        return r.lo + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(r.hi - r.lo + 1)));
    };
    const double half = cfg.ground_extent / 2.0;

    // Ground sheet.
    const int n_ground = draw_range(cfg.ground_points);
    for (int i = 0; i < n_ground; ++i) {
        scene.points.push_back({rng.uniform(-half, half), rng.uniform(-half, half),
                                rng.normal() * 0.02});
        labels.push_back(ground_class);
    }

    // Objects, rejection-placed so clusters stay separated.
    const int n_objects = object_classes.empty() ? 0 : draw_range(cfg.objects_per_scene);
    std::vector<Placed> placed;
    for (int obj = 0; obj < n_objects; ++obj) {
        const uint16_t rank = static_cast<uint16_t>(rng.uniform_int(object_classes.size()));
        const uint16_t cls = object_classes[rank];
        const Shape shape = shape_for_class(rank);

        // Shape families occupy distinct bands of the per-point statistics
        // the classifier sees (local density, height): boxes low and
        // mid-density, cylinders dense, poles thin/tall/sparse, walls long
        // and sparsest. Point budgets are scaled per shape to keep those
        // bands tight.
        double sx = 1.0, sy = 1.0, sz = 1.0, yaw = 0.0, budget = 1.0;
        switch (shape) {
            case Shape::box:
                sx = rng.uniform(1.2, 1.4);
                sy = rng.uniform(1.2, 1.4);
                sz = rng.uniform(0.8, 0.95);
                budget = 0.8;
                break;
            case Shape::cylinder:
                sx = sy = rng.uniform(0.2, 0.25) * 2.0;  // diameter
                sz = rng.uniform(1.4, 1.6);
                break;
            case Shape::pole:
                sx = sy = 0.2;
                sz = rng.uniform(3.2, 4.2);
                budget = 0.45;
                break;
            case Shape::wall:
                sx = rng.uniform(4.5, 6.0);
                sy = 0.2;
                sz = rng.uniform(2.4, 2.8);
                yaw = rng.uniform(0.0, 3.141592653589793);
                budget = 0.8;
                break;
        }
        const double radius = 0.5 * std::hypot(sx, sy);

        bool ok = false;
        double cx = 0.0, cy = 0.0;
        for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
            cx = rng.uniform(-half + radius, half - radius);
            cy = rng.uniform(-half + radius, half - radius);
            ok = true;
            for (const Placed& p : placed) {
                const double gap = std::hypot(cx - p.x, cy - p.y) - radius - p.radius;
                if (gap < 1.2) {  // keep objects > 2*eps apart
                    ok = false;
                    break;
                }
            }
        }
        if (!ok) continue;
        placed.push_back({cx, cy, radius});

        const int n_points =
            std::max(1, static_cast<int>(std::lround(budget * draw_range(cfg.points_per_object))));
        const double cos_yaw = std::cos(yaw), sin_yaw = std::sin(yaw);
        for (int i = 0; i < n_points; ++i) {
            double lx, ly, lz;
            if (shape == Shape::cylinder) {
                const double ang = rng.uniform(0.0, 6.283185307179586);
                const double rr = 0.5 * sx * std::sqrt(rng.uniform());
                lx = rr * std::cos(ang);
                ly = rr * std::sin(ang);
                lz = rng.uniform(0.0, sz);
            } else {
                lx = rng.uniform(-0.5 * sx, 0.5 * sx);
                ly = rng.uniform(-0.5 * sy, 0.5 * sy);
                lz = rng.uniform(0.0, sz);
            }
            scene.points.push_back({cx + cos_yaw * lx - sin_yaw * ly,
                                    cy + sin_yaw * lx + cos_yaw * ly, lz});
            labels.push_back(cls);
        }
    }

    scene.clean_labels = labels;
    scene.noisy_labels = std::move(labels);
    scene.validate();
    return scene;
}

SampleScene inject_noise(const SampleScene& scene, const NoiseSpec& spec, uint64_t seed)
{
    if (!scene.clean_labels)
        fail(ErrorCode::missing_input, "noise injection needs clean labels");
    const uint16_t k_count = scene.classes.size();
    spec.validate(k_count);

    const LabelArray& clean = *scene.clean_labels;
    SampleScene out = scene;
    out.noisy_labels = clean;
    Rng rng(mix64(seed, fnv1a64(scene.id)));
    const size_t n = clean.size();

    if (!spec.confusion.empty()) {
        for (size_t i = 0; i < n; ++i) {
            const double u = rng.uniform();
            double acc = 0.0;
            const size_t row = static_cast<size_t>(clean[i]) * k_count;
            for (uint16_t c = 0; c < k_count; ++c) {
                acc += spec.confusion[row + c];
                if (u < acc) {
                    out.noisy_labels[i] = c;
                    break;
                }
            }
        }
    } else if (spec.symmetric_rate > 0.0) {
        for (size_t i = 0; i < n; ++i) {
            if (!rng.bernoulli(spec.symmetric_rate)) continue;
            const uint16_t offset =
                static_cast<uint16_t>(1 + rng.uniform_int(static_cast<uint64_t>(k_count - 1)));
            out.noisy_labels[i] = static_cast<uint16_t>((clean[i] + offset) % k_count);
        }
    }

    if (spec.boundary_rate > 0.0 && spec.boundary_band > 0.0) {
        // Nearest differently-labeled clean neighbor within the band, found
        // on a uniform grid.
        const double band = spec.boundary_band;
        std::unordered_map<GridKey, std::vector<uint32_t>, GridKeyHash> grid;
        const auto key_of = [band](const Vec3& p) {
            return GridKey{static_cast<int32_t>(std::floor(p.x / band)),
                           static_cast<int32_t>(std::floor(p.y / band)),
                           static_cast<int32_t>(std::floor(p.z / band))};
        };
        for (uint32_t i = 0; i < n; ++i) grid[key_of(scene.points[i])].push_back(i);

        for (uint32_t i = 0; i < n; ++i) {
            const Vec3& p = scene.points[i];
            const GridKey center = key_of(p);
            double best_d2 = band * band;
            int64_t best = -1;
            for (int dx = -1; dx <= 1; ++dx) {
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dz = -1; dz <= 1; ++dz) {
                        const auto it = grid.find({center.x + dx, center.y + dy, center.z + dz});
                        if (it == grid.end()) continue;
                        for (const uint32_t j : it->second) {
                            if (clean[j] == clean[i]) continue;
                            const Vec3 d = scene.points[j] - p;
                            const double d2 = d.dot(d);
                            if (d2 <= best_d2 && (best < 0 || d2 < best_d2 ||
                                                  static_cast<int64_t>(j) < best)) {
                                best_d2 = d2;
                                best = j;
                            }
                        }
                    }
                }
            }
            if (best >= 0 && rng.bernoulli(spec.boundary_rate))
                out.noisy_labels[i] = clean[static_cast<size_t>(best)];
        }
    }

    if (spec.unlabeled_rate > 0.0) {
        for (size_t i = 0; i < n; ++i)
            if (rng.bernoulli(spec.unlabeled_rate)) out.noisy_labels[i] = kUnlabeledId;
    }

    return out;
}

}  // namespace adaco
