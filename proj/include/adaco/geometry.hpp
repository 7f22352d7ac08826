#pragma once

#include <cstdint>
#include <vector>

#include "adaco/math.hpp"
#include "adaco/scene.hpp"

namespace adaco {

struct GroundModel {
    Vec3 normal{0, 0, 1};  // unit length
    double offset = 0.0;   // plane: normal . p + offset = 0
    double inlier_tol = 0.2;

    double signed_distance(const Vec3& p) const { return normal.dot(p) + offset; }
};

struct GroundFit {
    GroundModel model;
    std::vector<uint8_t> inliers;  // one flag per input point
    size_t inlier_count = 0;
};

// RANSAC plane over random point triplets; the highest-consensus plane wins.
// Degenerate (near-collinear) triplets are skipped; if every iteration is
// degenerate the fit fails. Deterministic for a fixed seed.
GroundFit fit_ground(const std::vector<Vec3>& points, int iterations, double tol, uint64_t seed);

// Axis-aligned x/y tiling of the bounding box with unbounded z. Returns the
// index subsets of non-empty tiles; with stride == block the subsets
// partition [0, N).
std::vector<std::vector<uint32_t>> partition_blocks(const std::vector<Vec3>& points, double block,
                                                    double stride);

struct ClusterSet {
    static constexpr int32_t kNoise = -1;
    static constexpr int32_t kExcluded = -2;  // e.g. ground points, never clustered

    std::vector<int32_t> assignment;
    int32_t count = 0;

    std::vector<std::vector<uint32_t>> members() const;  // index lists per cluster id
};

// Classic density clustering: a point is core iff it has >= min_pts
// neighbors within eps (itself included); clusters are maximal
// density-connected sets; border points join the first core that reaches
// them; everything else is noise. Neighbor queries run on a uniform grid but
// the result is identical to the quadratic scan for a fixed point order.
ClusterSet dbscan(const std::vector<Vec3>& points, double eps, int min_pts);

// Ground-aware clustering used by the corrector: non-ground points are tiled
// into blocks (stride == block) and DBSCAN runs per block; cluster ids are
// dense across the scene and never merge across block borders. Ground points
// get kExcluded.
ClusterSet cluster_non_ground(const std::vector<Vec3>& points,
                              const std::vector<uint8_t>& ground_mask, double eps, int min_pts,
                              double block);

}  // namespace adaco
