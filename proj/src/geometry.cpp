#include "adaco/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <unordered_map>

#include "adaco/rng.hpp"

namespace adaco {

namespace {

struct CellKey {
    int32_t x, y, z;
    bool operator==(const CellKey&) const = default;
};

struct CellHash {
    size_t operator()(const CellKey& k) const
    {
        uint64_t h = mix64(static_cast<uint64_t>(static_cast<uint32_t>(k.x)),
                           static_cast<uint64_t>(static_cast<uint32_t>(k.y)));
        return static_cast<size_t>(mix64(h, static_cast<uint64_t>(static_cast<uint32_t>(k.z))));
    }
};

CellKey cell_of(const Vec3& p, double cell)
{
    return {static_cast<int32_t>(std::floor(p.x / cell)),
            static_cast<int32_t>(std::floor(p.y / cell)),
            static_cast<int32_t>(std::floor(p.z / cell))};
}

// Uniform grid with cell size eps: all neighbors within eps live in the 27
// surrounding cells.
class NeighborGrid {
  public:
    NeighborGrid(const std::vector<Vec3>& points, double eps) : points_(points), eps_(eps)
    {
        cells_.reserve(points.size());
        for (uint32_t i = 0; i < points.size(); ++i) cells_[cell_of(points[i], eps)].push_back(i);
    }

    // Neighbors within eps sorted by index, query point included.
    std::vector<uint32_t> neighbors(uint32_t idx) const
    {
        const Vec3& q = points_[idx];
        const CellKey c = cell_of(q, eps_);
        const double eps2 = eps_ * eps_;
        std::vector<uint32_t> out;
        for (int dx = -1; dx <= 1; ++dx) {
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dz = -1; dz <= 1; ++dz) {
                    const auto it = cells_.find({c.x + dx, c.y + dy, c.z + dz});
                    if (it == cells_.end()) continue;
                    for (const uint32_t j : it->second) {
                        const Vec3 d = points_[j] - q;
                        if (d.dot(d) <= eps2) out.push_back(j);
                    }
                }
            }
        }
        std::sort(out.begin(), out.end());
        return out;
    }

  private:
    const std::vector<Vec3>& points_;
    double eps_;
    std::unordered_map<CellKey, std::vector<uint32_t>, CellHash> cells_;
};

}  // namespace

GroundFit fit_ground(const std::vector<Vec3>& points, int iterations, double tol, uint64_t seed)
{
    if (points.size() < 3) fail(ErrorCode::degenerate_input, "ground fit needs at least 3 points");
    if (iterations < 1) fail(ErrorCode::invalid_argument, "iterations must be >= 1");
    if (!(tol > 0.0)) fail(ErrorCode::invalid_argument, "tolerance must be positive");

    Rng rng(seed);
    const size_t n = points.size();

    bool found = false;
    Vec3 best_normal;
    double best_offset = 0.0;
    size_t best_count = 0;

    for (int it = 0; it < iterations; ++it) {
        const size_t a = rng.uniform_int(n);
        const size_t b = rng.uniform_int(n);
        const size_t c = rng.uniform_int(n);
        if (a == b || a == c || b == c) continue;
        Vec3 normal = (points[b] - points[a]).cross(points[c] - points[a]);
        const double len = normal.norm();
        if (len < 1e-12) continue;  // collinear triplet
        normal = normal * (1.0 / len);
        const double offset = -normal.dot(points[a]);

        size_t count = 0;
        for (const Vec3& p : points)
            if (std::abs(normal.dot(p) + offset) <= tol) ++count;
        if (!found || count > best_count) {
            found = true;
            best_count = count;
            best_normal = normal;
            best_offset = offset;
        }
    }
    if (!found) fail(ErrorCode::degenerate_input, "all RANSAC iterations degenerate");

    // Canonical orientation: point the normal upward.
    if (best_normal.z < 0.0 || (best_normal.z == 0.0 && (best_normal.x < 0.0 ||
        (best_normal.x == 0.0 && best_normal.y < 0.0)))) {
        best_normal = best_normal * -1.0;
        best_offset = -best_offset;
    }

    GroundFit fit;
    fit.model.normal = best_normal;
    fit.model.offset = best_offset;
    fit.model.inlier_tol = tol;
    fit.inliers.assign(n, 0);
    for (size_t i = 0; i < n; ++i) {
        if (std::abs(fit.model.signed_distance(points[i])) <= tol) {
            fit.inliers[i] = 1;
            ++fit.inlier_count;
        }
    }
    return fit;
}

std::vector<std::vector<uint32_t>> partition_blocks(const std::vector<Vec3>& points, double block,
                                                    double stride)
{
    if (!(block > 0.0) || !(stride > 0.0))
        fail(ErrorCode::invalid_argument, "block and stride must be positive");
    if (points.empty()) return {};

    double min_x = points[0].x, max_x = points[0].x;
    double min_y = points[0].y, max_y = points[0].y;
    for (const Vec3& p : points) {
        min_x = std::min(min_x, p.x);
        max_x = std::max(max_x, p.x);
        min_y = std::min(min_y, p.y);
        max_y = std::max(max_y, p.y);
    }
    const auto tiles = [&](double lo, double hi) {
        return static_cast<int64_t>(std::floor((hi - lo) / stride)) + 1;
    };
    const int64_t nx = tiles(min_x, max_x);
    const int64_t ny = tiles(min_y, max_y);

    std::vector<std::vector<uint32_t>> blocks(static_cast<size_t>(nx * ny));
    for (uint32_t i = 0; i < points.size(); ++i) {
        const Vec3& p = points[i];
        // A point can fall into several tiles when stride < block.
        const int64_t last_x = std::min<int64_t>(nx - 1,
            static_cast<int64_t>(std::floor((p.x - min_x) / stride)));
        const int64_t last_y = std::min<int64_t>(ny - 1,
            static_cast<int64_t>(std::floor((p.y - min_y) / stride)));
        for (int64_t bx = last_x; bx >= 0; --bx) {
            if (p.x - (min_x + static_cast<double>(bx) * stride) >= block) break;
            for (int64_t by = last_y; by >= 0; --by) {
                if (p.y - (min_y + static_cast<double>(by) * stride) >= block) break;
                blocks[static_cast<size_t>(bx * ny + by)].push_back(i);
            }
        }
    }

    std::vector<std::vector<uint32_t>> out;
    for (auto& b : blocks)
        if (!b.empty()) out.push_back(std::move(b));
    return out;
}

std::vector<std::vector<uint32_t>> ClusterSet::members() const
{
    std::vector<std::vector<uint32_t>> out(static_cast<size_t>(count));
    for (uint32_t i = 0; i < assignment.size(); ++i)
        if (assignment[i] >= 0) out[static_cast<size_t>(assignment[i])].push_back(i);
    return out;
}

ClusterSet dbscan(const std::vector<Vec3>& points, double eps, int min_pts)
{
    if (!(eps > 0.0)) fail(ErrorCode::invalid_argument, "eps must be positive");
    if (min_pts < 1) fail(ErrorCode::invalid_argument, "min_pts must be >= 1");

    const uint32_t n = static_cast<uint32_t>(points.size());
    ClusterSet set;
    set.assignment.assign(n, ClusterSet::kNoise);
    if (n == 0) return set;

    NeighborGrid grid(points, eps);
    std::vector<uint8_t> core(n, 0);
    std::vector<std::vector<uint32_t>> adj(n);
    for (uint32_t i = 0; i < n; ++i) {
        adj[i] = grid.neighbors(i);
        core[i] = adj[i].size() >= static_cast<size_t>(min_pts);
    }

    std::vector<uint8_t> visited(n, 0);
    for (uint32_t seed = 0; seed < n; ++seed) {
        if (!core[seed] || visited[seed]) continue;
        const int32_t cluster = set.count++;
        std::deque<uint32_t> frontier{seed};
        visited[seed] = 1;
        set.assignment[seed] = cluster;
        while (!frontier.empty()) {
            const uint32_t p = frontier.front();
            frontier.pop_front();
            for (const uint32_t q : adj[p]) {
                if (set.assignment[q] == ClusterSet::kNoise) set.assignment[q] = cluster;
                if (core[q] && !visited[q]) {
                    visited[q] = 1;
                    frontier.push_back(q);
                }
            }
        }
    }
    return set;
}

ClusterSet cluster_non_ground(const std::vector<Vec3>& points,
                              const std::vector<uint8_t>& ground_mask, double eps, int min_pts,
                              double block)
{
    if (ground_mask.size() != points.size())
        fail(ErrorCode::length_mismatch, "ground mask length != point count");

    std::vector<uint32_t> non_ground;
    for (uint32_t i = 0; i < points.size(); ++i)
        if (!ground_mask[i]) non_ground.push_back(i);

    ClusterSet set;
    set.assignment.assign(points.size(), ClusterSet::kExcluded);
    for (const uint32_t i : non_ground) set.assignment[i] = ClusterSet::kNoise;
    if (non_ground.empty()) return set;

    std::vector<Vec3> sub(non_ground.size());
    for (size_t i = 0; i < non_ground.size(); ++i) sub[i] = points[non_ground[i]];

    for (const auto& tile : partition_blocks(sub, block, block)) {
        std::vector<Vec3> tile_points(tile.size());
        for (size_t i = 0; i < tile.size(); ++i) tile_points[i] = sub[tile[i]];
        const ClusterSet local = dbscan(tile_points, eps, min_pts);
        for (size_t i = 0; i < tile.size(); ++i) {
            const int32_t a = local.assignment[i];
            if (a >= 0) set.assignment[non_ground[tile[i]]] = set.count + a;
        }
        set.count += local.count;
    }
    return set;
}

}  // namespace adaco
