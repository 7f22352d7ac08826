#include "adaco/labelgen.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <unordered_map>

#include <json.hpp>

#include "adaco/rng.hpp"

namespace adaco {

namespace {

// Lowercase and split on every non-alphanumeric character, so "semi-trailer"
// and "Semi Trailer" normalize to the same token sequence.
std::vector<std::string> tokenize(const std::string& text)
{
    std::vector<std::string> tokens;
    std::string current;
    for (const char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

struct VoxelKey {
    int32_t x, y, z;
    bool operator==(const VoxelKey&) const = default;
};

struct VoxelHash {
    size_t operator()(const VoxelKey& k) const
    {
        const uint64_t h = mix64(static_cast<uint64_t>(static_cast<uint32_t>(k.x)),
                                 static_cast<uint64_t>(static_cast<uint32_t>(k.y)));
        return static_cast<size_t>(mix64(h, static_cast<uint64_t>(static_cast<uint32_t>(k.z))));
    }
};

VoxelKey voxel_of(const Vec3& p, double size)
{
    return {static_cast<int32_t>(std::floor(p.x / size)),
            static_cast<int32_t>(std::floor(p.y / size)),
            static_cast<int32_t>(std::floor(p.z / size))};
}

struct VoxelVotes {
    // Per class: vote count and the smallest temporal distance that voted it.
    std::vector<std::pair<uint16_t, std::pair<uint32_t, int>>> by_class;

    void add(uint16_t label, int temporal_distance)
    {
        for (auto& [cls, data] : by_class) {
            if (cls == label) {
                ++data.first;
                data.second = std::min(data.second, temporal_distance);
                return;
            }
        }
        by_class.push_back({label, {1, temporal_distance}});
    }

    // Majority, ties toward smaller temporal distance, then lower class.
    uint16_t winner() const
    {
        uint16_t best = kUnlabeledId;
        uint32_t best_count = 0;
        int best_dist = std::numeric_limits<int>::max();
        for (const auto& [cls, data] : by_class) {
            const auto& [count, dist] = data;
            if (count > best_count || (count == best_count && dist < best_dist) ||
                (count == best_count && dist == best_dist && cls < best)) {
                best = cls;
                best_count = count;
                best_dist = dist;
            }
        }
        return best;
    }
};

}  // namespace

LabelDictionary LabelDictionary::from_entries(
    const std::vector<std::pair<std::string, uint16_t>>& synonym_to_class, uint16_t num_classes)
{
    LabelDictionary dict;
    std::set<std::vector<std::string>> seen;
    for (const auto& [synonym, class_index] : synonym_to_class) {
        if (class_index >= num_classes)
            fail(ErrorCode::label_out_of_range, "dictionary target outside class range");
        Entry entry{tokenize(synonym), class_index};
        if (entry.tokens.empty())
            fail(ErrorCode::invalid_argument, "dictionary synonym is empty: \"" + synonym + "\"");
        if (!seen.insert(entry.tokens).second)
            fail(ErrorCode::invalid_argument, "duplicate dictionary synonym: \"" + synonym + "\"");
        dict.entries_.push_back(std::move(entry));
    }
    std::stable_sort(dict.entries_.begin(), dict.entries_.end(),
                     [](const Entry& a, const Entry& b) { return a.tokens.size() > b.tokens.size(); });
    return dict;
}

LabelDictionary LabelDictionary::from_json_file(const std::filesystem::path& path,
                                                const ClassVocabulary& vocabulary)
{
    std::ifstream in(path);
    if (!in) fail(ErrorCode::io_failure, "cannot open " + path.string());
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        fail(ErrorCode::malformed_file, path.string() + ": expected a JSON object");

    std::vector<std::pair<std::string, uint16_t>> pairs;
    for (const auto& [class_name, synonyms] : j.items()) {
        const auto index = vocabulary.index_of(class_name);
        if (!index)
            fail(ErrorCode::unknown_class,
                 "dictionary class \"" + class_name + "\" not in the vocabulary");
        if (!synonyms.is_array())
            fail(ErrorCode::malformed_file, "synonyms for \"" + class_name + "\" must be a list");
        for (const auto& s : synonyms) pairs.emplace_back(s.get<std::string>(), *index);
    }
    return from_entries(pairs, vocabulary.size());
}

uint16_t map_description(const std::string& text, const LabelDictionary& dict)
{
    const std::vector<std::string> tokens = tokenize(text);
    if (tokens.empty()) return kUnlabeledId;
    // Entries are sorted longest-first, so the first containment match wins.
    for (const auto& entry : dict.entries()) {
        if (entry.tokens.size() > tokens.size()) continue;
        for (size_t start = 0; start + entry.tokens.size() <= tokens.size(); ++start) {
            if (std::equal(entry.tokens.begin(), entry.tokens.end(), tokens.begin() + start))
                return entry.class_index;
        }
    }
    return kUnlabeledId;
}

LabelArray unproject_labels(const SampleScene& scene, const std::vector<LabelMap2D>& maps,
                            const UnprojectOptions& options)
{
    const size_t n = scene.point_count();
    for (const LabelMap2D& map : maps) map.validate(scene.classes.size());

    // candidate[view] per point, kUnlabeledId when the view contributes none.
    std::vector<LabelArray> candidates(maps.size(), LabelArray(n, kUnlabeledId));

    for (size_t v = 0; v < maps.size(); ++v) {
        const LabelMap2D& map = maps[v];
        std::vector<double> depth;
        std::vector<uint32_t> nearest;
        if (options.nearest_depth_only) {
            depth.assign(static_cast<size_t>(map.width) * map.height,
                         std::numeric_limits<double>::infinity());
            nearest.assign(depth.size(), 0);
        }

        for (size_t i = 0; i < n; ++i) {
            const Vec3 cam = map.camera.extrinsic.apply(scene.points[i]);
            if (!(cam.z > 0.0)) continue;
            const double u = map.camera.fx * cam.x / cam.z + map.camera.cx;
            const double v_px = map.camera.fy * cam.y / cam.z + map.camera.cy;
            if (u < 0.0 || v_px < 0.0 || u >= map.width || v_px >= map.height) continue;
            const uint32_t px = static_cast<uint32_t>(u);
            const uint32_t py = static_cast<uint32_t>(v_px);
            const uint16_t label = map.at(px, py);
            if (label == kUnlabeledId) continue;
            if (options.nearest_depth_only) {
                const size_t pixel = static_cast<size_t>(py) * map.width + px;
                if (cam.z < depth[pixel]) {
                    depth[pixel] = cam.z;
                    nearest[pixel] = static_cast<uint32_t>(i);
                }
            } else {
                candidates[v][i] = label;
            }
        }

        if (options.nearest_depth_only) {
            for (size_t pixel = 0; pixel < depth.size(); ++pixel) {
                if (!std::isfinite(depth[pixel])) continue;
                candidates[v][nearest[pixel]] =
                    map.labels[pixel] == kUnlabeledId ? kUnlabeledId : map.labels[pixel];
            }
        }
    }

    LabelArray out(n, kUnlabeledId);
    const uint16_t k_count = scene.classes.size();
    std::vector<uint32_t> counts(k_count);
    std::vector<size_t> first_view(k_count);
    for (size_t i = 0; i < n; ++i) {
        std::fill(counts.begin(), counts.end(), 0);
        bool any = false;
        for (size_t v = 0; v < maps.size(); ++v) {
            const uint16_t c = candidates[v][i];
            if (c == kUnlabeledId) continue;
            if (counts[c] == 0) first_view[c] = v;
            ++counts[c];
            any = true;
        }
        if (!any) continue;
        uint16_t best = kUnlabeledId;
        for (uint16_t c = 0; c < k_count; ++c) {
            if (counts[c] == 0) continue;
            if (best == kUnlabeledId || counts[c] > counts[best] ||
                (counts[c] == counts[best] && first_view[c] < first_view[best]))
                best = c;  // equal count and view: lower class index wins
        }
        out[i] = best;
    }
    return out;
}

std::vector<LabelArray> voxel_vote(const FrameSequence& seq, double voxel_size)
{
    if (!(voxel_size > 0.0)) fail(ErrorCode::invalid_argument, "voxel size must be positive");
    if (seq.adjacency < 0) fail(ErrorCode::invalid_argument, "adjacency must be >= 0");

    const int n_frames = static_cast<int>(seq.frames.size());
    for (const auto& frame : seq.frames) {
        if (frame.labels.size() != frame.scene.point_count())
            fail(ErrorCode::length_mismatch, "frame labels length != point count");
    }

    std::vector<LabelArray> refined(seq.frames.size());
    for (int i = 0; i < n_frames; ++i) {
        const auto& current = seq.frames[static_cast<size_t>(i)];
        const Mat4 world_to_current = current.scene.pose.rigid_inverse();

        std::unordered_map<VoxelKey, VoxelVotes, VoxelHash> votes;
        for (int j = std::max(0, i - seq.adjacency);
             j <= std::min(n_frames - 1, i + seq.adjacency); ++j) {
            const auto& neighbor = seq.frames[static_cast<size_t>(j)];
            // The current frame votes in its own coordinates; composing
            // pose^-1 * pose would wobble boundary points across voxels.
            const bool is_self = j == i;
            const Mat4 to_current = is_self ? Mat4::identity() : world_to_current * neighbor.scene.pose;
            const int distance = std::abs(j - i);
            for (size_t p = 0; p < neighbor.scene.point_count(); ++p) {
                const uint16_t label = neighbor.labels[p];
                if (label == kUnlabeledId) continue;
                const Vec3 q = is_self ? neighbor.scene.points[p]
                                       : to_current.apply(neighbor.scene.points[p]);
                votes[voxel_of(q, voxel_size)].add(label, distance);
            }
        }

        LabelArray& out = refined[static_cast<size_t>(i)];
        out.assign(current.scene.point_count(), kUnlabeledId);
        for (size_t p = 0; p < current.scene.point_count(); ++p) {
            const auto it = votes.find(voxel_of(current.scene.points[p], voxel_size));
            if (it == votes.end()) {
                out[p] = current.labels[p];  // no labeled evidence; keep as-is
                continue;
            }
            out[p] = it->second.winner();
        }
    }
    return refined;
}

}  // namespace adaco
