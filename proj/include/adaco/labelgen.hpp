#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "adaco/scene.hpp"

namespace adaco {

// Lowercased synonym phrase -> class index. Built from a JSON file mapping
// class name -> synonym list; longest phrase wins on lookup.
class LabelDictionary {
  public:
    LabelDictionary() = default;

    // Throws unknown_class when a dictionary class name is missing from the
    // vocabulary, invalid_argument on duplicate synonyms.
    static LabelDictionary from_json_file(const std::filesystem::path& path,
                                          const ClassVocabulary& vocabulary);
    static LabelDictionary from_entries(
        const std::vector<std::pair<std::string, uint16_t>>& synonym_to_class,
        uint16_t num_classes);

    // Entries as (synonym tokens, class), longest synonyms first.
    struct Entry {
        std::vector<std::string> tokens;
        uint16_t class_index;
    };
    const std::vector<Entry>& entries() const { return entries_; }

  private:
    std::vector<Entry> entries_;
};

// Case-folded token/phrase match of `text` against the dictionary,
// longest-match-first; returns kUnlabeledId when nothing matches.
uint16_t map_description(const std::string& text, const LabelDictionary& dict);

struct UnprojectOptions {
    // When set, each pixel only labels its nearest-depth point per view
    // instead of every point in the frustum.
    bool nearest_depth_only = false;
};

// Back-projects 2D label maps onto the points: a point transformed into a
// camera frame with z > 0 whose pinhole projection lands inside the image
// takes that pixel's label as a candidate. Candidates across views resolve
// by majority, then earliest contributing view, then lowest class index.
LabelArray unproject_labels(const SampleScene& scene, const std::vector<LabelMap2D>& maps,
                            const UnprojectOptions& options = {});

struct FrameSequence {
    struct Frame {
        SampleScene scene;
        std::vector<LabelMap2D> maps;
        LabelArray labels;  // unprojected labels, filled before voting
    };
    std::vector<Frame> frames;
    int adjacency = 2;  // neighbor frames considered per side
};

// Inter-frame voxel voting: neighbors within `adjacency` are pose-aligned
// into each frame, labeled points hash into voxels, and every point adopts
// its voxel's majority label. Ties break toward the temporally nearest
// frame's vote, then the lowest class index. Unlabeled points only adopt a
// label when the voxel saw at least one labeled point.
std::vector<LabelArray> voxel_vote(const FrameSequence& seq, double voxel_size);

}  // namespace adaco
