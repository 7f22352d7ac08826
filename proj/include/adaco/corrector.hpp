#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adaco/geometry.hpp"
#include "adaco/history.hpp"
#include "adaco/rng.hpp"
#include "adaco/scene.hpp"

namespace adaco {

// Reliable-label counts inside one cluster/reliable-set intersection.
struct FrequencyVector {
    std::vector<uint32_t> counts;  // indexed by class

    uint32_t max_count() const;
    bool all_zero() const { return max_count() == 0; }
};

struct CorrectionReport {
    std::string sample_id;
    int correction_epoch = 0;
    size_t n_reliable = 0;
    size_t n_clusters_touched = 0;
    size_t n_points_relabeled = 0;
    // (K+1) x (K+1) counts, row = old label, col = new label; index K stands
    // for the unlabeled sentinel.
    std::vector<uint64_t> flips;
    uint16_t num_classes = 0;

    uint64_t& flip(uint16_t from, uint16_t to);
    uint64_t flip(uint16_t from, uint16_t to) const;
    std::string to_json_line() const;
};

FrequencyVector cluster_frequency(const std::vector<uint32_t>& cluster_members,
                                  const ReliableSet& reliable, uint16_t num_classes);

// Classes whose count reaches max(counts) / omega (and is nonzero).
std::vector<uint16_t> winner_candidates(const FrequencyVector& freq, double omega);

// Uniform seeded draw among the candidates; nothing for an all-zero vector.
std::optional<uint16_t> winner_label(const FrequencyVector& freq, double omega, Rng& rng);

struct RefurbishResult {
    LabelArray labels;
    CorrectionReport report;
};

// One correction pass: every cluster with a non-empty reliable intersection
// is wholly relabeled to its winner; reliable points outside any cluster
// keep their own reliable label; everything else is untouched. With
// freeze_ground set, ground-excluded points are never relabeled.
RefurbishResult refurbish_labels(const LabelArray& current, const ClusterSet& clusters,
                                 const ReliableSet& reliable, const CorrectorConfig& config,
                                 uint16_t num_classes, const std::string& sample_id, int epoch);

// Convenience wrapper that swaps the refurbished labels into the scene.
CorrectionReport refurbish_sample(SampleScene& scene, const ClusterSet& clusters,
                                  const ReliableSet& reliable, const CorrectorConfig& config,
                                  int epoch);

// The labels used for gradient computation: the full current array
// (refurbished where corrected, noisy elsewhere); no point is masked out.
const LabelArray& apply_full_supervision(const SampleScene& scene);

}  // namespace adaco
