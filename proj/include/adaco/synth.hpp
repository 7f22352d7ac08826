#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "adaco/scene.hpp"

namespace adaco {

struct IntRange {
    int lo = 0, hi = 0;  // inclusive
    bool valid() const { return lo >= 0 && hi >= lo; }
};

struct NoiseSpec {
    double symmetric_rate = 0.0;   // flip to a uniformly random other class
    double boundary_band = 0.0;    // meters around a clean-label boundary
    double boundary_rate = 0.0;    // flip chance inside the band
    double unlabeled_rate = 0.0;   // drop to the unlabeled sentinel
    // Optional K x K row-major confusion mode replacing the symmetric flips:
    // row = clean class, entries = transition probabilities (rows sum to 1).
    std::vector<double> confusion;

    void validate(uint16_t num_classes) const;
};

// Scene recipe: a z~0 ground sheet plus separated objects whose shape cycles
// through box / cylinder / pole / wall across the non-ground classes. The
// vocabulary must contain a class named "ground".
struct SynthConfig {
    int n_scenes = 1;
    ClassVocabulary classes;
    IntRange objects_per_scene{8, 12};
    IntRange points_per_object{200, 260};
    IntRange ground_points{2600, 3000};
    double ground_extent = 24.0;  // square side, meters
    NoiseSpec noise;
    uint64_t rng_seed = 0;

    void validate() const;
};

// Deterministic in (cfg.rng_seed, index). clean_labels are fully populated
// and noisy_labels start as a copy of them.
SampleScene generate_scene(const SynthConfig& cfg, int index);

// Applies symmetric, boundary and unlabeled noise in that order to a copy of
// the scene; coordinates and clean labels are untouched.
SampleScene inject_noise(const SampleScene& scene, const NoiseSpec& spec, uint64_t seed);

}  // namespace adaco
