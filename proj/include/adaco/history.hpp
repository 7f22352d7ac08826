#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "adaco/scene.hpp"

namespace adaco {

struct ReliableSet {
    std::vector<uint32_t> indices;  // sorted, unique
    LabelArray labels;              // reliable label per index
};

// Per-sample, per-point ring buffer of the last `capacity` hard predictions.
// Entries are always real class indices; predictions never emit the
// unlabeled sentinel.
class PredictionHistory {
  public:
    PredictionHistory(uint16_t num_classes, int capacity);

    void record(const std::string& sample, const LabelArray& predictions);

    int rounds(const std::string& sample) const;       // valid entries, <= capacity
    size_t point_count(const std::string& sample) const;
    bool has_sample(const std::string& sample) const;

    // P(k) = |{stored predictions == k}| / rounds; sums to 1.
    std::vector<double> class_distribution(const std::string& sample, uint32_t point) const;

    // 1 minus the normalized entropy of class_distribution: 1 for a
    // unanimous history, 0 for a uniform one. Natural log, 0*log 0 = 0.
    double confidence(const std::string& sample, uint32_t point) const;

    // Points whose confidence reaches `gamma`, with their mode prediction
    // (ties break toward the lowest class index).
    ReliableSet reliable_set(const std::string& sample, double gamma) const;

    // Binary dump: two uint32 LE (point count, rounds) then rounds x N
    // uint16 LE prediction rows, oldest round first.
    void dump(const std::string& sample, const std::filesystem::path& path) const;

    uint16_t num_classes() const { return num_classes_; }
    int capacity() const { return capacity_; }

  private:
    struct SampleHistory {
        size_t n = 0;
        int rounds = 0;
        int head = 0;                 // next slot to overwrite
        std::vector<uint16_t> ring;   // capacity rows of n entries
    };

    const SampleHistory& require(const std::string& sample) const;
    void count_classes(const SampleHistory& h, uint32_t point, std::vector<uint32_t>& counts) const;

    uint16_t num_classes_;
    int capacity_;
    std::map<std::string, SampleHistory> samples_;
};

}  // namespace adaco
