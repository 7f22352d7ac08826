#pragma once

#include <cstdint>
#include <vector>

#include "adaco/scene.hpp"

namespace adaco {

struct ConfusionMatrix {
    uint16_t classes = 0;
    std::vector<uint64_t> counts;  // classes x classes, row = ground truth
    uint64_t ignored = 0;          // points whose ground truth is unlabeled

    ConfusionMatrix() = default;
    explicit ConfusionMatrix(uint16_t k) : classes(k), counts(static_cast<size_t>(k) * k, 0) {}

    uint64_t& at(uint16_t gt, uint16_t pred) { return counts[static_cast<size_t>(gt) * classes + pred]; }
    uint64_t at(uint16_t gt, uint16_t pred) const
    {
        return counts[static_cast<size_t>(gt) * classes + pred];
    }
    void accumulate(const ConfusionMatrix& other);
};

// Tallies gt vs prediction; unlabeled ground truth goes to `ignored`.
// Predictions must be real class indices.
ConfusionMatrix confusion(const LabelArray& gt, const LabelArray& pred, uint16_t num_classes);

struct IouSummary {
    double mean = 0.0;
    std::vector<double> per_class;   // NaN for classes with zero union
    std::vector<bool> in_mean;       // classes that entered the mean
};

// IoU_c = TP / (TP + FP + FN); classes with zero union are excluded from the
// mean. Throws undefined_metric when every class is absent.
IouSummary miou(const ConfusionMatrix& cm);

// Mean per-class recall over classes with at least one ground-truth point.
double macc(const ConfusionMatrix& cm);

// Fraction of points with labels == gt over points whose gt is a real class;
// an unlabeled candidate counts as a mismatch.
double label_accuracy(const LabelArray& gt, const LabelArray& labels);

}  // namespace adaco
