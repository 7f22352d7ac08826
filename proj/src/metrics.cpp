#include "adaco/metrics.hpp"

#include <cmath>
#include <limits>

namespace adaco {

void ConfusionMatrix::accumulate(const ConfusionMatrix& other)
{
    if (other.classes != classes) fail(ErrorCode::length_mismatch, "class count mismatch");
    for (size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
    ignored += other.ignored;
}

ConfusionMatrix confusion(const LabelArray& gt, const LabelArray& pred, uint16_t num_classes)
{
    if (gt.size() != pred.size())
        fail(ErrorCode::length_mismatch, "ground truth and prediction lengths differ");
    ConfusionMatrix cm(num_classes);
    for (size_t i = 0; i < gt.size(); ++i) {
        if (gt[i] == kUnlabeledId) {
            ++cm.ignored;
            continue;
        }
        if (gt[i] >= num_classes || pred[i] >= num_classes)
            fail(ErrorCode::label_out_of_range, "label outside class range");
        ++cm.at(gt[i], pred[i]);
    }
    return cm;
}

IouSummary miou(const ConfusionMatrix& cm)
{
    IouSummary out;
    out.per_class.assign(cm.classes, std::numeric_limits<double>::quiet_NaN());
    out.in_mean.assign(cm.classes, false);

    double acc = 0.0;
    size_t used = 0;
    for (uint16_t c = 0; c < cm.classes; ++c) {
        const uint64_t tp = cm.at(c, c);
        uint64_t fp = 0, fn = 0;
        for (uint16_t o = 0; o < cm.classes; ++o) {
            if (o == c) continue;
            fp += cm.at(o, c);
            fn += cm.at(c, o);
        }
        const uint64_t uni = tp + fp + fn;
        if (uni == 0) continue;
        out.per_class[c] = static_cast<double>(tp) / static_cast<double>(uni);
        out.in_mean[c] = true;
        acc += out.per_class[c];
        ++used;
    }
    if (used == 0) fail(ErrorCode::undefined_metric, "no class present in the confusion matrix");
    out.mean = acc / static_cast<double>(used);
    return out;
}

double macc(const ConfusionMatrix& cm)
{
    double acc = 0.0;
    size_t used = 0;
    for (uint16_t c = 0; c < cm.classes; ++c) {
        uint64_t row = 0;
        for (uint16_t o = 0; o < cm.classes; ++o) row += cm.at(c, o);
        if (row == 0) continue;
        acc += static_cast<double>(cm.at(c, c)) / static_cast<double>(row);
        ++used;
    }
    if (used == 0) fail(ErrorCode::undefined_metric, "no ground-truth point in any class");
    return acc / static_cast<double>(used);
}

double label_accuracy(const LabelArray& gt, const LabelArray& labels)
{
    if (gt.size() != labels.size())
        fail(ErrorCode::length_mismatch, "label array lengths differ");
    size_t valid = 0, hit = 0;
    for (size_t i = 0; i < gt.size(); ++i) {
        if (gt[i] == kUnlabeledId) continue;
        ++valid;
        if (labels[i] == gt[i]) ++hit;
    }
    if (valid == 0) fail(ErrorCode::undefined_metric, "no labeled ground-truth point");
    return static_cast<double>(hit) / static_cast<double>(valid);
}

}  // namespace adaco
