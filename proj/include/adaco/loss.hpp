#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "adaco/math.hpp"
#include "adaco/scene.hpp"

namespace adaco {

// Weights of the composite training loss. The correction phase adds the
// robust pair weighted (nce_weight, mae_weight) and de-weights plain
// cross-entropy to (1 + ce_deweight).
struct LossConfig {
    double nce_weight = 100.0;  // lambda
    double mae_weight = 1.0;    // beta
    double ce_deweight = -0.99; // sigma
    bool use_feature_mse = false;
};

enum class LossPhase { warmup, correction };

// One mini-batch: N x K logits plus hard targets; targets equal to
// kUnlabeledId are ignored by every component. Optional feature pairs feed
// the alignment MSE.
struct LogitsBatch {
    Matrix logits;                  // N x K
    LabelArray targets;             // N
    std::optional<Matrix> feat_2d;  // N x F, treated as constant
    std::optional<Matrix> feat_cam; // N x F, receives the MSE gradient

    size_t size() const { return logits.rows; }
    uint16_t num_classes() const { return static_cast<uint16_t>(logits.cols); }
    void validate() const;
};

struct LossResult {
    double value = 0.0;
    Matrix grad_logits;  // same shape as the batch logits
};

struct FeatureMseResult {
    double value = 0.0;
    Matrix grad_cam;  // d value / d feat_cam
};

// Mean over valid points of -log p(target); log-sum-exp stabilized.
LossResult softmax_ce(const LogitsBatch& batch);

// Normalized cross-entropy: per point log p(target) / sum_k log p(k),
// averaged over valid points. Bounded in [0, 1].
LossResult nce(const LogitsBatch& batch);

// L1 distance between the one-hot target and the softmax distribution,
// which reduces to 2 * (1 - p(target)). Bounded by 2.
LossResult mae(const LogitsBatch& batch);

// Mean squared elementwise difference between the two feature blocks.
FeatureMseResult feature_mse(const Matrix& feat_2d, const Matrix& feat_cam);

// Lovasz-Softmax: Jaccard-extension loss averaged over the classes present
// among valid targets; the subgradient flows through a fixed sort
// permutation.
LossResult lovasz_softmax(const LogitsBatch& batch);

struct ArlComponents {
    double ce = 0.0;
    double nce = 0.0;
    double mae = 0.0;
    double lovasz = 0.0;
    double feature_mse = 0.0;
};

// Phase weighting of the composite:
//   warmup:      ce + feature_mse + lovasz
//   correction:  lambda*nce + beta*mae + (1 + sigma)*ce + feature_mse + lovasz
double arl_combine(const ArlComponents& parts, const LossConfig& config, LossPhase phase);

struct ArlResult {
    double value = 0.0;
    ArlComponents components;
    Matrix grad_logits;
    std::optional<Matrix> grad_cam;  // present when the feature MSE is active
};

ArlResult arl(const LogitsBatch& batch, const LossConfig& config, LossPhase phase);

// Row-wise softmax with the max subtracted; exposed for reuse by the trainer.
Matrix softmax_rows(const Matrix& logits);

}  // namespace adaco
