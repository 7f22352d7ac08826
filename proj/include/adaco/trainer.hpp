#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "adaco/corrector.hpp"
#include "adaco/curvefit.hpp"
#include "adaco/geometry.hpp"
#include "adaco/history.hpp"
#include "adaco/loss.hpp"
#include "adaco/math.hpp"
#include "adaco/scene.hpp"

namespace adaco {

// One hidden layer, max(0, .) nonlinearity, raw features normalized by fixed
// constants inside the forward pass.
struct ModelParams {
    size_t feature_dim = 0, hidden_dim = 0, class_count = 0;
    std::vector<double> w1, b1;  // hidden x feature, hidden
    std::vector<double> w2, b2;  // classes x hidden, classes

    void validate() const;
};

enum class CorrectMode { once, each_down };
enum class TrainLossMode { arl, ce_only };

struct TrainConfig {
    int epochs = 40;
    double learning_rate = 0.01;
    size_t batch_size = 4096;
    double momentum = 0.9;
    double weight_decay = 1e-4;  // L2 on weights; bounds the logits under NCE
    uint64_t seed = 0;
    bool cosine_restarts = true;
    int hidden_dim = 64;
    int threads = 1;
    bool corrections_enabled = true;
    CorrectMode correct_mode = CorrectMode::once;
    TrainLossMode loss_mode = TrainLossMode::arl;
    CorrectorConfig corrector;
    LossConfig loss;

    void validate() const;
};

struct SceneGeometry {
    GroundFit ground;
    ClusterSet clusters;
};

SceneGeometry analyze_scene(const std::vector<Vec3>& points, const CorrectorConfig& config);

// Per-point features: x, y, z, height above the fitted ground plane,
// neighbor count within 0.6 m (self included), cluster-size bucket
// (0 for unclustered, else 1 + floor(log2(size)) capped at 7).
inline constexpr double kNeighborRadius = 0.6;
inline constexpr size_t kFeatureDim = 6;
Matrix featurize(const std::vector<Vec3>& points, const SceneGeometry& geometry);

// Training view of a scene; deliberately carries no clean labels.
struct TrainScene {
    std::string id;
    std::vector<Vec3> points;
    LabelArray labels;
};
TrainScene make_train_scene(const SampleScene& scene);

struct EpochStats {
    int epoch = 0;
    double mean_train_miou = 0.0;
    double mean_loss = 0.0;
    double learning_rate = 0.0;
    size_t corrected_total = 0;
};

struct TrainResult {
    ModelParams model;
    std::vector<LearningCurve> curves;          // one per scene, dataset order
    std::vector<CorrectionReport> reports;
    std::vector<LabelArray> final_labels;       // refurbished where corrected
    std::vector<EpochStats> epoch_stats;
};

// The outer loop: each epoch forwards every sample, records predictions into
// the history, appends training mIoU against the current (noisy or
// refurbished) labels, refits the learning curve, fires the correction
// trigger, refurbishes, then runs the SGD pass. Deterministic for a fixed
// seed at one thread.
TrainResult train(std::vector<TrainScene> dataset, const ClassVocabulary& classes,
                  const TrainConfig& config);

struct Prediction {
    LabelArray labels;
    Matrix probabilities;  // N x K
};

Prediction predict(const ModelParams& model, const Matrix& features);
Prediction predict_scene(const ModelParams& model, const std::vector<Vec3>& points,
                         const CorrectorConfig& corrector);

// Checkpoint: magic "ADCOMDL1", three uint32 LE dims (feature, hidden,
// classes), then float32 LE blobs w1, b1, w2, b2.
void save_model(const ModelParams& model, const std::filesystem::path& path);
ModelParams load_model(const std::filesystem::path& path);

}  // namespace adaco
