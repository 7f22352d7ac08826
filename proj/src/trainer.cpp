#include "adaco/trainer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include "adaco/metrics.hpp"
#include "adaco/rng.hpp"
#include "adaco/util.hpp"

namespace adaco {

namespace {

// Fixed input scaling keeps the raw feature contract while conditioning the
// optimizer; baked into the forward pass so checkpoints stay portable. The
// local-density channel carries most of the class signal and gets the
// largest gain; plain coordinates carry the least.
constexpr std::array<double, kFeatureDim> kFeatureScale = {0.05, 0.05, 0.25, 0.25, 1.0 / 16.0,
                                                           0.25};

struct CellKey {
    int32_t x, y, z;
    bool operator==(const CellKey&) const = default;
};
struct CellHash {
    size_t operator()(const CellKey& k) const
    {
        const uint64_t h = mix64(static_cast<uint64_t>(static_cast<uint32_t>(k.x)),
                                 static_cast<uint64_t>(static_cast<uint32_t>(k.y)));
        return static_cast<size_t>(mix64(h, static_cast<uint64_t>(static_cast<uint32_t>(k.z))));
    }
};

std::vector<uint32_t> neighbor_counts(const std::vector<Vec3>& points, double radius)
{
    std::unordered_map<CellKey, std::vector<uint32_t>, CellHash> grid;
    const auto key_of = [radius](const Vec3& p) {
        return CellKey{static_cast<int32_t>(std::floor(p.x / radius)),
                       static_cast<int32_t>(std::floor(p.y / radius)),
                       static_cast<int32_t>(std::floor(p.z / radius))};
    };
    for (uint32_t i = 0; i < points.size(); ++i) grid[key_of(points[i])].push_back(i);

    std::vector<uint32_t> counts(points.size(), 0);
    const double r2 = radius * radius;
    for (uint32_t i = 0; i < points.size(); ++i) {
        const CellKey c = key_of(points[i]);
        uint32_t n = 0;
        for (int dx = -1; dx <= 1; ++dx)
            for (int dy = -1; dy <= 1; ++dy)
                for (int dz = -1; dz <= 1; ++dz) {
                    const auto it = grid.find({c.x + dx, c.y + dy, c.z + dz});
                    if (it == grid.end()) continue;
                    for (const uint32_t j : it->second) {
                        const Vec3 d = points[j] - points[i];
                        if (d.dot(d) <= r2) ++n;
                    }
                }
        counts[i] = n;
    }
    return counts;
}

// Forward pass over a row subset; returns logits and optionally the hidden
// activations needed for backprop.
Matrix forward_rows(const ModelParams& m, const Matrix& features,
                    const std::vector<uint32_t>& rows, Matrix* hidden_out)
{
    const size_t h_dim = m.hidden_dim, f_dim = m.feature_dim, k_dim = m.class_count;
    Matrix logits(rows.size(), k_dim);
    if (hidden_out) *hidden_out = Matrix(rows.size(), h_dim);
    std::vector<double> scaled(f_dim);
    std::vector<double> hidden(h_dim);
    for (size_t r = 0; r < rows.size(); ++r) {
        const double* x = features.row(rows[r]);
        for (size_t f = 0; f < f_dim; ++f) scaled[f] = x[f] * kFeatureScale[f];
        for (size_t h = 0; h < h_dim; ++h) {
            const double* w = m.w1.data() + h * f_dim;
            double acc = m.b1[h];
            for (size_t f = 0; f < f_dim; ++f) acc += w[f] * scaled[f];
            hidden[h] = acc > 0.0 ? acc : 0.0;
        }
        if (hidden_out) std::copy(hidden.begin(), hidden.end(), hidden_out->row(r));
        for (size_t k = 0; k < k_dim; ++k) {
            const double* w = m.w2.data() + k * h_dim;
            double acc = m.b2[k];
            for (size_t h = 0; h < h_dim; ++h) acc += w[h] * hidden[h];
            logits.at(r, k) = acc;
        }
    }
    return logits;
}

std::vector<uint32_t> all_rows(size_t n)
{
    std::vector<uint32_t> rows(n);
    std::iota(rows.begin(), rows.end(), 0u);
    return rows;
}

struct Gradients {
    std::vector<double> w1, b1, w2, b2;
    explicit Gradients(const ModelParams& m)
        : w1(m.w1.size(), 0.0), b1(m.b1.size(), 0.0), w2(m.w2.size(), 0.0), b2(m.b2.size(), 0.0)
    {
    }
};

// Backprop of d loss / d logits through the two layers.
void backward_rows(const ModelParams& m, const Matrix& features,
                   const std::vector<uint32_t>& rows, const Matrix& hidden,
                   const Matrix& grad_logits, Gradients& g)
{
    const size_t h_dim = m.hidden_dim, f_dim = m.feature_dim, k_dim = m.class_count;
    std::vector<double> dhidden(h_dim);
    std::vector<double> scaled(f_dim);
    for (size_t r = 0; r < rows.size(); ++r) {
        const double* dz = grad_logits.row(r);
        const double* h = hidden.row(r);
        for (size_t k = 0; k < k_dim; ++k) {
            const double d = dz[k];
            if (d == 0.0) continue;
            double* gw2 = g.w2.data() + k * h_dim;
            for (size_t j = 0; j < h_dim; ++j) gw2[j] += d * h[j];
            g.b2[k] += d;
        }
        for (size_t j = 0; j < h_dim; ++j) {
            double acc = 0.0;
            for (size_t k = 0; k < k_dim; ++k) acc += dz[k] * m.w2[k * h_dim + j];
            dhidden[j] = h[j] > 0.0 ? acc : 0.0;
        }
        const double* x = features.row(rows[r]);
        for (size_t f = 0; f < f_dim; ++f) scaled[f] = x[f] * kFeatureScale[f];
        for (size_t j = 0; j < h_dim; ++j) {
            const double d = dhidden[j];
            if (d == 0.0) continue;
            double* gw1 = g.w1.data() + j * f_dim;
            for (size_t f = 0; f < f_dim; ++f) gw1[f] += d * scaled[f];
            g.b1[j] += d;
        }
    }
}

double train_miou(const LabelArray& current, const LabelArray& preds, uint16_t k)
{
    try {
        return miou(confusion(current, preds, k)).mean;
    } catch (const Error& e) {
        if (e.code() == ErrorCode::undefined_metric) return 0.0;
        throw;
    }
}

}  // namespace

void ModelParams::validate() const
{
    if (w1.size() != hidden_dim * feature_dim || b1.size() != hidden_dim ||
        w2.size() != class_count * hidden_dim || b2.size() != class_count)
        fail(ErrorCode::length_mismatch, "model parameter shapes are inconsistent");
    for (const auto* blob : {&w1, &b1, &w2, &b2})
        for (const double v : *blob)
            if (!std::isfinite(v)) fail(ErrorCode::invalid_argument, "non-finite model weight");
}

void TrainConfig::validate() const
{
    if (epochs < 1) fail(ErrorCode::invalid_argument, "epochs must be >= 1");
    if (!(learning_rate > 0.0)) fail(ErrorCode::invalid_argument, "learning rate must be positive");
    if (batch_size < 1) fail(ErrorCode::invalid_argument, "batch size must be >= 1");
    if (momentum < 0.0 || momentum >= 1.0)
        fail(ErrorCode::invalid_argument, "momentum must be in [0, 1)");
    if (weight_decay < 0.0) fail(ErrorCode::invalid_argument, "weight decay must be >= 0");
    if (hidden_dim < 1) fail(ErrorCode::invalid_argument, "hidden width must be >= 1");
    if (threads < 1) fail(ErrorCode::invalid_argument, "threads must be >= 1");
    corrector.validate();
}

SceneGeometry analyze_scene(const std::vector<Vec3>& points, const CorrectorConfig& config)
{
    SceneGeometry geo;
    geo.ground = fit_ground(points, config.ground_iterations, config.ground_tol, config.rng_seed);
    geo.clusters =
        cluster_non_ground(points, geo.ground.inliers, config.eps, config.min_pts, config.block);
    return geo;
}

Matrix featurize(const std::vector<Vec3>& points, const SceneGeometry& geometry)
{
    if (geometry.clusters.assignment.size() != points.size())
        fail(ErrorCode::length_mismatch, "geometry does not match the point count");

    std::vector<uint32_t> cluster_sizes(static_cast<size_t>(geometry.clusters.count), 0);
    for (const int32_t a : geometry.clusters.assignment)
        if (a >= 0) ++cluster_sizes[static_cast<size_t>(a)];

    const std::vector<uint32_t> counts = neighbor_counts(points, kNeighborRadius);

    Matrix out(points.size(), kFeatureDim);
    for (size_t i = 0; i < points.size(); ++i) {
        double* row = out.row(i);
        row[0] = points[i].x;
        row[1] = points[i].y;
        row[2] = points[i].z;
        row[3] = geometry.ground.model.signed_distance(points[i]);
        row[4] = static_cast<double>(counts[i]);
        const int32_t a = geometry.clusters.assignment[i];
        if (a < 0) {
            row[5] = 0.0;
        } else {
            const uint32_t size = cluster_sizes[static_cast<size_t>(a)];
            int bucket = 0;
            while ((size >> (bucket + 1)) != 0 && bucket < 6) ++bucket;
            row[5] = static_cast<double>(1 + bucket);
        }
    }
    return out;
}

TrainScene make_train_scene(const SampleScene& scene)
{
    return {scene.id, scene.points, scene.noisy_labels};
}

Prediction predict(const ModelParams& model, const Matrix& features)
{
    model.validate();
    if (features.cols != model.feature_dim)
        fail(ErrorCode::length_mismatch, "feature dimension mismatch");
    const Matrix logits = forward_rows(model, features, all_rows(features.rows), nullptr);
    Prediction out;
    out.probabilities = softmax_rows(logits);
    out.labels.resize(features.rows);
    for (size_t i = 0; i < features.rows; ++i) {
        const double* p = out.probabilities.row(i);
        size_t best = 0;
        for (size_t k = 1; k < model.class_count; ++k)
            if (p[k] > p[best]) best = k;
        out.labels[i] = static_cast<uint16_t>(best);
    }
    return out;
}

Prediction predict_scene(const ModelParams& model, const std::vector<Vec3>& points,
                         const CorrectorConfig& corrector)
{
    const SceneGeometry geo = analyze_scene(points, corrector);
    return predict(model, featurize(points, geo));
}

TrainResult train(std::vector<TrainScene> dataset, const ClassVocabulary& classes,
                  const TrainConfig& config)
{
    config.validate();
    classes.validate();
    if (dataset.empty()) fail(ErrorCode::empty_batch, "empty training dataset");
    const uint16_t k_count = classes.size();
    for (const TrainScene& s : dataset) {
        if (s.labels.size() != s.points.size())
            fail(ErrorCode::length_mismatch, "scene " + s.id + ": labels != points");
        validate_labels(s.labels, k_count, "scene " + s.id);
    }

    Rng rng(mix64(config.seed, 0x7261696e));

    // Geometry and features are label-independent; compute once.
    std::vector<SceneGeometry> geometry(dataset.size());
    std::vector<Matrix> features(dataset.size());
    for (size_t s = 0; s < dataset.size(); ++s) {
        geometry[s] = analyze_scene(dataset[s].points, config.corrector);
        features[s] = featurize(dataset[s].points, geometry[s]);
    }

    ModelParams model;
    model.feature_dim = kFeatureDim;
    model.hidden_dim = static_cast<size_t>(config.hidden_dim);
    model.class_count = k_count;
    // Small initial weights give the training mIoU an S-shaped rise over
    // several epochs instead of one-epoch convergence; the correction trigger
    // needs an observable learning curve.
    const double limit1 = 0.1 * std::sqrt(6.0 / static_cast<double>(kFeatureDim + model.hidden_dim));
    const double limit2 = 0.1 * std::sqrt(6.0 / static_cast<double>(model.hidden_dim + k_count));
    model.w1.resize(model.hidden_dim * kFeatureDim);
    model.b1.assign(model.hidden_dim, 0.0);
    model.w2.resize(k_count * model.hidden_dim);
    model.b2.assign(k_count, 0.0);
    for (double& w : model.w1) w = rng.uniform(-limit1, limit1);
    for (double& w : model.w2) w = rng.uniform(-limit2, limit2);

    Gradients velocity(model);

    TrainResult result;
    result.curves.resize(dataset.size());
    result.final_labels.resize(dataset.size());
    std::vector<LossPhase> phase(dataset.size(), LossPhase::warmup);
    std::vector<double> last_derivative(dataset.size(), 0.0);
    PredictionHistory history(k_count, config.corrector.history_cap);
    for (size_t s = 0; s < dataset.size(); ++s) result.curves[s].sample_id = dataset[s].id;

    const int restart_period = std::max(1, config.epochs / 4);
    size_t corrected_total = 0;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        // Monitoring pass: predictions, history, learning curves, triggers.
        // Forward passes write disjoint slots, so they parallelize without
        // affecting the result.
        std::vector<Prediction> predictions(dataset.size());
        parallel_for(dataset.size(), config.threads,
                     [&](size_t s) { predictions[s] = predict(model, features[s]); });

        double miou_sum = 0.0;
        for (size_t s = 0; s < dataset.size(); ++s) {
            TrainScene& scene = dataset[s];
            const Prediction& pred = predictions[s];
            history.record(scene.id, pred.labels);

            LearningCurve& curve = result.curves[s];
            curve.miou_series.push_back(train_miou(scene.labels, pred.labels, k_count));
            miou_sum += curve.miou_series.back();

            if (!config.corrections_enabled) continue;
            // Three points interpolate the three-parameter curve exactly, so
            // the trigger only arms once the fit is over-determined and the
            // history window can fill.
            const size_t trigger_floor =
                std::max<size_t>(4, static_cast<size_t>(config.corrector.history_cap));
            if (curve.miou_series.size() < trigger_floor) continue;

            curve.fit = fit_curve(curve.miou_series);
            bool fire = false;
            if (config.correct_mode == CorrectMode::once) {
                if (!curve.corrected && eval_derivative(*curve.fit, 1.0) > 0.0)
                    fire = detect_correction(curve, config.corrector.derivative_threshold)
                               .has_value();
            } else {
                const double d_now =
                    eval_derivative(*curve.fit, static_cast<double>(curve.current_epoch()));
                fire = curve.miou_series.size() >= 4 && d_now < last_derivative[s];
                last_derivative[s] = d_now;
            }
            if (!fire) continue;

            const ReliableSet reliable =
                history.reliable_set(scene.id, config.corrector.confidence_threshold);
            RefurbishResult refurb =
                refurbish_labels(scene.labels, geometry[s].clusters, reliable, config.corrector,
                                 k_count, scene.id, epoch);
            scene.labels = std::move(refurb.labels);
            result.reports.push_back(std::move(refurb.report));
            if (!curve.correction_epoch) curve.correction_epoch = epoch;
            if (config.correct_mode == CorrectMode::once && config.corrector.correct_once)
                curve.corrected = true;
            phase[s] = LossPhase::correction;
            ++corrected_total;
        }

        // Optimization pass.
        double lr = config.learning_rate;
        if (config.cosine_restarts) {
            const int pos = (epoch - 1) % restart_period;
            const double frac = static_cast<double>(pos) / static_cast<double>(restart_period);
            lr = 0.01 * config.learning_rate +
                 0.495 * config.learning_rate * (1.0 + std::cos(3.141592653589793 * frac));
        }

        double loss_sum = 0.0;
        size_t batch_count = 0;
        for (size_t s = 0; s < dataset.size(); ++s) {
            TrainScene& scene = dataset[s];
            std::vector<uint32_t> order = all_rows(scene.points.size());
            rng.shuffle(order);
            for (size_t start = 0; start < order.size(); start += config.batch_size) {
                const size_t end = std::min(order.size(), start + config.batch_size);
                const std::vector<uint32_t> rows(order.begin() + static_cast<long>(start),
                                                 order.begin() + static_cast<long>(end));
                LogitsBatch batch;
                Matrix hidden;
                batch.logits = forward_rows(model, features[s], rows, &hidden);
                batch.targets.resize(rows.size());
                bool any_valid = false;
                for (size_t r = 0; r < rows.size(); ++r) {
                    batch.targets[r] = scene.labels[rows[r]];
                    any_valid |= batch.targets[r] != kUnlabeledId;
                }
                if (!any_valid) continue;

                double value;
                Matrix grad_logits;
                if (config.loss_mode == TrainLossMode::ce_only) {
                    LossResult ce = softmax_ce(batch);
                    value = ce.value;
                    grad_logits = std::move(ce.grad_logits);
                } else {
                    ArlResult composite = arl(batch, config.loss, phase[s]);
                    value = composite.value;
                    grad_logits = std::move(composite.grad_logits);
                }
                if (!std::isfinite(value))
                    fail(ErrorCode::diverged, "training diverged: non-finite loss at epoch " +
                                                  std::to_string(epoch));
                loss_sum += value;
                ++batch_count;

                Gradients grads(model);
                backward_rows(model, features[s], rows, hidden, grad_logits, grads);
                const auto step = [&](std::vector<double>& w, std::vector<double>& v,
                                      const std::vector<double>& g, double decay) {
                    for (size_t i = 0; i < w.size(); ++i) {
                        v[i] = config.momentum * v[i] - lr * (g[i] + decay * w[i]);
                        w[i] += v[i];
                    }
                };
                step(model.w1, velocity.w1, grads.w1, config.weight_decay);
                step(model.b1, velocity.b1, grads.b1, 0.0);
                step(model.w2, velocity.w2, grads.w2, config.weight_decay);
                step(model.b2, velocity.b2, grads.b2, 0.0);
            }
        }

        result.epoch_stats.push_back({epoch, miou_sum / static_cast<double>(dataset.size()),
                                      batch_count ? loss_sum / static_cast<double>(batch_count)
                                                  : 0.0,
                                      lr, corrected_total});
    }

    for (size_t s = 0; s < dataset.size(); ++s) result.final_labels[s] = std::move(dataset[s].labels);
    result.model = std::move(model);
    return result;
}

void save_model(const ModelParams& model, const std::filesystem::path& path)
{
    model.validate();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::io_failure, "cannot write " + path.string());
    out.write("ADCOMDL1", 8);
    const auto put_u32 = [&](uint32_t v) {
        const uint8_t b[4] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8),
                              static_cast<uint8_t>(v >> 16), static_cast<uint8_t>(v >> 24)};
        out.write(reinterpret_cast<const char*>(b), 4);
    };
    put_u32(static_cast<uint32_t>(model.feature_dim));
    put_u32(static_cast<uint32_t>(model.hidden_dim));
    put_u32(static_cast<uint32_t>(model.class_count));
    const auto put_blob = [&](const std::vector<double>& blob) {
        for (const double v : blob) {
            const float f = static_cast<float>(v);
            uint32_t u;
            std::memcpy(&u, &f, 4);
            const uint8_t b[4] = {static_cast<uint8_t>(u), static_cast<uint8_t>(u >> 8),
                                  static_cast<uint8_t>(u >> 16), static_cast<uint8_t>(u >> 24)};
            out.write(reinterpret_cast<const char*>(b), 4);
        }
    };
    put_blob(model.w1);
    put_blob(model.b1);
    put_blob(model.w2);
    put_blob(model.b2);
    if (!out) fail(ErrorCode::io_failure, "short write to " + path.string());
}

ModelParams load_model(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::io_failure, "cannot open " + path.string());
    char magic[8];
    if (!in.read(magic, 8) || std::string_view(magic, 8) != "ADCOMDL1")
        fail(ErrorCode::malformed_file, path.string() + ": bad checkpoint magic");
    const auto get_u32 = [&]() {
        uint8_t b[4];
        if (!in.read(reinterpret_cast<char*>(b), 4))
            fail(ErrorCode::malformed_file, "truncated checkpoint header");
        return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
               (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
    };
    ModelParams model;
    model.feature_dim = get_u32();
    model.hidden_dim = get_u32();
    model.class_count = get_u32();
    const auto get_blob = [&](std::vector<double>& blob, size_t count) {
        blob.resize(count);
        for (size_t i = 0; i < count; ++i) {
            uint8_t b[4];
            if (!in.read(reinterpret_cast<char*>(b), 4))
                fail(ErrorCode::malformed_file, "truncated checkpoint payload");
            uint32_t u = static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
                         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
            float f;
            std::memcpy(&f, &u, 4);
            blob[i] = f;
        }
    };
    get_blob(model.w1, model.hidden_dim * model.feature_dim);
    get_blob(model.b1, model.hidden_dim);
    get_blob(model.w2, model.class_count * model.hidden_dim);
    get_blob(model.b2, model.class_count);
    model.validate();
    return model;
}

}  // namespace adaco
