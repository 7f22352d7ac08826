#include "adaco/loss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace adaco {

namespace {

// Row-wise log softmax; returns log p and writes the per-row sum of log p
// (the NCE denominator) when asked.
Matrix log_softmax_rows(const Matrix& logits, std::vector<double>* row_log_sums = nullptr)
{
    Matrix out(logits.rows, logits.cols);
    if (row_log_sums) row_log_sums->assign(logits.rows, 0.0);
    for (size_t i = 0; i < logits.rows; ++i) {
        const double* z = logits.row(i);
        double zmax = z[0];
        for (size_t k = 1; k < logits.cols; ++k) zmax = std::max(zmax, z[k]);
        double acc = 0.0;
        for (size_t k = 0; k < logits.cols; ++k) acc += std::exp(z[k] - zmax);
        const double lse = zmax + std::log(acc);
        double row_sum = 0.0;
        for (size_t k = 0; k < logits.cols; ++k) {
            out.at(i, k) = z[k] - lse;
            row_sum += out.at(i, k);
        }
        if (row_log_sums) (*row_log_sums)[i] = row_sum;
    }
    return out;
}

size_t count_valid(const LogitsBatch& batch)
{
    size_t n = 0;
    for (const uint16_t t : batch.targets)
        if (t != kUnlabeledId) ++n;
    if (n == 0) fail(ErrorCode::empty_batch, "batch has no labeled points");
    return n;
}

// Jaccard-extension gradient for a descending-error-sorted ground-truth
// indicator vector.
std::vector<double> lovasz_grad(const std::vector<double>& sorted_fg)
{
    const size_t n = sorted_fg.size();
    const double total = std::accumulate(sorted_fg.begin(), sorted_fg.end(), 0.0);
    std::vector<double> jaccard(n);
    double cum_fg = 0.0, cum_bg = 0.0;
    for (size_t i = 0; i < n; ++i) {
        cum_fg += sorted_fg[i];
        cum_bg += 1.0 - sorted_fg[i];
        const double intersection = total - cum_fg;
        const double uni = total + cum_bg;
        jaccard[i] = 1.0 - intersection / std::max(uni, 1e-12);
    }
    for (size_t i = n; i-- > 1;) jaccard[i] -= jaccard[i - 1];
    return jaccard;
}

}  // namespace

void LogitsBatch::validate() const
{
    if (logits.rows != targets.size())
        fail(ErrorCode::length_mismatch, "logit rows != target count");
    if (logits.cols < 2) fail(ErrorCode::invalid_argument, "need at least 2 classes");
    for (const double v : logits.data)
        if (!std::isfinite(v)) fail(ErrorCode::invalid_argument, "non-finite logit");
    for (const uint16_t t : targets)
        if (t != kUnlabeledId && t >= logits.cols)
            fail(ErrorCode::label_out_of_range, "target outside class range");
    if (feat_2d.has_value() != feat_cam.has_value())
        fail(ErrorCode::invalid_argument, "feature pair must come together");
    if (feat_2d && !feat_2d->same_shape(*feat_cam))
        fail(ErrorCode::length_mismatch, "feature blocks differ in shape");
}

Matrix softmax_rows(const Matrix& logits)
{
    Matrix p = log_softmax_rows(logits);
    for (double& v : p.data) v = std::exp(v);
    return p;
}

LossResult softmax_ce(const LogitsBatch& batch)
{
    batch.validate();
    const size_t n_valid = count_valid(batch);
    const Matrix logp = log_softmax_rows(batch.logits);

    LossResult out;
    out.grad_logits = Matrix(batch.logits.rows, batch.logits.cols);
    double acc = 0.0;
    for (size_t i = 0; i < batch.size(); ++i) {
        const uint16_t y = batch.targets[i];
        if (y == kUnlabeledId) continue;
        acc -= logp.at(i, y);
        for (size_t k = 0; k < batch.logits.cols; ++k) {
            const double p = std::exp(logp.at(i, k));
            out.grad_logits.at(i, k) = (p - (k == y ? 1.0 : 0.0)) / static_cast<double>(n_valid);
        }
    }
    out.value = acc / static_cast<double>(n_valid);
    return out;
}

LossResult nce(const LogitsBatch& batch)
{
    batch.validate();
    const size_t n_valid = count_valid(batch);
    std::vector<double> denom;
    const Matrix logp = log_softmax_rows(batch.logits, &denom);
    const size_t k_count = batch.logits.cols;

    LossResult out;
    out.grad_logits = Matrix(batch.logits.rows, k_count);
    double acc = 0.0;
    for (size_t i = 0; i < batch.size(); ++i) {
        const uint16_t y = batch.targets[i];
        if (y == kUnlabeledId) continue;
        const double num = logp.at(i, y);
        const double den = denom[i];  // sum_k log p(k), strictly negative
        acc += num / den;
        // d num / dz_j = [j == y] - p_j ; d den / dz_j = 1 - K p_j
        for (size_t j = 0; j < k_count; ++j) {
            const double p_j = std::exp(logp.at(i, j));
            const double dnum = (j == y ? 1.0 : 0.0) - p_j;
            const double dden = 1.0 - static_cast<double>(k_count) * p_j;
            out.grad_logits.at(i, j) = (dnum * den - num * dden) / (den * den) /
                                       static_cast<double>(n_valid);
        }
    }
    out.value = acc / static_cast<double>(n_valid);
    return out;
}

LossResult mae(const LogitsBatch& batch)
{
    batch.validate();
    const size_t n_valid = count_valid(batch);
    const Matrix logp = log_softmax_rows(batch.logits);

    LossResult out;
    out.grad_logits = Matrix(batch.logits.rows, batch.logits.cols);
    double acc = 0.0;
    for (size_t i = 0; i < batch.size(); ++i) {
        const uint16_t y = batch.targets[i];
        if (y == kUnlabeledId) continue;
        const double p_y = std::exp(logp.at(i, y));
        acc += 2.0 * (1.0 - p_y);
        for (size_t k = 0; k < batch.logits.cols; ++k) {
            const double p_k = std::exp(logp.at(i, k));
            out.grad_logits.at(i, k) =
                -2.0 * p_y * ((k == y ? 1.0 : 0.0) - p_k) / static_cast<double>(n_valid);
        }
    }
    out.value = acc / static_cast<double>(n_valid);
    return out;
}

FeatureMseResult feature_mse(const Matrix& feat_2d, const Matrix& feat_cam)
{
    if (!feat_2d.same_shape(feat_cam))
        fail(ErrorCode::length_mismatch, "feature blocks differ in shape");
    const size_t count = feat_2d.data.size();
    if (count == 0) fail(ErrorCode::empty_batch, "empty feature blocks");

    FeatureMseResult out;
    out.grad_cam = Matrix(feat_cam.rows, feat_cam.cols);
    double acc = 0.0;
    for (size_t i = 0; i < count; ++i) {
        const double d = feat_cam.data[i] - feat_2d.data[i];
        acc += d * d;
        out.grad_cam.data[i] = 2.0 * d / static_cast<double>(count);
    }
    out.value = acc / static_cast<double>(count);
    return out;
}

LossResult lovasz_softmax(const LogitsBatch& batch)
{
    batch.validate();
    count_valid(batch);
    const size_t k_count = batch.logits.cols;
    const Matrix probs = softmax_rows(batch.logits);

    std::vector<size_t> valid;
    for (size_t i = 0; i < batch.size(); ++i)
        if (batch.targets[i] != kUnlabeledId) valid.push_back(i);

    std::vector<uint8_t> present(k_count, 0);
    for (const size_t i : valid) present[batch.targets[i]] = 1;
    const size_t n_present =
        static_cast<size_t>(std::count(present.begin(), present.end(), uint8_t{1}));

    LossResult out;
    out.grad_logits = Matrix(batch.logits.rows, k_count);
    // d loss / d p(i, c) for each valid row, accumulated over classes before
    // chaining through the softmax.
    Matrix dprob(batch.logits.rows, k_count);

    double acc = 0.0;
    std::vector<double> errors(valid.size());
    std::vector<double> fg(valid.size());
    std::vector<size_t> order(valid.size());
    for (size_t c = 0; c < k_count; ++c) {
        if (!present[c]) continue;
        for (size_t r = 0; r < valid.size(); ++r) {
            const bool is_fg = batch.targets[valid[r]] == c;
            fg[r] = is_fg ? 1.0 : 0.0;
            const double p = probs.at(valid[r], c);
            errors[r] = is_fg ? 1.0 - p : p;
        }
        std::iota(order.begin(), order.end(), size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](size_t a, size_t b) { return errors[a] > errors[b]; });

        std::vector<double> sorted_fg(valid.size());
        for (size_t r = 0; r < order.size(); ++r) sorted_fg[r] = fg[order[r]];
        const std::vector<double> grad = lovasz_grad(sorted_fg);

        for (size_t r = 0; r < order.size(); ++r) {
            const size_t row = valid[order[r]];
            acc += grad[r] * errors[order[r]];
            const double sign = sorted_fg[r] > 0.5 ? -1.0 : 1.0;
            dprob.at(row, c) += grad[r] * sign / static_cast<double>(n_present);
        }
    }
    out.value = acc / static_cast<double>(n_present);

    // Chain rule through softmax: dz_j = p_j * (dp_j - sum_k dp_k p_k).
    for (const size_t i : valid) {
        double inner = 0.0;
        for (size_t k = 0; k < k_count; ++k) inner += dprob.at(i, k) * probs.at(i, k);
        for (size_t j = 0; j < k_count; ++j)
            out.grad_logits.at(i, j) = probs.at(i, j) * (dprob.at(i, j) - inner);
    }
    return out;
}

double arl_combine(const ArlComponents& parts, const LossConfig& config, LossPhase phase)
{
    const double warmup = parts.ce + parts.feature_mse + parts.lovasz;
    if (phase == LossPhase::warmup) return warmup;
    return config.nce_weight * parts.nce + config.mae_weight * parts.mae + warmup +
           config.ce_deweight * parts.ce;
}

ArlResult arl(const LogitsBatch& batch, const LossConfig& config, LossPhase phase)
{
    batch.validate();
    const bool with_mse = config.use_feature_mse && batch.feat_2d.has_value();

    ArlResult out;
    const LossResult ce_part = softmax_ce(batch);
    const LossResult lovasz_part = lovasz_softmax(batch);
    out.components.ce = ce_part.value;
    out.components.lovasz = lovasz_part.value;

    const double ce_weight = phase == LossPhase::warmup ? 1.0 : 1.0 + config.ce_deweight;
    out.grad_logits = Matrix(batch.logits.rows, batch.logits.cols);
    for (size_t i = 0; i < out.grad_logits.data.size(); ++i)
        out.grad_logits.data[i] =
            ce_weight * ce_part.grad_logits.data[i] + lovasz_part.grad_logits.data[i];

    if (phase == LossPhase::correction) {
        const LossResult nce_part = nce(batch);
        const LossResult mae_part = mae(batch);
        out.components.nce = nce_part.value;
        out.components.mae = mae_part.value;
        for (size_t i = 0; i < out.grad_logits.data.size(); ++i)
            out.grad_logits.data[i] += config.nce_weight * nce_part.grad_logits.data[i] +
                                       config.mae_weight * mae_part.grad_logits.data[i];
    }

    if (with_mse) {
        const FeatureMseResult mse_part = feature_mse(*batch.feat_2d, *batch.feat_cam);
        out.components.feature_mse = mse_part.value;
        out.grad_cam = mse_part.grad_cam;
    }

    out.value = arl_combine(out.components, config, phase);
    return out;
}

}  // namespace adaco
