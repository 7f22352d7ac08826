#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>

#include "adaco/loss.hpp"
#include "adaco/rng.hpp"

using namespace adaco;

namespace {

LogitsBatch batch_from_probs(const std::vector<std::vector<double>>& probs,
                             const LabelArray& targets)
{
    LogitsBatch batch;
    batch.logits = Matrix(probs.size(), probs[0].size());
    for (size_t i = 0; i < probs.size(); ++i)
        for (size_t k = 0; k < probs[i].size(); ++k) batch.logits.at(i, k) = std::log(probs[i][k]);
    batch.targets = targets;
    return batch;
}

LogitsBatch random_batch(Rng& rng, size_t n, size_t k, double unlabeled_rate = 0.0)
{
    LogitsBatch batch;
    batch.logits = Matrix(n, k);
    for (double& v : batch.logits.data) v = rng.uniform(-3.0, 3.0);
    batch.targets.resize(n);
    bool any = false;
    for (size_t i = 0; i < n; ++i) {
        if (rng.uniform() < unlabeled_rate && (any || i + 1 < n)) {
            batch.targets[i] = kUnlabeledId;
        } else {
            batch.targets[i] = static_cast<uint16_t>(rng.uniform_int(k));
            any = true;
        }
    }
    if (!any) batch.targets[0] = 0;
    return batch;
}

// Central finite differences of `value_fn` wrt the logits.
Matrix fd_gradient(LogitsBatch batch, const std::function<double(const LogitsBatch&)>& value_fn,
                   double h = 1e-6)
{
    Matrix grad(batch.logits.rows, batch.logits.cols);
    for (size_t i = 0; i < batch.logits.data.size(); ++i) {
        const double saved = batch.logits.data[i];
        batch.logits.data[i] = saved + h;
        const double up = value_fn(batch);
        batch.logits.data[i] = saved - h;
        const double down = value_fn(batch);
        batch.logits.data[i] = saved;
        grad.data[i] = (up - down) / (2 * h);
    }
    return grad;
}

void check_close(const Matrix& analytic, const Matrix& fd, double tol = 1e-4)
{
    REQUIRE(analytic.data.size() == fd.data.size());
    for (size_t i = 0; i < analytic.data.size(); ++i) {
        const double scale = std::max({1.0, std::abs(analytic.data[i]), std::abs(fd.data[i])});
        CHECK(std::abs(analytic.data[i] - fd.data[i]) <= tol * scale);
    }
}

// Rejects batches whose per-class Lovasz error vectors have near-ties, so the
// sort permutation is stable under the finite-difference probes.
bool lovasz_ties(const LogitsBatch& batch, double margin = 1e-3)
{
    const Matrix probs = softmax_rows(batch.logits);
    for (size_t c = 0; c < batch.logits.cols; ++c) {
        std::vector<double> errors;
        for (size_t i = 0; i < batch.size(); ++i) {
            if (batch.targets[i] == kUnlabeledId) continue;
            errors.push_back(batch.targets[i] == c ? 1.0 - probs.at(i, c) : probs.at(i, c));
        }
        for (size_t a = 0; a < errors.size(); ++a)
            for (size_t b = a + 1; b < errors.size(); ++b)
                if (std::abs(errors[a] - errors[b]) < margin) return true;
    }
    return false;
}

}  // namespace

TEST_CASE("softmax cross-entropy")
{
    SUBCASE("uniform binary case is ln 2")
    {
        const LogitsBatch batch = batch_from_probs({{0.5, 0.5}}, {0});
        CHECK(softmax_ce(batch).value == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    }

    SUBCASE("sharp logits drive the loss toward zero")
    {
        LogitsBatch batch;
        batch.logits = Matrix(1, 3);
        batch.logits.at(0, 1) = 40.0;
        batch.targets = {1};
        CHECK(softmax_ce(batch).value < 1e-12);
    }

    SUBCASE("all-ignored batch is an error")
    {
        LogitsBatch batch;
        batch.logits = Matrix(2, 3);
        batch.targets = {kUnlabeledId, kUnlabeledId};
        CHECK_THROWS_AS(softmax_ce(batch), Error);
    }

    SUBCASE("gradient matches finite differences")
    {
        Rng rng(1);
        for (int trial = 0; trial < 25; ++trial) {
            const LogitsBatch batch = random_batch(rng, 5, 4);
            check_close(softmax_ce(batch).grad_logits,
                        fd_gradient(batch, [](const LogitsBatch& b) { return softmax_ce(b).value; }));
        }
    }
}

TEST_CASE("normalized cross-entropy")
{
    SUBCASE("hand value for p = (0.7, 0.3), target 0")
    {
        const LogitsBatch batch = batch_from_probs({{0.7, 0.3}}, {0});
        const double expected = std::log(0.7) / (std::log(0.7) + std::log(0.3));
        CHECK(nce(batch).value == doctest::Approx(expected).epsilon(1e-12));
        CHECK(nce(batch).value == doctest::Approx(0.22854).epsilon(1e-4));
    }

    SUBCASE("uniform distribution scores 1/K for every target")
    {
        for (uint16_t k = 2; k <= 6; ++k) {
            LogitsBatch batch;
            batch.logits = Matrix(1, k);
            for (uint16_t target = 0; target < k; ++target) {
                batch.targets = {target};
                CHECK(nce(batch).value ==
                      doctest::Approx(1.0 / static_cast<double>(k)).epsilon(1e-12));
            }
        }
    }

    SUBCASE("invariant to a constant logit shift")
    {
        Rng rng(2);
        LogitsBatch batch = random_batch(rng, 6, 5);
        const double base = nce(batch).value;
        for (size_t i = 0; i < batch.size(); ++i)
            for (size_t k = 0; k < batch.logits.cols; ++k) batch.logits.at(i, k) += 17.5;
        CHECK(nce(batch).value == doctest::Approx(base).epsilon(1e-9));
    }

    SUBCASE("bounded in [0, 1]")
    {
        Rng rng(3);
        for (int trial = 0; trial < 50; ++trial) {
            const double v = nce(random_batch(rng, 7, 4)).value;
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }

    SUBCASE("gradient matches finite differences")
    {
        Rng rng(4);
        for (int trial = 0; trial < 25; ++trial) {
            const LogitsBatch batch = random_batch(rng, 5, 4);
            check_close(nce(batch).grad_logits,
                        fd_gradient(batch, [](const LogitsBatch& b) { return nce(b).value; }));
        }
    }
}

TEST_CASE("mean absolute error over the simplex")
{
    SUBCASE("hand value for p = (0.7, 0.3), target 0")
    {
        const LogitsBatch batch = batch_from_probs({{0.7, 0.3}}, {0});
        CHECK(mae(batch).value == doctest::Approx(0.6).epsilon(1e-12));
    }

    SUBCASE("perfect prediction gives 0, worst case 2")
    {
        LogitsBatch batch;
        batch.logits = Matrix(1, 2);
        batch.logits.at(0, 0) = 50.0;
        batch.targets = {0};
        CHECK(mae(batch).value == doctest::Approx(0.0).epsilon(1e-9));
        batch.targets = {1};
        CHECK(mae(batch).value == doctest::Approx(2.0).epsilon(1e-9));
    }

    SUBCASE("bounded by 2 on random batches")
    {
        Rng rng(5);
        for (int trial = 0; trial < 50; ++trial) {
            const double v = mae(random_batch(rng, 6, 5)).value;
            CHECK(v >= 0.0);
            CHECK(v <= 2.0);
        }
    }

    SUBCASE("gradient matches finite differences")
    {
        Rng rng(6);
        for (int trial = 0; trial < 25; ++trial) {
            const LogitsBatch batch = random_batch(rng, 5, 4);
            check_close(mae(batch).grad_logits,
                        fd_gradient(batch, [](const LogitsBatch& b) { return mae(b).value; }));
        }
    }
}

TEST_CASE("feature alignment mse")
{
    SUBCASE("identical blocks give 0")
    {
        Matrix a(2, 3);
        for (size_t i = 0; i < a.data.size(); ++i) a.data[i] = 0.5 * static_cast<double>(i);
        CHECK(feature_mse(a, a).value == 0.0);
    }

    SUBCASE("zeros vs ones of four entries gives 1")
    {
        Matrix zeros(2, 2), ones(2, 2);
        for (double& v : ones.data) v = 1.0;
        CHECK(feature_mse(zeros, ones).value == doctest::Approx(1.0).epsilon(1e-12));
    }

    SUBCASE("shape mismatch is an error")
    {
        CHECK_THROWS_AS(feature_mse(Matrix(2, 2), Matrix(2, 3)), Error);
    }

    SUBCASE("gradient matches finite differences")
    {
        Rng rng(7);
        Matrix a(3, 4), b(3, 4);
        for (double& v : a.data) v = rng.uniform(-2, 2);
        for (double& v : b.data) v = rng.uniform(-2, 2);
        const FeatureMseResult res = feature_mse(a, b);
        const double h = 1e-6;
        for (size_t i = 0; i < b.data.size(); ++i) {
            Matrix up = b, down = b;
            up.data[i] += h;
            down.data[i] -= h;
            const double fd = (feature_mse(a, up).value - feature_mse(a, down).value) / (2 * h);
            CHECK(std::abs(res.grad_cam.data[i] - fd) <= 1e-6);
        }
    }
}

TEST_CASE("lovasz softmax")
{
    SUBCASE("perfect prediction gives 0")
    {
        LogitsBatch batch;
        batch.logits = Matrix(3, 3);
        batch.targets = {0, 1, 2};
        for (size_t i = 0; i < 3; ++i) batch.logits.at(i, i) = 60.0;
        CHECK(lovasz_softmax(batch).value == doctest::Approx(0.0).epsilon(1e-9));
    }

    SUBCASE("single point, two classes, p = (0.6, 0.4)")
    {
        const LogitsBatch batch = batch_from_probs({{0.6, 0.4}}, {0});
        CHECK(lovasz_softmax(batch).value == doctest::Approx(0.4).epsilon(1e-9));
    }

    SUBCASE("two points with p(target) = 0.6 and 0.8 average the per-class terms")
    {
        // class 0: errors sort to (0.4, 0.2), fg (1, 0), Jaccard grads (1, 0)
        // -> 0.4; class 1 mirrors with fg (0, 1), grads (0.5, 0.5) -> 0.3;
        // mean over the present classes = 0.35.
        const LogitsBatch batch = batch_from_probs({{0.6, 0.4}, {0.2, 0.8}}, {0, 1});
        CHECK(lovasz_softmax(batch).value == doctest::Approx(0.35).epsilon(1e-9));
    }

    SUBCASE("matches an independent per-class oracle on random batches")
    {
        Rng rng(77);
        for (int trial = 0; trial < 30; ++trial) {
            const LogitsBatch batch = random_batch(rng, 6, 4);
            const Matrix probs = softmax_rows(batch.logits);
            double total = 0.0;
            size_t present = 0;
            for (uint16_t c = 0; c < 4; ++c) {
                bool has = false;
                for (const uint16_t t : batch.targets) has |= t == c;
                if (!has) continue;
                ++present;
                std::vector<std::pair<double, double>> err_fg;  // error, indicator
                for (size_t i = 0; i < batch.size(); ++i) {
                    const bool fg = batch.targets[i] == c;
                    err_fg.push_back({fg ? 1.0 - probs.at(i, c) : probs.at(i, c), fg ? 1.0 : 0.0});
                }
                std::stable_sort(err_fg.begin(), err_fg.end(),
                                 [](const auto& a, const auto& b) { return a.first > b.first; });
                double gts = 0.0;
                for (const auto& [e, fg] : err_fg) gts += fg;
                double cum_fg = 0.0, cum_bg = 0.0, prev_jaccard = 0.0;
                for (const auto& [e, fg] : err_fg) {
                    cum_fg += fg;
                    cum_bg += 1.0 - fg;
                    const double jaccard = 1.0 - (gts - cum_fg) / (gts + cum_bg);
                    total += e * (jaccard - prev_jaccard);
                    prev_jaccard = jaccard;
                }
            }
            CHECK(lovasz_softmax(batch).value ==
                  doctest::Approx(total / static_cast<double>(present)).epsilon(1e-9));
        }
    }

    SUBCASE("gradient matches finite differences away from sort ties")
    {
        Rng rng(8);
        int done = 0;
        while (done < 25) {
            const LogitsBatch batch = random_batch(rng, 5, 3);
            if (lovasz_ties(batch)) continue;
            check_close(
                lovasz_softmax(batch).grad_logits,
                fd_gradient(batch, [](const LogitsBatch& b) { return lovasz_softmax(b).value; }));
            ++done;
        }
    }
}

TEST_CASE("arl composite")
{
    const LossConfig config;  // lambda 100, beta 1, sigma -0.99

    SUBCASE("warmup weighting")
    {
        ArlComponents parts;
        parts.ce = 0.7;
        parts.lovasz = 0.2;
        CHECK(arl_combine(parts, config, LossPhase::warmup) == doctest::Approx(0.9).epsilon(1e-12));
    }

    SUBCASE("correction weighting reproduces the 30.81 composite")
    {
        ArlComponents parts;
        parts.ce = 1.0;
        parts.lovasz = 0.2;
        parts.feature_mse = 0.0;
        parts.nce = 0.3;
        parts.mae = 0.6;
        CHECK(arl_combine(parts, config, LossPhase::correction) ==
              doctest::Approx(30.81).epsilon(1e-12));
    }

    SUBCASE("sigma = -1 cancels the cross-entropy exactly")
    {
        LossConfig cancel = config;
        cancel.ce_deweight = -1.0;
        ArlComponents parts;
        parts.ce = 123.0;
        parts.nce = 0.0;
        parts.mae = 0.0;
        parts.lovasz = 0.0;
        CHECK(arl_combine(parts, cancel, LossPhase::correction) == doctest::Approx(0.0));
    }

    SUBCASE("value equals the weighted sum of individually computed components")
    {
        Rng rng(9);
        for (int trial = 0; trial < 10; ++trial) {
            const LogitsBatch batch = random_batch(rng, 6, 4);
            const ArlResult res = arl(batch, config, LossPhase::correction);
            const double expected = 100.0 * nce(batch).value + mae(batch).value +
                                    (1.0 - 0.99) * softmax_ce(batch).value +
                                    lovasz_softmax(batch).value;
            CHECK(res.value == doctest::Approx(expected).epsilon(1e-10));
            CHECK(res.value >= 0.0);  // sigma >= -1 and non-negative parts
        }
    }

    SUBCASE("warmup gradient is ce + lovasz")
    {
        Rng rng(10);
        const LogitsBatch batch = random_batch(rng, 5, 3);
        const ArlResult res = arl(batch, config, LossPhase::warmup);
        const LossResult ce = softmax_ce(batch);
        const LossResult lov = lovasz_softmax(batch);
        for (size_t i = 0; i < res.grad_logits.data.size(); ++i)
            CHECK(res.grad_logits.data[i] ==
                  doctest::Approx(ce.grad_logits.data[i] + lov.grad_logits.data[i]).epsilon(1e-12));
    }

    SUBCASE("correction-phase gradient matches finite differences")
    {
        Rng rng(11);
        int done = 0;
        while (done < 10) {
            const LogitsBatch batch = random_batch(rng, 5, 3);
            if (lovasz_ties(batch)) continue;
            check_close(arl(batch, config, LossPhase::correction).grad_logits,
                        fd_gradient(batch, [&](const LogitsBatch& b) {
                            return arl(b, config, LossPhase::correction).value;
                        }));
            ++done;
        }
    }

    SUBCASE("feature mse joins the composite when enabled")
    {
        Rng rng(12);
        LogitsBatch batch = random_batch(rng, 4, 3);
        batch.feat_2d = Matrix(4, 2);
        batch.feat_cam = Matrix(4, 2);
        for (double& v : batch.feat_cam->data) v = 1.0;
        LossConfig with_mse = config;
        with_mse.use_feature_mse = true;
        const ArlResult res = arl(batch, with_mse, LossPhase::warmup);
        CHECK(res.components.feature_mse == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(res.grad_cam.has_value());
        const ArlResult without = arl(batch, config, LossPhase::warmup);
        CHECK(res.value == doctest::Approx(without.value + 1.0).epsilon(1e-10));
    }
}

TEST_CASE("ignored points contribute zero loss and zero gradient")
{
    Rng rng(13);
    LogitsBatch batch = random_batch(rng, 6, 4);
    batch.targets[2] = kUnlabeledId;
    batch.targets[5] = kUnlabeledId;

    LogitsBatch reduced;
    reduced.logits = Matrix(4, 4);
    size_t row = 0;
    for (size_t i = 0; i < 6; ++i) {
        if (batch.targets[i] == kUnlabeledId) continue;
        for (size_t k = 0; k < 4; ++k) reduced.logits.at(row, k) = batch.logits.at(i, k);
        reduced.targets.push_back(batch.targets[i]);
        ++row;
    }

    const auto check_pair = [&](const std::function<LossResult(const LogitsBatch&)>& fn) {
        const LossResult full = fn(batch);
        const LossResult sub = fn(reduced);
        CHECK(full.value == doctest::Approx(sub.value).epsilon(1e-12));
        for (size_t k = 0; k < 4; ++k) {
            CHECK(full.grad_logits.at(2, k) == 0.0);
            CHECK(full.grad_logits.at(5, k) == 0.0);
        }
    };
    check_pair(softmax_ce);
    check_pair(nce);
    check_pair(mae);
    check_pair(lovasz_softmax);
}
