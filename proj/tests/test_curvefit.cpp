#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <optional>

#include "adaco/curvefit.hpp"
#include "adaco/rng.hpp"

using namespace adaco;

namespace {

std::vector<double> series_of(const CurveFitParams& p, int epochs)
{
    std::vector<double> out;
    for (int t = 1; t <= epochs; ++t) out.push_back(eval_curve(p, t));
    return out;
}

}  // namespace

TEST_CASE("eval_curve values")
{
    CurveFitParams p{0.8, 1.0, 5.0, 0.0};
    CHECK(eval_curve(p, 5.0) == doctest::Approx(0.8 * (1.0 - std::exp(-1.0))).epsilon(1e-12));
    CHECK(eval_curve(p, 5.0) == doctest::Approx(0.50569).epsilon(1e-4));

    // saturates at the amplitude
    CHECK(eval_curve(p, 1e6) == doctest::Approx(0.8).epsilon(1e-9));

    CurveFitParams zero{0.0, 1.3, 2.0, 0.0};
    for (int t = 1; t <= 20; ++t) CHECK(eval_curve(zero, t) == 0.0);
}

TEST_CASE("eval_curve is non-decreasing and bounded by the amplitude")
{
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        CurveFitParams p{rng.uniform(0.0, 1.0), rng.uniform(0.0, 3.0), rng.uniform(0.5, 30.0), 0.0};
        double prev = 0.0;
        for (int t = 1; t <= 60; ++t) {
            const double v = eval_curve(p, t);
            CHECK(v >= prev - 1e-12);
            CHECK(v <= p.amplitude + 1e-12);
            prev = v;
        }
    }
}

TEST_CASE("eval_derivative")
{
    SUBCASE("hand value at t=1")
    {
        CurveFitParams p{0.8, 1.0, 5.0, 0.0};
        CHECK(eval_derivative(p, 1.0) ==
              doctest::Approx(0.16 * std::exp(-0.2)).epsilon(1e-12));
        CHECK(eval_derivative(p, 1.0) == doctest::Approx(0.13100).epsilon(1e-4));
    }

    SUBCASE("unit exponent decays strictly")
    {
        CurveFitParams p{0.6, 1.0, 4.0, 0.0};
        double prev = eval_derivative(p, 1.0);
        for (int t = 2; t <= 30; ++t) {
            const double d = eval_derivative(p, t);
            CHECK(d < prev);
            prev = d;
        }
    }

    SUBCASE("matches central finite differences on random params")
    {
        Rng rng(17);
        for (int trial = 0; trial < 50; ++trial) {
            CurveFitParams p{rng.uniform(0.1, 1.0), rng.uniform(0.2, 2.5), rng.uniform(0.5, 25.0),
                             0.0};
            const double t = rng.uniform(1.0, 30.0);
            const double h = 1e-5;
            const double fd = (eval_curve(p, t + h) - eval_curve(p, t - h)) / (2 * h);
            const double an = eval_derivative(p, t);
            CHECK(std::abs(an - fd) <= 1e-6 * std::max(1.0, std::abs(an)));
        }
    }
}

TEST_CASE("fit_curve recovers noiseless parameters")
{
    Rng rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        const CurveFitParams truth{rng.uniform(0.2, 1.0), rng.uniform(0.5, 2.0),
                                   rng.uniform(1.0, 20.0), 0.0};
        const CurveFitParams fit = fit_curve(series_of(truth, 40));
        CHECK(std::abs(fit.amplitude - truth.amplitude) <= 1e-3);
        CHECK(std::abs(fit.exponent - truth.exponent) <= 1e-3);
        CHECK(std::abs(fit.time_scale - truth.time_scale) <= 1e-3);
        CHECK(fit.residual <= 1e-8);
    }
}

TEST_CASE("fit_curve specific cases")
{
    SUBCASE("generate-then-recover example")
    {
        const CurveFitParams truth{0.8, 1.2, 4.0, 0.0};
        const CurveFitParams fit = fit_curve(series_of(truth, 40));
        CHECK(std::abs(fit.amplitude - 0.8) <= 1e-3);
        CHECK(std::abs(fit.exponent - 1.2) <= 1e-3);
        CHECK(std::abs(fit.time_scale - 4.0) <= 1e-3);
        CHECK(fit.residual <= 1e-8);
    }

    SUBCASE("constant zero series fits amplitude zero")
    {
        const CurveFitParams fit = fit_curve(std::vector<double>(12, 0.0));
        CHECK(std::abs(fit.amplitude) <= 1e-6);
        CHECK(fit.residual <= 1e-12);
    }

    SUBCASE("noisy series still recovers the amplitude")
    {
        Rng rng(123);
        const CurveFitParams truth{0.7, 1.0, 6.0, 0.0};
        std::vector<double> series = series_of(truth, 40);
        for (double& v : series)
            v = std::clamp(v + rng.uniform(-0.01, 0.01), 0.0, 1.0);
        const CurveFitParams fit = fit_curve(series);
        CHECK(std::abs(fit.amplitude - truth.amplitude) <= 0.05);
    }

    SUBCASE("too-short series is rejected")
    {
        CHECK_THROWS_AS(fit_curve({0.1, 0.2}), Error);
    }

    SUBCASE("out-of-range values are rejected")
    {
        CHECK_THROWS_AS(fit_curve({0.1, 0.2, 1.4}), Error);
    }
}

TEST_CASE("fit residual never exceeds any multi-start initial guess")
{
    Rng rng(55);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> series;
        for (int t = 0; t < 25; ++t) series.push_back(rng.uniform(0.0, 1.0));
        const CurveFitParams fit = fit_curve(series);
        for (const double a : {0.25, 0.5, 0.75, 1.0}) {
            for (const double b : {0.5, 1.0, 2.0}) {
                for (const double c : {1.0, 5.0, 20.0}) {
                    const CurveFitParams start{a, b, c, 0.0};
                    double sse = 0.0;
                    for (size_t i = 0; i < series.size(); ++i) {
                        const double r = eval_curve(start, static_cast<double>(i + 1)) - series[i];
                        sse += r * r;
                    }
                    CHECK(fit.residual <= sse + 1e-12);
                }
            }
        }
    }
}

TEST_CASE("detect_correction")
{
    const CurveFitParams params{0.8, 1.0, 5.0, 0.0};

    SUBCASE("fires first at epoch 13 for the reference parameters")
    {
        // ratio(t) = 1 - exp(-(t-1)/5) crosses 0.9 after 1 + 5*ln 10 = 12.513
        LearningCurve curve;
        curve.fit = params;
        std::optional<int> fired;
        for (int t = 1; t <= 40 && !fired; ++t) {
            curve.miou_series.push_back(eval_curve(params, t));
            fired = detect_correction(curve, 0.9);
        }
        REQUIRE(fired.has_value());
        CHECK(*fired == 13);
    }

    SUBCASE("threshold 1.0 never fires for this family")
    {
        LearningCurve curve;
        curve.fit = params;
        for (int t = 1; t <= 200; ++t) {
            curve.miou_series.push_back(eval_curve(params, t));
            CHECK_FALSE(detect_correction(curve, 1.0).has_value());
        }
    }

    SUBCASE("flat curve is a degenerate-trigger error")
    {
        LearningCurve curve;
        curve.fit = CurveFitParams{0.0, 1.0, 5.0, 0.0};
        curve.miou_series = {0.0, 0.0, 0.0};
        CHECK_THROWS_AS(detect_correction(curve, 0.9), Error);
    }

    SUBCASE("corrected curves never fire again")
    {
        LearningCurve curve;
        curve.fit = params;
        curve.miou_series.assign(30, 0.5);
        curve.corrected = true;
        CHECK_FALSE(detect_correction(curve, 0.1).has_value());
    }

    SUBCASE("monotone in the threshold")
    {
        Rng rng(31);
        for (int trial = 0; trial < 30; ++trial) {
            const CurveFitParams p{rng.uniform(0.3, 1.0), rng.uniform(0.5, 2.0),
                                   rng.uniform(1.0, 12.0), 0.0};
            const double r1 = rng.uniform(0.2, 0.95);
            const double r2 = rng.uniform(0.05, r1);
            const auto first_fire = [&](double r) -> std::optional<int> {
                LearningCurve curve;
                curve.fit = p;
                for (int t = 1; t <= 60; ++t) {
                    curve.miou_series.push_back(eval_curve(p, t));
                    if (const auto f = detect_correction(curve, r)) return f;
                }
                return std::nullopt;
            };
            const auto t1 = first_fire(r1);
            const auto t2 = first_fire(r2);
            if (t1) {
                REQUIRE(t2.has_value());
                CHECK(*t2 <= *t1);
            }
        }
    }
}
