#include <doctest.h>

#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>

#include <json.hpp>

#include "adaco/metrics.hpp"
#include "adaco/report.hpp"
#include "adaco/rng.hpp"
#include "helpers.hpp"

using namespace adaco;
using testing::TempDir;

TEST_CASE("confusion")
{
    SUBCASE("identical arrays are diagonal")
    {
        const LabelArray gt = {0, 1, 2, 1, 0};
        const ConfusionMatrix cm = confusion(gt, gt, 3);
        CHECK(cm.at(0, 0) == 2);
        CHECK(cm.at(1, 1) == 2);
        CHECK(cm.at(2, 2) == 1);
        CHECK(cm.at(0, 1) == 0);
        CHECK(cm.ignored == 0);
    }

    SUBCASE("hand tally")
    {
        const ConfusionMatrix cm = confusion({0, 0, 1}, {0, 1, 1}, 2);
        CHECK(cm.at(0, 0) == 1);
        CHECK(cm.at(0, 1) == 1);
        CHECK(cm.at(1, 1) == 1);
        CHECK(cm.at(1, 0) == 0);
    }

    SUBCASE("unlabeled ground truth is ignored")
    {
        const ConfusionMatrix cm = confusion({kUnlabeledId, kUnlabeledId}, {0, 1}, 2);
        CHECK(cm.ignored == 2);
        CHECK_THROWS_AS(miou(cm), Error);
    }

    SUBCASE("length mismatch is an error")
    {
        CHECK_THROWS_AS(confusion({0}, {0, 1}, 2), Error);
    }
}

TEST_CASE("miou")
{
    SUBCASE("perfect diagonal is 1.0")
    {
        const LabelArray gt = {0, 1, 2, 2};
        CHECK(miou(confusion(gt, gt, 3)).mean == doctest::Approx(1.0));
    }

    SUBCASE("hand example: both classes at IoU 1/2")
    {
        const IouSummary s = miou(confusion({0, 0, 1}, {0, 1, 1}, 2));
        CHECK(s.per_class[0] == doctest::Approx(0.5));
        CHECK(s.per_class[1] == doctest::Approx(0.5));
        CHECK(s.mean == doctest::Approx(0.5));
    }

    SUBCASE("absent classes are excluded from the mean")
    {
        const IouSummary s = miou(confusion({0, 0}, {0, 0}, 3));
        CHECK(s.mean == doctest::Approx(1.0));
        CHECK(s.in_mean[0]);
        CHECK_FALSE(s.in_mean[1]);
        CHECK_FALSE(s.in_mean[2]);
    }

    SUBCASE("matches a brute-force recomputation on random matrices")
    {
        Rng rng(3);
        for (int trial = 0; trial < 50; ++trial) {
            const uint16_t k = 2 + static_cast<uint16_t>(rng.uniform_int(5));
            ConfusionMatrix cm(k);
            for (auto& c : cm.counts) c = rng.uniform_int(6);
            double acc = 0.0;
            size_t used = 0;
            bool any = false;
            for (uint16_t c = 0; c < k; ++c) {
                uint64_t tp = cm.at(c, c), fp = 0, fn = 0;
                for (uint16_t o = 0; o < k; ++o) {
                    if (o == c) continue;
                    fp += cm.at(o, c);
                    fn += cm.at(c, o);
                }
                if (tp + fp + fn == 0) continue;
                acc += static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
                ++used;
                any = true;
            }
            if (!any) continue;
            CHECK(miou(cm).mean == doctest::Approx(acc / used).epsilon(1e-12));
        }
    }
}

TEST_CASE("macc")
{
    SUBCASE("perfect diagonal is 1.0")
    {
        const LabelArray gt = {0, 1, 1};
        CHECK(macc(confusion(gt, gt, 2)) == doctest::Approx(1.0));
    }

    SUBCASE("hand example: recalls 0.5 and 1.0 average to 0.75")
    {
        CHECK(macc(confusion({0, 0, 1}, {0, 1, 1}, 2)) == doctest::Approx(0.75));
    }

    SUBCASE("single class equals its recall")
    {
        CHECK(macc(confusion({0, 0, 0, 0}, {0, 0, 1, 1}, 2)) == doctest::Approx(0.5));
    }

    SUBCASE("matches a brute-force recomputation on random matrices")
    {
        Rng rng(7);
        for (int trial = 0; trial < 50; ++trial) {
            const uint16_t k = 2 + static_cast<uint16_t>(rng.uniform_int(5));
            ConfusionMatrix cm(k);
            for (auto& c : cm.counts) c = rng.uniform_int(6);
            double acc = 0.0;
            size_t used = 0;
            for (uint16_t c = 0; c < k; ++c) {
                uint64_t row = 0;
                for (uint16_t o = 0; o < k; ++o) row += cm.at(c, o);
                if (row == 0) continue;
                acc += static_cast<double>(cm.at(c, c)) / static_cast<double>(row);
                ++used;
            }
            if (used == 0) continue;
            CHECK(macc(cm) == doctest::Approx(acc / used).epsilon(1e-12));
        }
    }
}

TEST_CASE("label_accuracy")
{
    CHECK(label_accuracy({0, 1, 2}, {0, 1, 2}) == doctest::Approx(1.0));
    CHECK(label_accuracy({0, 1, 2, kUnlabeledId}, {0, 0, 2, 1}) == doctest::Approx(2.0 / 3.0));
    CHECK(label_accuracy({0, 1}, {kUnlabeledId, 1}) == doctest::Approx(0.5));
    CHECK_THROWS_AS(label_accuracy({kUnlabeledId}, {0}), Error);
}

TEST_CASE("svg plot maps fitted values onto pixel coordinates")
{
    LearningCurve curve;
    curve.sample_id = "sample_a";
    const CurveFitParams params{0.8, 1.0, 5.0, 0.0};
    curve.fit = params;
    for (int t = 1; t <= 40; ++t)
        curve.miou_series.push_back(eval_curve(params, t) * 0.97);
    curve.correction_epoch = 13;

    const std::string svg = render_curve_svg(curve, 40);
    REQUIRE(svg.find("<svg") != std::string::npos);
    REQUIRE(svg.find("class=\"trigger\"") != std::string::npos);

    // pull the fitted polyline and compare sampled epochs against eval_curve
    const std::regex fit_re("<polyline class=\"fit\"[^>]*points=\"([^\"]*)\"");
    std::smatch m;
    REQUIRE(std::regex_search(svg, m, fit_re));
    std::istringstream pts(m[1].str());
    std::vector<std::pair<double, double>> parsed;
    std::string pair;
    while (pts >> pair) {
        const size_t comma = pair.find(',');
        parsed.push_back({std::stod(pair.substr(0, comma)), std::stod(pair.substr(comma + 1))});
    }
    REQUIRE(parsed.size() == 40);

    PlotLayout layout;
    layout.epochs = 40;
    for (const int t : {1, 5, 13, 27, 40}) {
        const double expect_x = layout.x_of(t);
        const double expect_y = layout.y_of(eval_curve(params, t));
        CHECK(std::abs(parsed[t - 1].first - expect_x) <= 2.0);   // within line width
        CHECK(std::abs(parsed[t - 1].second - expect_y) <= 2.0);
    }
}

TEST_CASE("emit_report renders metrics, combined csv and plots")
{
    TempDir tmp("report");
    const auto run = tmp.path();
    std::filesystem::create_directories(run / "curves");

    const CurveFitParams params{0.7, 1.1, 4.0, 1e-9};
    for (const char* sample : {"s0", "s1"}) {
        std::ofstream csv(run / "curves" / (std::string(sample) + ".csv"));
        csv << "epoch,miou\n";
        for (int t = 1; t <= 12; ++t) csv << t << "," << eval_curve(params, t) << "\n";
    }
    {
        nlohmann::json fits = nlohmann::json::array();
        for (const char* sample : {"s0", "s1"}) {
            nlohmann::json f;
            f["sample_id"] = sample;
            f["amplitude"] = params.amplitude;
            f["exponent"] = params.exponent;
            f["time_scale"] = params.time_scale;
            f["residual"] = params.residual;
            f["correction_epoch"] = sample == std::string("s0") ? nlohmann::json(9)
                                                                : nlohmann::json(nullptr);
            fits.push_back(f);
        }
        std::ofstream(run / "fits.json") << fits.dump(2);
    }
    {
        nlohmann::json eval_raw;
        eval_raw["miou"] = 0.5;
        eval_raw["macc"] = 0.6;
        std::ofstream(run / "eval_raw.json") << eval_raw.dump(2);
    }

    emit_report(run);

    CHECK(std::filesystem::exists(run / "plots" / "s0.svg"));
    CHECK(std::filesystem::exists(run / "plots" / "s1.svg"));
    CHECK(std::filesystem::exists(run / "curves.csv"));

    std::ifstream metrics_in(run / "metrics.json");
    const nlohmann::json metrics = nlohmann::json::parse(metrics_in);
    CHECK(metrics["miou"].get<double>() == doctest::Approx(0.5));
    CHECK(metrics["curves"].size() == 2);
    CHECK(metrics["curves"][0]["correction_epoch"].get<int>() == 9);
    CHECK(metrics["curves"][1]["correction_epoch"].is_null());
}

TEST_CASE("emit_report on a missing run directory is an error")
{
    TempDir tmp("empty_report");
    CHECK_THROWS_AS(emit_report(tmp.path()), Error);
}
