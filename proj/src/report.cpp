#include "adaco/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "adaco/error.hpp"

namespace adaco {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double v, const char* spec = "%.2f")
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

std::string polyline(const PlotLayout& layout, const std::vector<std::pair<double, double>>& pts,
                     const char* css_class, const char* color)
{
    std::ostringstream out;
    out << "  <polyline class=\"" << css_class << "\" fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"2\" points=\"";
    for (size_t i = 0; i < pts.size(); ++i) {
        if (i) out << " ";
        out << fmt(layout.x_of(pts[i].first)) << "," << fmt(layout.y_of(pts[i].second));
    }
    out << "\"/>\n";
    return out.str();
}

}  // namespace

std::string render_curve_svg(const LearningCurve& curve, int total_epochs)
{
    PlotLayout layout;
    layout.epochs = std::max(total_epochs, 2);

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << layout.width << "\" height=\""
        << layout.height << "\" viewBox=\"0 0 " << layout.width << " " << layout.height << "\">\n";
    svg << "  <rect width=\"" << layout.width << "\" height=\"" << layout.height
        << "\" fill=\"white\"/>\n";

    // axes
    svg << "  <line x1=\"" << fmt(layout.x_of(1)) << "\" y1=\"" << fmt(layout.y_of(0)) << "\" x2=\""
        << fmt(layout.x_of(layout.epochs)) << "\" y2=\"" << fmt(layout.y_of(0))
        << "\" stroke=\"black\"/>\n";
    svg << "  <line x1=\"" << fmt(layout.x_of(1)) << "\" y1=\"" << fmt(layout.y_of(0)) << "\" x2=\""
        << fmt(layout.x_of(1)) << "\" y2=\"" << fmt(layout.y_of(1)) << "\" stroke=\"black\"/>\n";

    std::vector<std::pair<double, double>> series;
    for (size_t i = 0; i < curve.miou_series.size(); ++i)
        series.push_back({static_cast<double>(i + 1), curve.miou_series[i]});
    svg << polyline(layout, series, "series", "#1f77b4");

    if (curve.fit) {
        std::vector<std::pair<double, double>> fitted;
        for (int t = 1; t <= layout.epochs; ++t)
            fitted.push_back({static_cast<double>(t),
                              std::clamp(eval_curve(*curve.fit, t), 0.0, 1.0)});
        svg << polyline(layout, fitted, "fit", "#d62728");
    }

    if (curve.correction_epoch) {
        const double x = layout.x_of(static_cast<double>(*curve.correction_epoch));
        svg << "  <line class=\"trigger\" x1=\"" << fmt(x) << "\" y1=\"" << fmt(layout.y_of(0))
            << "\" x2=\"" << fmt(x) << "\" y2=\"" << fmt(layout.y_of(1))
            << "\" stroke=\"#2ca02c\" stroke-dasharray=\"4 3\"/>\n";
    }

    svg << "  <text x=\"" << fmt(layout.width / 2) << "\" y=\"" << fmt(layout.height - 8)
        << "\" text-anchor=\"middle\" font-size=\"13\">" << curve.sample_id
        << " training mIoU</text>\n";
    svg << "</svg>\n";
    return svg.str();
}

void emit_report(const fs::path& run_dir)
{
    const fs::path curves_dir = run_dir / "curves";
    const fs::path fits_path = run_dir / "fits.json";
    const fs::path eval_path = run_dir / "eval_raw.json";
    if (!fs::is_directory(curves_dir))
        fail(ErrorCode::missing_input, "missing " + curves_dir.string());
    if (!fs::exists(fits_path)) fail(ErrorCode::missing_input, "missing " + fits_path.string());
    if (!fs::exists(eval_path)) fail(ErrorCode::missing_input, "missing " + eval_path.string());

    json fits;
    {
        std::ifstream in(fits_path);
        fits = json::parse(in, nullptr, false);
        if (fits.is_discarded()) fail(ErrorCode::malformed_file, "invalid fits.json");
    }
    std::map<std::string, json> fit_by_sample;
    for (const auto& f : fits) fit_by_sample[f.at("sample_id").get<std::string>()] = f;

    // per-sample series
    std::vector<LearningCurve> curves;
    std::vector<fs::path> curve_files;
    for (const auto& entry : fs::directory_iterator(curves_dir))
        if (entry.path().extension() == ".csv") curve_files.push_back(entry.path());
    std::sort(curve_files.begin(), curve_files.end());

    int max_epoch = 2;
    for (const fs::path& file : curve_files) {
        LearningCurve curve;
        curve.sample_id = file.stem().string();
        std::ifstream in(file);
        if (!in) fail(ErrorCode::io_failure, "cannot open " + file.string());
        std::string line;
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const size_t comma = line.find(',');
            if (comma == std::string::npos)
                fail(ErrorCode::malformed_file, file.string() + ": bad csv row");
            curve.miou_series.push_back(std::stod(line.substr(comma + 1)));
        }
        const auto it = fit_by_sample.find(curve.sample_id);
        if (it != fit_by_sample.end()) {
            const json& f = it->second;
            if (f.contains("amplitude") && !f["amplitude"].is_null()) {
                CurveFitParams p;
                p.amplitude = f["amplitude"].get<double>();
                p.exponent = f["exponent"].get<double>();
                p.time_scale = f["time_scale"].get<double>();
                p.residual = f.value("residual", 0.0);
                curve.fit = p;
            }
            if (f.contains("correction_epoch") && !f["correction_epoch"].is_null())
                curve.correction_epoch = f["correction_epoch"].get<int>();
        }
        max_epoch = std::max(max_epoch, curve.current_epoch());
        curves.push_back(std::move(curve));
    }

    // combined curves.csv
    {
        std::ofstream out(run_dir / "curves.csv", std::ios::trunc);
        if (!out) fail(ErrorCode::io_failure, "cannot write curves.csv");
        out << "sample_id,epoch,miou,fitted\n";
        for (const LearningCurve& curve : curves) {
            for (size_t i = 0; i < curve.miou_series.size(); ++i) {
                out << curve.sample_id << "," << (i + 1) << ","
                    << fmt(curve.miou_series[i], "%.17g") << ",";
                if (curve.fit)
                    out << fmt(eval_curve(*curve.fit, static_cast<double>(i + 1)), "%.17g");
                out << "\n";
            }
        }
    }

    // plots
    const fs::path plots_dir = run_dir / "plots";
    fs::create_directories(plots_dir);
    for (const LearningCurve& curve : curves) {
        std::ofstream out(plots_dir / (curve.sample_id + ".svg"), std::ios::trunc);
        if (!out) fail(ErrorCode::io_failure, "cannot write plot for " + curve.sample_id);
        out << render_curve_svg(curve, max_epoch);
    }

    // metrics.json: evaluation numbers plus curve bookkeeping
    json eval_raw;
    {
        std::ifstream in(eval_path);
        eval_raw = json::parse(in, nullptr, false);
        if (eval_raw.is_discarded()) fail(ErrorCode::malformed_file, "invalid eval_raw.json");
    }
    json metrics = eval_raw;
    json curve_summaries = json::array();
    for (const LearningCurve& curve : curves) {
        json c;
        c["sample_id"] = curve.sample_id;
        c["epochs"] = curve.current_epoch();
        if (curve.correction_epoch)
            c["correction_epoch"] = *curve.correction_epoch;
        else
            c["correction_epoch"] = nullptr;
        curve_summaries.push_back(c);
    }
    metrics["curves"] = curve_summaries;
    std::ofstream out(run_dir / "metrics.json", std::ios::trunc);
    if (!out) fail(ErrorCode::io_failure, "cannot write metrics.json");
    out << metrics.dump(2) << "\n";
}

}  // namespace adaco
