#pragma once

#include <filesystem>
#include <string>

#include "adaco/curvefit.hpp"

namespace adaco {

// Fixed plot geometry so tests can recompute pixel coordinates.
struct PlotLayout {
    double width = 640.0, height = 400.0;
    double margin_left = 56.0, margin_right = 16.0, margin_top = 16.0, margin_bottom = 40.0;
    int epochs = 40;

    double x_of(double epoch) const
    {
        const double span = width - margin_left - margin_right;
        if (epochs <= 1) return margin_left;
        return margin_left + span * (epoch - 1.0) / (static_cast<double>(epochs) - 1.0);
    }
    double y_of(double value) const
    {
        const double span = height - margin_top - margin_bottom;
        return margin_top + span * (1.0 - value);
    }
};

// Self-contained SVG: the raw mIoU series, the fitted curve sampled at every
// epoch, and a vertical marker at the correction epoch when present.
std::string render_curve_svg(const LearningCurve& curve, int total_epochs);

// Renders run artifacts (curves/*.csv, fits.json, eval_raw.json) into
// metrics.json, a combined curves.csv and plots/<sample>.svg. Throws
// missing_input when an artifact is absent.
void emit_report(const std::filesystem::path& run_dir);

}  // namespace adaco
