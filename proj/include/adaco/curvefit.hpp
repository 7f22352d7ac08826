#pragma once

#include <optional>
#include <string>
#include <vector>

#include "adaco/error.hpp"

namespace adaco {

// Saturating learning curve amplitude*(1 - exp(-t^exponent / time_scale))
// fitted to a per-sample training-mIoU series. Epochs are 1-indexed.
struct CurveFitParams {
    double amplitude = 0.0;   // in [0, 1]
    double exponent = 1.0;    // >= 0
    double time_scale = 1.0;  // > 0
    double residual = 0.0;    // sum of squared errors of the fit

    void validate() const;
};

struct LearningCurve {
    std::string sample_id;
    std::vector<double> miou_series;  // index i holds epoch i+1
    std::optional<CurveFitParams> fit;
    std::optional<int> correction_epoch;
    bool corrected = false;

    int current_epoch() const { return static_cast<int>(miou_series.size()); }
};

double eval_curve(const CurveFitParams& p, double t);

// Closed-form d/dt of eval_curve.
double eval_derivative(const CurveFitParams& p, double t);

// Damped Gauss-Newton least squares with a coarse multi-start grid over
// (amplitude, exponent, time_scale); parameters are clamped to their valid
// box after every step and the lowest-residual start wins. Deterministic.
// Requires series length >= 3 with values in [0, 1].
CurveFitParams fit_curve(const std::vector<double>& series);

// Ratio trigger: fires at the current epoch t when
// |f'(1) - f'(t)| / f'(1) exceeds `threshold`. Returns nothing when the
// curve is already marked corrected. Throws on a flat fit (f'(1) == 0).
std::optional<int> detect_correction(const LearningCurve& curve, double threshold);

}  // namespace adaco
