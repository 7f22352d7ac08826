#include "adaco/curvefit.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace adaco {

namespace {

constexpr double kMinTimeScale = 1e-6;
constexpr double kMaxExponent = 50.0;
constexpr double kMaxTimeScale = 1e6;
constexpr int kMaxIterations = 200;
constexpr double kStepTol = 1e-10;

struct Params3 {
    double a, b, c;
};

Params3 clamp_box(Params3 p)
{
    p.a = std::clamp(p.a, 0.0, 1.0);
    p.b = std::clamp(p.b, 0.0, kMaxExponent);
    p.c = std::clamp(p.c, kMinTimeScale, kMaxTimeScale);
    return p;
}

// exp(-t^b / c) with the exponent clamped so t^b cannot overflow.
double decay(double t, double b, double c)
{
    const double u = std::exp(std::min(b * std::log(t), 700.0));
    return std::exp(-u / c);
}

double model(const Params3& p, double t)
{
    return p.a * (1.0 - decay(t, p.b, p.c));
}

double sse(const Params3& p, const std::vector<double>& series)
{
    double acc = 0.0;
    for (size_t i = 0; i < series.size(); ++i) {
        const double r = model(p, static_cast<double>(i + 1)) - series[i];
        acc += r * r;
    }
    return acc;
}

// Solves the symmetric 3x3 system A x = rhs by Gaussian elimination with
// partial pivoting. Returns false when singular.
bool solve3(std::array<std::array<double, 3>, 3> A, std::array<double, 3> rhs,
            std::array<double, 3>& x)
{
    for (int col = 0; col < 3; ++col) {
        int pivot = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::abs(A[r][col]) > std::abs(A[pivot][col])) pivot = r;
        if (std::abs(A[pivot][col]) < 1e-300) return false;
        std::swap(A[col], A[pivot]);
        std::swap(rhs[col], rhs[pivot]);
        for (int r = col + 1; r < 3; ++r) {
            const double f = A[r][col] / A[col][col];
            for (int c2 = col; c2 < 3; ++c2) A[r][c2] -= f * A[col][c2];
            rhs[r] -= f * rhs[col];
        }
    }
    for (int r = 2; r >= 0; --r) {
        double acc = rhs[r];
        for (int c2 = r + 1; c2 < 3; ++c2) acc -= A[r][c2] * x[c2];
        x[r] = acc / A[r][r];
    }
    return std::isfinite(x[0]) && std::isfinite(x[1]) && std::isfinite(x[2]);
}

// One damped Gauss-Newton run from a fixed start. Damping grows tenfold on a
// rejected step and shrinks tenfold on an accepted one.
Params3 descend(Params3 p, const std::vector<double>& series, double& best_sse)
{
    p = clamp_box(p);
    double lambda = 1e-3;
    double current = sse(p, series);

    for (int it = 0; it < kMaxIterations; ++it) {
        std::array<std::array<double, 3>, 3> jtj{};
        std::array<double, 3> jtr{};
        for (size_t i = 0; i < series.size(); ++i) {
            const double t = static_cast<double>(i + 1);
            const double e = decay(t, p.b, p.c);
            const double tb = std::exp(std::min(p.b * std::log(t), 700.0));
            const double r = p.a * (1.0 - e) - series[i];
            const std::array<double, 3> jac = {
                1.0 - e,                              // d/da
                p.a * e * tb * std::log(t) / p.c,     // d/db
                -p.a * e * tb / (p.c * p.c),          // d/dc
            };
            for (int u = 0; u < 3; ++u) {
                jtr[u] += jac[u] * r;
                for (int v = 0; v < 3; ++v) jtj[u][v] += jac[u] * jac[v];
            }
        }

        std::array<std::array<double, 3>, 3> damped = jtj;
        for (int u = 0; u < 3; ++u) damped[u][u] += lambda * std::max(jtj[u][u], 1e-12);

        std::array<double, 3> step{};
        if (!solve3(damped, {-jtr[0], -jtr[1], -jtr[2]}, step)) break;

        const Params3 cand = clamp_box({p.a + step[0], p.b + step[1], p.c + step[2]});
        const double cand_sse = sse(cand, series);
        if (std::isfinite(cand_sse) && cand_sse <= current) {
            const double norm = std::sqrt(step[0] * step[0] + step[1] * step[1] +
                                          step[2] * step[2]);
            p = cand;
            current = cand_sse;
            lambda = std::max(lambda * 0.1, 1e-12);
            if (norm < kStepTol) break;
        } else {
            lambda *= 10.0;
            if (lambda > 1e12) break;
        }
    }
    best_sse = current;
    return p;
}

}  // namespace

void CurveFitParams::validate() const
{
    if (!(amplitude >= 0.0 && amplitude <= 1.0))
        fail(ErrorCode::invalid_argument, "amplitude outside [0, 1]");
    if (!(exponent >= 0.0)) fail(ErrorCode::invalid_argument, "exponent must be >= 0");
    if (!(time_scale > 0.0)) fail(ErrorCode::invalid_argument, "time scale must be positive");
}

double eval_curve(const CurveFitParams& p, double t)
{
    return model({p.amplitude, p.exponent, p.time_scale}, t);
}

double eval_derivative(const CurveFitParams& p, double t)
{
    const double tb = std::exp(std::min(p.exponent * std::log(t), 700.0));
    return p.amplitude * (p.exponent / p.time_scale) * (tb / t) *
           std::exp(-tb / p.time_scale);
}

CurveFitParams fit_curve(const std::vector<double>& series)
{
    if (series.size() < 3) fail(ErrorCode::invalid_argument, "need at least 3 epochs to fit");
    for (const double v : series)
        if (!(v >= 0.0 && v <= 1.0)) fail(ErrorCode::invalid_argument, "series values must be in [0, 1]");

    constexpr std::array<double, 4> amps = {0.25, 0.5, 0.75, 1.0};
    constexpr std::array<double, 3> exps = {0.5, 1.0, 2.0};
    constexpr std::array<double, 3> scales = {1.0, 5.0, 20.0};

    bool found = false;
    Params3 best{};
    double best_sse = std::numeric_limits<double>::infinity();
    for (const double a : amps) {
        for (const double b : exps) {
            for (const double c : scales) {
                double run_sse = 0.0;
                const Params3 run = descend({a, b, c}, series, run_sse);
                if (std::isfinite(run_sse) && run_sse < best_sse) {
                    found = true;
                    best_sse = run_sse;
                    best = run;
                }
            }
        }
    }
    if (!found) fail(ErrorCode::fit_failed, "every fit start diverged");

    CurveFitParams out;
    out.amplitude = best.a;
    out.exponent = best.b;
    out.time_scale = best.c;
    out.residual = best_sse;
    return out;
}

std::optional<int> detect_correction(const LearningCurve& curve, double threshold)
{
    if (curve.corrected) return std::nullopt;
    if (!curve.fit) fail(ErrorCode::invalid_argument, "detect_correction needs a fitted curve");
    const double d1 = eval_derivative(*curve.fit, 1.0);
    if (!(d1 > 0.0))
        fail(ErrorCode::degenerate_input, "flat learning curve: derivative at epoch 1 is zero");
    const int t = curve.current_epoch();
    const double dt = eval_derivative(*curve.fit, static_cast<double>(t));
    // Signed drop: a derivative that grew past its initial value means the
    // curve is still accelerating, not saturating.
    if ((d1 - dt) / d1 > threshold) return t;
    return std::nullopt;
}

}  // namespace adaco
