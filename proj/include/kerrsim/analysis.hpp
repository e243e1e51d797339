#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "kerrsim/circuit_model.hpp"
#include "kerrsim/duffing.hpp"
#include "kerrsim/fitting.hpp"
#include "kerrsim/measurement.hpp"

namespace kerrsim {

/// offset + amplitude (g/2)^2 / ((nu - center)^2 + (g/2)^2), g the FWHM.
double s21_model(double nu, double center, double gamma_fwhm, double amplitude, double offset);

struct TracePoint {
    double nu = 0.0;
    double value = 0.0;
    double sigma = 0.0;  // standard error; 0 on every point gives an unweighted fit
};

/// Seeds from the trace: center at the maximum, width from the half-maximum
/// crossings, amplitude and offset from the extrema. Order: center, width,
/// amplitude, offset.
Eigen::Vector4d lorentzian_initial_guess(const std::vector<TracePoint>& trace);

/// Parameters "center", "width", "amplitude", "offset". Needs at least 8
/// points spanning two linewidths (InsufficientSpan). Points are weighted by
/// 1 / sigma^2 when every sigma is positive. `start` replaces the
/// data-derived seed.
FitResult lorentzian_fit(const std::vector<TracePoint>& trace, const LeastSquaresOptions& options = {},
                         const std::optional<Eigen::Vector4d>& start = std::nullopt);

struct TuningPoint {
    double flux = 0.0;       // Phi / Phi0
    double frequency = 0.0;  // Hz
    int mode = 3;
};

/// i_c and L_wg enter the odd-mode condition only through L_array / L_wg, so
/// at most two of the three parameters can be fitted together.
struct TuningFitOptions {
    bool fit_i_c = true;
    bool fit_nu1_bare = true;
    bool fit_l_wg = false;
    LeastSquaresOptions solver;
};

struct TuningFit {
    FitResult fit;          // free parameters among "i_c", "nu1_bare", "l_wg"
    CircuitParams params;   // fitted device
    double l_array = 0.0;   // H, at zero flux
    double l_array_sigma = 0.0;
};

/// Needs at least 5 points, one within 0.05 of zero flux. DegenerateData if
/// all points share one flux.
TuningFit tuning_curve_fit(const std::vector<TuningPoint>& points, const CircuitParams& initial,
                           const TuningFitOptions& options = {});

struct SCurveFitOptions {
    double attempt_product = 20.0;  // nu_a * t of the activation form, held fixed
    double barrier = 1.0;
    double exponent = 1.5;
    bool fit_exponent = false;
    LeastSquaresOptions solver;
};

struct SCurveFit {
    FitResult fit;         // "nu_sw", "scale" and optionally "exponent"
    ActivationCurve curve;
    double width = 0.0;    // 10-90 width of the fitted curve, Hz
    double width_sigma = 0.0;
};

/// Binomially weighted fit of the activation form. RangeNotSpanned unless the
/// curve reaches below 0.05 and above 0.95.
SCurveFit s_curve_fit(const SCurve& curve, const SCurveFitOptions& options = {});

}  // namespace kerrsim
