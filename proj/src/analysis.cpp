#include "kerrsim/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kerrsim {

double s21_model(double nu, double center, double gamma_fwhm, double amplitude, double offset) {
    const double hw = 0.5 * gamma_fwhm;
    const double d = nu - center;
    return offset + amplitude * hw * hw / (d * d + hw * hw);
}

namespace {

// Linear interpolation of the level crossing between samples i and j.
double crossing(const std::vector<TracePoint>& t, std::size_t i, std::size_t j, double level) {
    const double y0 = t[i].value, y1 = t[j].value;
    if (y1 == y0) return t[i].nu;
    return t[i].nu + (level - y0) / (y1 - y0) * (t[j].nu - t[i].nu);
}

std::vector<TracePoint> sorted_trace(std::vector<TracePoint> trace) {
    std::sort(trace.begin(), trace.end(), [](const TracePoint& a, const TracePoint& b) { return a.nu < b.nu; });
    for (const auto& p : trace) {
        if (!std::isfinite(p.nu) || !std::isfinite(p.value)) {
            throw Error(ErrorCode::InvalidParameter, "trace contains non-finite values");
        }
    }
    return trace;
}

}  // namespace

Eigen::Vector4d lorentzian_initial_guess(const std::vector<TracePoint>& input) {
    if (input.size() < 3) throw Error(ErrorCode::InsufficientSpan, "trace needs at least three points");
    const auto t = sorted_trace(input);
    std::size_t imax = 0, imin = 0;
    for (std::size_t i = 1; i < t.size(); ++i) {
        if (t[i].value > t[imax].value) imax = i;
        if (t[i].value < t[imin].value) imin = i;
    }
    const double offset = t[imin].value;
    const double amplitude = t[imax].value - offset;
    const double half = offset + 0.5 * amplitude;

    double left = std::numeric_limits<double>::quiet_NaN(), right = left;
    for (std::size_t i = imax; i > 0; --i) {
        if (t[i - 1].value <= half) {
            left = crossing(t, i - 1, i, half);
            break;
        }
    }
    for (std::size_t i = imax; i + 1 < t.size(); ++i) {
        if (t[i + 1].value <= half) {
            right = crossing(t, i, i + 1, half);
            break;
        }
    }
    double width;
    if (std::isfinite(left) && std::isfinite(right)) width = right - left;
    else if (std::isfinite(left)) width = 2.0 * (t[imax].nu - left);
    else if (std::isfinite(right)) width = 2.0 * (right - t[imax].nu);
    else width = 0.25 * (t.back().nu - t.front().nu);
    if (!(width > 0.0)) width = 0.25 * (t.back().nu - t.front().nu) / static_cast<double>(t.size());
    return {t[imax].nu, width, amplitude, offset};
}

FitResult lorentzian_fit(const std::vector<TracePoint>& input, const LeastSquaresOptions& options,
                         const std::optional<Eigen::Vector4d>& start) {
    if (input.size() < 8) throw Error(ErrorCode::InsufficientSpan, "Lorentzian fit needs at least 8 points");
    const auto t = sorted_trace(input);
    const Eigen::Vector4d seed = lorentzian_initial_guess(t);
    const Eigen::Vector4d g = start.value_or(seed);
    const double span = t.back().nu - t.front().nu;
    if (span < 2.0 * seed[1]) throw Error(ErrorCode::InsufficientSpan, "trace spans less than two linewidths");
    if (!(seed[2] > 0.0)) throw Error(ErrorCode::DegenerateData, "trace is flat");

    // The center is fitted as an offset from the seed so that its resolution
    // is set by the linewidth rather than by the absolute frequency.
    const double c0 = seed[0];
    const bool weighted = std::all_of(t.begin(), t.end(), [](const TracePoint& p) { return p.sigma > 0.0; });
    const ResidualFn residual = [&t, c0, weighted](const Eigen::VectorXd& x) {
        Eigen::VectorXd r(static_cast<Eigen::Index>(t.size()));
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double d = s21_model(t[i].nu, c0 + x[0], std::abs(x[1]), x[2], x[3]) - t[i].value;
            r[static_cast<Eigen::Index>(i)] = weighted ? d / t[i].sigma : d;
        }
        return r;
    };
    Eigen::VectorXd x0(4), scales(4);
    x0 << g[0] - c0, g[1], g[2], g[3];
    scales << seed[1], seed[1], seed[2], std::max(std::abs(seed[3]), 1e-3 * seed[2]);

    auto finish = [c0](FitResult r) {
        r.values[0] += c0;
        r.values[1] = std::abs(r.values[1]);
        return r;
    };
    try {
        return finish(least_squares(residual, t.size(), x0, scales, {"center", "width", "amplitude", "offset"},
                                    options));
    } catch (const NotConvergedError& e) {
        throw NotConvergedError(e.what(), finish(e.best()));
    }
}

TuningFit tuning_curve_fit(const std::vector<TuningPoint>& points, const CircuitParams& initial,
                           const TuningFitOptions& options) {
    initial.validate();
    if (points.size() < 5) throw Error(ErrorCode::InsufficientSpan, "tuning fit needs at least 5 points");
    bool near_zero = false, varied = false;
    for (const auto& p : points) {
        if (std::abs(FluxPoint{p.flux}.wrapped()) <= 0.05) near_zero = true;
        if (std::abs(FluxPoint{p.flux}.wrapped()) != std::abs(FluxPoint{points.front().flux}.wrapped())) varied = true;
        if (!(p.frequency > 0.0)) throw Error(ErrorCode::InvalidParameter, "frequencies must be positive");
    }
    if (!varied) throw Error(ErrorCode::DegenerateData, "all points share one flux");
    if (!near_zero) throw Error(ErrorCode::InsufficientSpan, "tuning fit needs a point near zero flux");

    std::vector<std::string> names;
    std::vector<double> start, scale;
    const double l_wg0 = initial.l_wg();
    if (options.fit_i_c) { names.push_back("i_c"); start.push_back(initial.i_c); scale.push_back(initial.i_c); }
    if (options.fit_nu1_bare) { names.push_back("nu1_bare"); start.push_back(initial.nu1_bare); scale.push_back(initial.nu1_bare); }
    if (options.fit_l_wg) { names.push_back("l_wg"); start.push_back(l_wg0); scale.push_back(l_wg0); }
    if (names.empty()) throw Error(ErrorCode::InvalidParameter, "no free parameters");
    if (names.size() == 3) throw Error(ErrorCode::DegenerateData, "i_c and l_wg cannot be fitted together");

    auto device = [&](const Eigen::VectorXd& x) {
        CircuitParams p = initial;
        double l_wg = l_wg0;
        Eigen::Index k = 0;
        if (options.fit_i_c) p.i_c = x[k++];
        if (options.fit_nu1_bare) p.nu1_bare = x[k++];
        if (options.fit_l_wg) l_wg = x[k++];
        p.z0 = 2.0 * p.nu1_bare * l_wg;
        return p;
    };
    const ResidualFn residual = [&](const Eigen::VectorXd& x) {
        Eigen::VectorXd r(static_cast<Eigen::Index>(points.size()));
        const CircuitParams p = device(x);
        for (std::size_t i = 0; i < points.size(); ++i) {
            try {
                r[static_cast<Eigen::Index>(i)] = mode_frequency(p, points[i].mode, FluxPoint{points[i].flux}) -
                                                  points[i].frequency;
            } catch (const Error&) {
                r[static_cast<Eigen::Index>(i)] = std::numeric_limits<double>::quiet_NaN();
            }
        }
        return r;
    };

    TuningFit out;
    out.fit = least_squares(residual, points.size(), Eigen::Map<const Eigen::VectorXd>(start.data(), start.size()),
                            Eigen::Map<const Eigen::VectorXd>(scale.data(), scale.size()), names, options.solver);
    out.params = device(Eigen::Map<const Eigen::VectorXd>(out.fit.values.data(), out.fit.values.size()));
    out.l_array = array_inductance(out.params, FluxPoint{0.0});
    if (options.fit_i_c) out.l_array_sigma = out.l_array * out.fit.sigma("i_c") / out.params.i_c;
    return out;
}

SCurveFit s_curve_fit(const SCurve& curve, const SCurveFitOptions& options) {
    const auto& pts = curve.points;
    if (pts.size() < 4) throw Error(ErrorCode::RangeNotSpanned, "curve has fewer than four points");
    double p_min = 1.0, p_max = 0.0;
    for (const auto& p : pts) {
        p_min = std::min(p_min, p.p_s);
        p_max = std::max(p_max, p.p_s);
    }
    if (!(p_min < 0.05 && p_max > 0.95)) throw Error(ErrorCode::RangeNotSpanned, "curve does not span [0.05, 0.95]");
    if (!(options.attempt_product > std::log(10.0))) {
        throw Error(ErrorCode::InvalidParameter, "attempt product too small to reach P_s = 0.9");
    }

    ActivationCurve base;
    base.attempt_product = options.attempt_product;
    base.barrier = options.barrier;
    base.exponent = options.exponent;
    base.direction = pts.back().p_s < pts.front().p_s ? 1 : -1;

    const double w0 = width_10_90(pts);
    const double nu50 = crossing_frequency(pts, 0.5);
    base.scale = w0 / activation_width_factor(base.attempt_product, base.barrier, base.exponent);
    base.nu_switch = 0.0;
    base.nu_switch = nu50 - base.frequency_at(0.5);
    const double nu_sw0 = base.nu_switch;
    const double scale0 = base.scale;

    auto make = [&](const Eigen::VectorXd& x) {
        ActivationCurve c = base;
        c.nu_switch = nu_sw0 + x[0];
        c.scale = std::abs(x[1]);
        if (options.fit_exponent) c.exponent = std::abs(x[2]);
        return c;
    };

    const Eigen::Index p = options.fit_exponent ? 3 : 2;
    Eigen::VectorXd x0(p), scales(p);
    x0[0] = 0.0;
    x0[1] = scale0;
    scales[0] = scale0;
    scales[1] = scale0;
    if (options.fit_exponent) {
        x0[2] = options.exponent;
        scales[2] = 1.0;
    }
    std::vector<std::string> names{"nu_sw", "scale"};
    if (options.fit_exponent) names.push_back("exponent");

    // Binomial standard errors, first from the data and then from the first fit.
    std::vector<double> sd(pts.size(), 1.0);
    auto set_weights = [&](const ActivationCurve* model) {
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const double n = static_cast<double>(pts[i].n_pulses);
            if (n <= 0.0) continue;
            double q = model ? (*model)(pts[i].nu_d) : (pts[i].p_s * n + 0.5) / (n + 1.0);
            q = std::clamp(q, 0.5 / n, 1.0 - 0.5 / n);
            sd[i] = std::sqrt(q * (1.0 - q) / n);
        }
    };
    const ResidualFn residual = [&](const Eigen::VectorXd& x) {
        const ActivationCurve c = make(x);
        Eigen::VectorXd r(static_cast<Eigen::Index>(pts.size()));
        for (std::size_t i = 0; i < pts.size(); ++i) {
            r[static_cast<Eigen::Index>(i)] = (c(pts[i].nu_d) - pts[i].p_s) / sd[i];
        }
        return r;
    };

    set_weights(nullptr);
    FitResult fit = least_squares(residual, pts.size(), x0, scales, names, options.solver);
    const bool weighted = std::any_of(pts.begin(), pts.end(), [](const SCurvePoint& q) { return q.n_pulses > 0; });
    if (weighted) {
        const Eigen::VectorXd x1 = Eigen::Map<const Eigen::VectorXd>(fit.values.data(), p);
        const ActivationCurve first = make(x1);
        set_weights(&first);
        fit = least_squares(residual, pts.size(), x1, scales, names, options.solver);
    }

    Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(fit.values.data(), p);
    fit.values[0] += nu_sw0;
    fit.values[1] = std::abs(fit.values[1]);
    if (options.fit_exponent) fit.values[2] = std::abs(fit.values[2]);

    SCurveFit out;
    out.curve = make(x);
    out.width = out.curve.width_10_90();
    // Width depends on (scale, exponent); propagate through a numerical gradient.
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(p);
    grad[1] = out.width / out.curve.scale;
    if (options.fit_exponent) {
        const double h = 1e-6 * std::max(1.0, out.curve.exponent);
        ActivationCurve up = out.curve, down = out.curve;
        up.exponent += h;
        down.exponent -= h;
        grad[2] = (up.width_10_90() - down.width_10_90()) / (2.0 * h);
    }
    out.width_sigma = std::sqrt(std::max(0.0, grad.dot(fit.covariance * grad)));
    out.fit = std::move(fit);
    return out;
}

}  // namespace kerrsim
