#include "kerrsim/spectroscopy.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <boost/math/tools/roots.hpp>

namespace kerrsim {

namespace {

void require_coupled(const ModeSpectrum& spectrum, int n, int amplifier) {
    if (n % 2 == 0) {
        std::ostringstream msg;
        msg << "mode " << n << " has a current node at the array and no cross-Kerr coupling";
        throw Error(ErrorCode::UncoupledMode, msg.str());
    }
    if (n == amplifier) throw Error(ErrorCode::InvalidParameter, "probe mode equals the amplifier mode");
    spectrum.index_of(n);
}

double peak_occupation(const ModeSpectrum& spectrum, int n, double probe_power, double coupling_fraction) {
    if (!(probe_power >= 0.0)) throw Error(ErrorCode::InvalidParameter, "probe power must be >= 0");
    if (!(coupling_fraction > 0.0 && coupling_fraction <= 1.0)) {
        throw Error(ErrorCode::InvalidParameter, "coupling fraction must be in (0, 1]");
    }
    const double g = spectrum.linewidth(n);
    return 2.0 * coupling_fraction * probe_power / (std::numbers::pi * g);
}

}  // namespace

double coupled_mode_occupation(const ModeSpectrum& spectrum, int n, double nu_probe, double probe_power,
                               double coupling_fraction) {
    const double peak = peak_occupation(spectrum, n, probe_power, coupling_fraction);
    const double g = spectrum.linewidth(n);
    if (spectrum.kerr(n) * peak > linearity_limit * g) {
        std::ostringstream msg;
        msg << "K_" << n << " * n_peak = " << spectrum.kerr(n) * peak << " Hz is not small against gamma_" << n
            << " = " << g << " Hz";
        throw Error(ErrorCode::LinearityViolated, msg.str());
    }
    const double hw = 0.5 * g;
    const double d = nu_probe - spectrum.frequency(n);
    return peak * hw * hw / (d * d + hw * hw);
}

double cross_kerr_shift(const ModeSpectrum& spectrum, int n, double n_bar, int amplifier) {
    require_coupled(spectrum, n, amplifier);
    if (!(n_bar >= 0.0)) throw Error(ErrorCode::InvalidParameter, "photon number must be >= 0");
    return spectrum.cross(amplifier, n) * n_bar;
}

double photon_sensitivity(const ModeSpectrum& spectrum, double width, int n, int amplifier) {
    require_coupled(spectrum, n, amplifier);
    if (!(width > 0.0)) throw Error(ErrorCode::InvalidParameter, "width must be > 0");
    return width / spectrum.cross(amplifier, n);
}

double probe_power_for_peak(const ModeSpectrum& spectrum, int n, const ActivationCurve& curve, double bias_p,
                            double peak_p, int amplifier, double coupling_fraction) {
    require_coupled(spectrum, n, amplifier);
    const double shift = curve.frequency_at(bias_p) - curve.frequency_at(peak_p);
    if (!(shift > 0.0)) throw Error(ErrorCode::InvalidParameter, "a positive shift cannot reach the requested peak");
    const double n_bar = shift / spectrum.cross(amplifier, n);
    return n_bar * std::numbers::pi * spectrum.linewidth(n) / (2.0 * coupling_fraction);
}

std::vector<double> probe_grid(const ModeSpectrum& spectrum, int n, std::size_t points, double half_span) {
    if (points < 2) throw Error(ErrorCode::InvalidParameter, "probe grid needs at least two points");
    const double c = spectrum.frequency(n), h = half_span * spectrum.linewidth(n);
    std::vector<double> grid(points);
    for (std::size_t i = 0; i < points; ++i) {
        grid[i] = c - h + 2.0 * h * static_cast<double>(i) / static_cast<double>(points - 1);
    }
    return grid;
}

SpectroscopyScan run_scan(SpectroscopyScan scan, const PulseSpec& bias, const ModeSpectrum& spectrum,
                          const ThermalEnvironment& env, const NoiseSpec& noise, const AcquisitionOptions& options,
                          const ScanOptions& so) {
    const int amp = options.mode;
    const int n = scan.target_mode;
    const bool coupled = n % 2 != 0;
    if (coupled) require_coupled(spectrum, n, amp);
    spectrum.index_of(n);
    if (scan.probe_grid.empty()) throw Error(ErrorCode::InvalidParameter, "empty probe grid");
    const std::size_t m = scan.probe_grid.size();

    // Both checks allow for counting noise: the bias fails only if its
    // interval misses the tolerance band, drift only if it is significant.
    auto bias_estimate = [&](std::size_t point) {
        return switching_probability(bias, spectrum, env, noise, options, so.scan_index, point);
    };
    const auto before = bias_estimate(m);
    scan.bias_before = before.p_s;
    if (before.ci.high < so.bias_target - so.bias_tolerance || before.ci.low > so.bias_target + so.bias_tolerance) {
        std::ostringstream msg;
        msg << "bias P_s = " << scan.bias_before << " is outside " << so.bias_target << " +- " << so.bias_tolerance;
        throw Error(ErrorCode::BiasDrift, msg.str());
    }

    const std::size_t a = spectrum.index_of(amp);
    scan.trace.clear();
    for (std::size_t i = 0; i < m; ++i) {
        const double nu = scan.probe_grid[i];
        const double occupation = coupled_mode_occupation(spectrum, n, nu, scan.probe_power,
                                                          options.coupling_fraction);
        ModeSpectrum shifted = spectrum;
        shifted.frequencies[a] += coupled ? cross_kerr_shift(spectrum, n, occupation, amp)
                                          : spectrum.cross(amp, n) * occupation;
        const auto est = switching_probability(bias, shifted, env, noise, options, so.scan_index, i);
        scan.trace.push_back({nu, est.p_s, est.ci.low, est.ci.high, est.n_pulses});
    }

    const auto after = bias_estimate(m + 1);
    scan.bias_after = after.p_s;
    const double pooled = 0.5 * (scan.bias_before + scan.bias_after);
    const double sd = std::sqrt(pooled * (1.0 - pooled) * 2.0 / static_cast<double>(options.n_pulses));
    if (std::abs(scan.bias_after - scan.bias_before) - 1.96 * sd > so.drift_limit) {
        std::ostringstream msg;
        msg << "bias moved from P_s = " << scan.bias_before << " to " << scan.bias_after << " during the sweep";
        throw Error(ErrorCode::BiasDrift, msg.str());
    }

    scan.fitted = false;
    if (coupled) {
        std::vector<TracePoint> t;
        for (const auto& p : scan.trace) {
            const double n_p = static_cast<double>(p.n_pulses);
            const double q = (p.p_s * n_p + 0.5) / (n_p + 1.0);
            t.push_back({p.nu_probe, p.p_s, std::sqrt(q * (1.0 - q) / n_p)});
        }
        scan.fit = lorentzian_fit(t);
        scan.fitted = true;
        scan.fitted_center = scan.fit.value("center");
        scan.fitted_center_sigma = scan.fit.sigma("center");
        scan.fitted_width = scan.fit.value("width");
    }
    return scan;
}

namespace {

// Root of cot(x) = r x on the branch of odd mode n.
double odd_mode_root(int n, double r) {
    const double lo = 0.5 * std::numbers::pi * (n - 1), hi = 0.5 * std::numbers::pi * n;
    auto f = [r](double x) { return std::cos(x) - r * x * std::sin(x); };
    std::uintmax_t iters = 200;
    const auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, f(lo), f(hi),
                                                          boost::math::tools::eps_tolerance<double>(52), iters);
    return 0.5 * (a + b);
}

}  // namespace

BetaFit extract_beta(const std::vector<ModeCenter>& centers, double nu1_guess, double ratio_guess) {
    if (centers.size() < 2) throw Error(ErrorCode::DegenerateData, "beta extraction needs at least two modes");
    for (const auto& c : centers) {
        if (c.mode % 2 == 0) throw Error(ErrorCode::UncoupledMode, "even modes do not constrain beta");
        if (!(c.center > 0.0) || c.sigma < 0.0) throw Error(ErrorCode::InvalidParameter, "invalid mode center");
    }
    const ResidualFn residual = [&centers](const Eigen::VectorXd& x) {
        Eigen::VectorXd r(static_cast<Eigen::Index>(centers.size()));
        for (std::size_t i = 0; i < centers.size(); ++i) {
            const auto& c = centers[i];
            double model = std::numeric_limits<double>::quiet_NaN();
            if (x[0] > 0.0 && x[1] > 0.0) model = 2.0 * x[0] * odd_mode_root(c.mode, x[1]) / std::numbers::pi;
            r[static_cast<Eigen::Index>(i)] = (model - c.center) / (c.sigma > 0.0 ? c.sigma : 1.0);
        }
        return r;
    };
    Eigen::VectorXd x0(2), scales(2);
    x0 << nu1_guess, ratio_guess;
    scales << nu1_guess, ratio_guess;
    BetaFit out;
    out.fit = least_squares(residual, centers.size(), x0, scales, {"nu1_bare", "ratio"});
    const double r = out.fit.value("ratio");
    out.beta = r / (1.0 + r);
    out.beta_sigma = out.fit.sigma("ratio") / ((1.0 + r) * (1.0 + r));
    return out;
}

}  // namespace kerrsim
