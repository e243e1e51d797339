#include "kerrsim/noise_model.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "kerrsim/error.hpp"

namespace kerrsim {

void NoiseSpec::validate() const {
    std::ostringstream msg;
    if (!(sigma_flux >= 0.0)) msg << "sigma_flux must be >= 0; ";
    if (!(drive_amp_jitter >= 0.0)) msg << "drive_amp_jitter must be >= 0; ";
    if (!(drive_freq_jitter >= 0.0)) msg << "drive_freq_jitter must be >= 0; ";
    if (!(excess_freq_noise >= 0.0)) msg << "excess_freq_noise must be >= 0; ";
    if (!msg.str().empty()) throw Error(ErrorCode::InvalidParameter, msg.str());
}

double gaussian_10_90_factor() {
    static const double factor = [] {
        const boost::math::normal_distribution<double> z;
        return boost::math::quantile(z, 0.9) - boost::math::quantile(z, 0.1);
    }();
    return factor;
}

double sample_quasistatic_flux(const NoiseSpec& noise, std::uint64_t seed) {
    noise.validate();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    return noise.sigma_flux * normal(rng);
}

std::vector<double> sample_quasistatic_flux(const NoiseSpec& noise, std::uint64_t seed, std::size_t n_pulses) {
    noise.validate();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::vector<double> out(n_pulses);
    if (noise.resample == ResamplePolicy::per_curve) {
        std::fill(out.begin(), out.end(), noise.sigma_flux * normal(rng));
    } else {
        for (auto& v : out) v = noise.sigma_flux * normal(rng);
    }
    return out;
}

namespace {

double derivative_step(FluxPoint flux) {
    const double room = 0.5 - std::abs(flux.wrapped());
    return std::min(1e-3, 0.25 * room);
}

}  // namespace

double flux_slope(const CircuitParams& params, FluxPoint flux, int n) {
    const double h = derivative_step(flux);
    if (h <= 0.0) return 0.0;
    return (mode_frequency(params, n, FluxPoint{flux.phi_reduced + h}) -
            mode_frequency(params, n, FluxPoint{flux.phi_reduced - h})) /
           (2.0 * h);
}

double flux_curvature(const CircuitParams& params, FluxPoint flux, int n) {
    const double h = derivative_step(flux);
    if (h <= 0.0) return 0.0;
    return (mode_frequency(params, n, FluxPoint{flux.phi_reduced + h}) - 2.0 * mode_frequency(params, n, flux) +
            mode_frequency(params, n, FluxPoint{flux.phi_reduced - h})) /
           (h * h);
}

double broadened_width(const CircuitParams& params, FluxPoint flux, double intrinsic_width,
                       const NoiseSpec& noise, int n) {
    noise.validate();
    return intrinsic_width + gaussian_10_90_factor() * std::abs(flux_slope(params, flux, n)) * noise.sigma_flux;
}

double second_order_width(const CircuitParams& params, FluxPoint flux, double sigma_flux, int n) {
    const boost::math::chi_squared_distribution<double> chi2(1.0);
    const double spread = boost::math::quantile(chi2, 0.9) - boost::math::quantile(chi2, 0.1);
    return 0.5 * std::abs(flux_curvature(params, flux, n)) * sigma_flux * sigma_flux * spread;
}

JitterContribution drive_jitter_contribution(const KerrMode& mode, double photon_flux, const NoiseSpec& noise,
                                             double intrinsic_width) {
    noise.validate();
    JitterContribution c;
    const double cg = gaussian_10_90_factor();
    if (noise.drive_amp_jitter > 0.0) {
        const double f = drive_strength(mode, photon_flux);
        const double h = 1e-4 * f;
        const double dnu_df = (switching_detuning(mode, f + h) - switching_detuning(mode, f - h)) / (2.0 * h);
        c.amplitude = cg * std::abs(2.0 * f * dnu_df) * noise.drive_amp_jitter;
    }
    c.frequency = cg * noise.drive_freq_jitter;
    c.jitter = std::hypot(c.amplitude, c.frequency);
    c.total = std::hypot(intrinsic_width, c.jitter);
    return c;
}

double combine_quadrature(const std::vector<double>& widths) {
    double sum = 0.0;
    for (double w : widths) sum += w * w;
    return std::sqrt(sum);
}

double convolved_width(const ActivationCurve& curve, double sigma_nu) {
    if (!(sigma_nu >= 0.0)) throw Error(ErrorCode::InvalidParameter, "sigma must be >= 0");
    if (sigma_nu == 0.0) return curve.width_10_90();
    constexpr int nodes = 2001;
    constexpr double z_max = 8.0;
    std::vector<double> z(nodes), w(nodes);
    double norm = 0.0;
    for (int i = 0; i < nodes; ++i) {
        z[i] = -z_max + 2.0 * z_max * i / (nodes - 1);
        w[i] = std::exp(-0.5 * z[i] * z[i]) * ((i == 0 || i == nodes - 1) ? 0.5 : 1.0);
        norm += w[i];
    }
    auto averaged = [&](double nu) {
        double s = 0.0;
        for (int i = 0; i < nodes; ++i) s += w[i] * curve(nu + sigma_nu * z[i]);
        return s / norm;
    };
    // Averaged probability decreases along `direction`.
    auto crossing = [&](double p) {
        double a = curve.frequency_at(p) - curve.direction * 10.0 * sigma_nu;
        double b = curve.frequency_at(p) + curve.direction * 10.0 * sigma_nu;
        for (int it = 0; it < 200 && std::abs(b - a) > 1e-9 * std::abs(sigma_nu); ++it) {
            const double mid = 0.5 * (a + b);
            if (averaged(mid) > p) a = mid; else b = mid;
        }
        return 0.5 * (a + b);
    };
    return std::abs(crossing(0.1) - crossing(0.9));
}

FitResult fit_flux_noise(const CircuitParams& params, const std::vector<std::pair<double, double>>& points, int n) {
    if (points.size() < 3) throw Error(ErrorCode::DegenerateData, "need at least 3 flux points");
    const double cg = gaussian_10_90_factor();
    Eigen::VectorXd slope(static_cast<Eigen::Index>(points.size()));
    Eigen::VectorXd width(slope.size());
    double mean_width = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        slope[static_cast<Eigen::Index>(i)] = cg * std::abs(flux_slope(params, FluxPoint{points[i].first}, n));
        width[static_cast<Eigen::Index>(i)] = points[i].second;
        mean_width += points[i].second / points.size();
    }
    if (slope.maxCoeff() - slope.minCoeff() <= 1e-12 * std::max(1.0, slope.maxCoeff())) {
        throw Error(ErrorCode::DegenerateData, "all points have the same flux sensitivity");
    }
    const double sigma_scale = std::max(mean_width / std::max(slope.maxCoeff(), 1.0), 1e-12);
    ResidualFn residual = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
        return (x[0] + slope.array() * x[1] - width.array()).matrix();
    };
    Eigen::VectorXd x0(2), scales(2);
    x0 << width.minCoeff(), sigma_scale;
    scales << std::max(mean_width, 1e-12), sigma_scale;
    return least_squares(residual, points.size(), x0, scales, {"delta_s0", "sigma_flux"});
}

}  // namespace kerrsim
