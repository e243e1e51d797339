#include "kerrsim/circuit_model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <boost/math/tools/roots.hpp>

#include "kerrsim/constants.hpp"
#include "kerrsim/error.hpp"

namespace kerrsim {

namespace {

using constants::flux_quantum;
using constants::pi;
using constants::two_pi;

double abs_cos(FluxPoint flux) { return std::abs(std::cos(pi * flux.wrapped())); }

// Root of cos(x) - r x sin(x) on [m pi, m pi + pi/2]; this is cot(x) = r x on
// the odd-mode branch with m = (n - 1) / 2.
double odd_mode_phase(int n, double ratio) {
    const int m = (n - 1) / 2;
    const double lo = m * pi;
    const double hi = lo + 0.5 * pi;
    if (ratio == 0.0) {
        return hi;
    }
    const double sign = (m % 2 == 0) ? 1.0 : -1.0;
    auto f = [&](double x) { return sign * (std::cos(x) - ratio * x * std::sin(x)); };
    const double f_lo = f(lo);
    const double f_hi = f(hi);
    if (!(f_lo > 0.0 && f_hi < 0.0)) {
        std::ostringstream msg;
        msg << "cannot bracket the branch of mode " << n << " (L_array/L_wg = " << ratio << ")";
        throw Error(ErrorCode::RootBracketingFailure, msg.str());
    }
    boost::uintmax_t max_iter = 200;
    boost::math::tools::eps_tolerance<double> tol(std::numeric_limits<double>::digits - 2);
    auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, f_lo, f_hi, tol, max_iter);
    if (max_iter >= 200) {
        throw Error(ErrorCode::RootBracketingFailure, "root solver did not converge");
    }
    return 0.5 * (a + b);
}

double frequency_from_ratio(const CircuitParams& params, int n, double ratio) {
    if (n % 2 == 0) {
        return n * params.nu1_bare;
    }
    return odd_mode_phase(n, ratio) * 2.0 * params.nu1_bare / pi;
}

}  // namespace

double FluxPoint::wrapped() const { return phi_reduced - std::round(phi_reduced); }

void CircuitParams::validate() const {
    std::ostringstream msg;
    if (n_squids < 1) msg << "n_squids must be >= 1; ";
    if (!(i_c > 0.0)) msg << "i_c must be > 0; ";
    if (!(z0 > 0.0)) msg << "z0 must be > 0; ";
    if (!(nu1_bare > 0.0)) msg << "nu1_bare must be > 0; ";
    if (!(c_end >= 0.0)) msg << "c_end must be >= 0; ";
    if (!(areal_dispersion >= 0.0)) msg << "areal_dispersion must be >= 0; ";
    if (msg.str().empty()) {
        const double b0 = beta(*this, FluxPoint{0.0});
        if (!(b0 < 0.1)) msg << "beta(0) = " << b0 << " outside the weak-participation regime (< 0.1); ";
    }
    if (!msg.str().empty()) {
        throw Error(ErrorCode::InvalidParameter, msg.str());
    }
}

double Linewidths::for_mode(int n, double nu_n, double nu_reference) const {
    if (auto it = fwhm.find(n); it != fwhm.end()) {
        return it->second;
    }
    auto ref = fwhm.find(reference_mode);
    if (ref == fwhm.end()) {
        throw Error(ErrorCode::InvalidParameter, "no linewidth for the reference mode");
    }
    return ref->second * nu_n / nu_reference;
}

std::size_t ModeSpectrum::index_of(int n) const {
    auto it = std::find(modes.begin(), modes.end(), n);
    if (it == modes.end()) {
        throw Error(ErrorCode::InvalidParameter, "mode " + std::to_string(n) + " not in spectrum");
    }
    return static_cast<std::size_t>(it - modes.begin());
}

bool ModeSpectrum::contains(int n) const {
    return std::find(modes.begin(), modes.end(), n) != modes.end();
}

double josephson_inductance(double i_c, FluxPoint flux, double eps_div) {
    if (!(i_c > 0.0)) {
        throw Error(ErrorCode::InvalidParameter, "critical current must be positive");
    }
    const double c = abs_cos(flux);
    if (c <= eps_div) {
        std::ostringstream msg;
        msg << "|cos(pi Phi/Phi0)| = " << c << " at Phi/Phi0 = " << flux.phi_reduced;
        throw Error(ErrorCode::DivergentInductance, msg.str());
    }
    return flux_quantum / (two_pi * i_c * c);
}

double array_inductance(const CircuitParams& params, FluxPoint flux) {
    return params.n_squids * josephson_inductance(params.i_c, flux);
}

double josephson_energy(const CircuitParams& params, FluxPoint flux) {
    const double phi0_over_2pi = flux_quantum / two_pi;
    return phi0_over_2pi * phi0_over_2pi / josephson_inductance(params.i_c, flux);
}

double beta(const CircuitParams& params, FluxPoint flux) {
    const double l_array = array_inductance(params, flux);
    return l_array / (params.l_wg() + l_array);
}

double mode_frequency(const CircuitParams& params, int n, FluxPoint flux) {
    if (n < 1) {
        throw Error(ErrorCode::InvalidParameter, "mode index must be >= 1");
    }
    if (n % 2 == 0) {
        return n * params.nu1_bare;
    }
    return frequency_from_ratio(params, n, array_inductance(params, flux) / params.l_wg());
}

double kerr_ratio_bound(double z0) { return two_pi * z0 / constants::resistance_quantum; }

ModeSpectrum kerr_coefficients(const CircuitParams& params, FluxPoint flux,
                               const std::vector<int>& modes, const Linewidths& linewidths) {
    if (modes.empty()) {
        throw Error(ErrorCode::InvalidParameter, "mode list is empty");
    }
    ModeSpectrum s;
    s.modes = modes;
    s.flux = flux;
    s.n_squids = params.n_squids;
    s.z0 = params.z0;
    s.beta = beta(params, flux);
    s.e_j = josephson_energy(params, flux);

    const std::size_t count = modes.size();
    s.frequencies.resize(count);
    s.frequency_slope.assign(count, 0.0);
    s.frequency_curvature.assign(count, 0.0);
    for (std::size_t i = 0; i < count; ++i) {
        s.frequencies[i] = mode_frequency(params, modes[i], flux);
    }

    // Central differences; the step shrinks near the half flux quantum.
    const double room = 0.5 - std::abs(flux.wrapped());
    const double h = std::min(1e-3, 0.25 * room);
    for (std::size_t i = 0; i < count; ++i) {
        if (modes[i] % 2 == 0 || h <= 0.0) continue;
        const double up = mode_frequency(params, modes[i], FluxPoint{flux.phi_reduced + h});
        const double down = mode_frequency(params, modes[i], FluxPoint{flux.phi_reduced - h});
        s.frequency_slope[i] = (up - down) / (2.0 * h);
        s.frequency_curvature[i] = (up - 2.0 * s.frequencies[i] + down) / (h * h);
    }

    const double nu_ref = mode_frequency(params, linewidths.reference_mode, flux);
    s.linewidths.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        s.linewidths[i] = linewidths.for_mode(modes[i], s.frequencies[i], nu_ref);
    }

    // K_n / nu_n = lambda_{n,m} / nu_m = (beta^2 / N) (h nu_n / E_j).
    const double per_hz = s.beta * s.beta / params.n_squids * constants::planck / s.e_j;
    const double bound = kerr_ratio_bound(params.z0);
    s.self_kerr.assign(count, 0.0);
    s.cross_kerr = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(count));
    for (std::size_t i = 0; i < count; ++i) {
        if (modes[i] % 2 == 0) continue;
        const double ratio = per_hz * s.frequencies[i];
        if (ratio > bound) {
            std::ostringstream msg;
            msg << "K_" << modes[i] << "/nu_" << modes[i] << " = " << ratio
                << " exceeds 2 pi Z0 / R_K = " << bound;
            throw Error(ErrorCode::UpperBoundViolated, msg.str());
        }
        s.self_kerr[i] = ratio * s.frequencies[i];
    }
    for (std::size_t i = 0; i < count; ++i) {
        for (std::size_t j = 0; j < count; ++j) {
            if (i == j || modes[i] % 2 == 0 || modes[j] % 2 == 0) continue;
            s.cross_kerr(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                per_hz * (s.frequencies[i] * s.frequencies[j]);
        }
    }
    return s;
}

double critical_photon_number(double gamma, double k_self) {
    if (!(k_self > 0.0)) {
        throw Error(ErrorCode::NonpositiveKerr, "self-Kerr must be positive for bifurcation");
    }
    if (!(gamma > 0.0)) {
        throw Error(ErrorCode::InvalidParameter, "linewidth must be positive");
    }
    return 2.0 * gamma / (std::sqrt(3.0) * k_self);
}

CircuitParams calibrate(const CircuitParams& start, double target_nu3, double target_beta) {
    if (!(target_beta > 0.0 && target_beta < 0.1) || !(target_nu3 > 0.0)) {
        throw Error(ErrorCode::InvalidParameter, "calibration targets out of range");
    }
    CircuitParams out = start;
    const double l_array = array_inductance(start, FluxPoint{0.0});
    const double l_wg = l_array * (1.0 - target_beta) / target_beta;
    // nu_3 = x_3 * 2 nu1 / pi where x_3 depends only on L_array / L_wg.
    const double x3 = odd_mode_phase(3, l_array / l_wg);
    out.nu1_bare = target_nu3 * pi / (2.0 * x3);
    out.z0 = 2.0 * out.nu1_bare * l_wg;
    out.validate();
    return out;
}

CircuitParams reference_device() {
    CircuitParams p;
    p.n_squids = 7;
    p.i_c = 6.72e-6;
    p.c_end = 7e-12;
    p.areal_dispersion = 0.04;
    return calibrate(p, 5.32e9, 0.0254);
}

double array_inductance_spread(const CircuitParams& params, FluxPoint flux, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> spread(1.0, params.areal_dispersion);
    double total = 0.0;
    for (int k = 0; k < params.n_squids; ++k) {
        const double factor = std::max(spread(rng), 1e-3);
        total += josephson_inductance(params.i_c * factor, flux);
    }
    return total;
}

}  // namespace kerrsim
