#include "kerrsim/duffing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include <boost/math/tools/roots.hpp>

#include "kerrsim/constants.hpp"
#include "kerrsim/error.hpp"
#include "kerrsim/parallel.hpp"

namespace kerrsim {

namespace {

using constants::pi;
using constants::two_pi;

constexpr double half_sqrt3 = 0.8660254037844386;

struct CubicRoots {
    std::vector<double> roots;  // ascending
    bool degenerate = false;
};

double monic_cubic(double a, double b, double c, double x) { return ((x + a) * x + b) * x + c; }

double polish(double a, double b, double c, double x) {
    for (int it = 0; it < 4; ++it) {
        const double f = monic_cubic(a, b, c, x);
        const double df = (3.0 * x + 2.0 * a) * x + b;
        if (df == 0.0) break;
        const double step = f / df;
        if (!std::isfinite(step)) break;
        x -= step;
        if (std::abs(step) <= 1e-16 * std::max(1.0, std::abs(x))) break;
    }
    return x;
}

// Real roots of x^3 + a x^2 + b x + c.
CubicRoots solve_cubic(double a, double b, double c) {
    CubicRoots out;
    const double q = (a * a - 3.0 * b) / 9.0;
    const double r = (2.0 * a * a * a - 9.0 * a * b + 27.0 * c) / 54.0;
    const double q3 = q * q * q;
    if (r * r < q3) {
        const double theta = std::acos(std::clamp(r / std::sqrt(q3), -1.0, 1.0));
        const double sq = -2.0 * std::sqrt(q);
        for (int k = 0; k < 3; ++k) {
            out.roots.push_back(polish(a, b, c, sq * std::cos((theta + two_pi * k) / 3.0) - a / 3.0));
        }
        std::sort(out.roots.begin(), out.roots.end());
        if ((q3 - r * r) <= 1e-10 * q3) {
            out.degenerate = true;
            // Two of the three coincide; keep the distinct pair.
            if (out.roots[1] - out.roots[0] < out.roots[2] - out.roots[1]) {
                out.roots.erase(out.roots.begin());
            } else {
                out.roots.pop_back();
            }
        }
    } else {
        const double big_a = -std::copysign(std::cbrt(std::abs(r) + std::sqrt(r * r - q3)), r);
        const double big_b = big_a != 0.0 ? q / big_a : 0.0;
        out.roots.push_back(polish(a, b, c, big_a + big_b - a / 3.0));
        if (q3 > 0.0 && (r * r - q3) <= 1e-10 * q3) {
            out.degenerate = true;
        }
    }
    return out;
}

// Normalized steady-state relation y [(d - y)^2 + 1/4] = p with y = 2K n / gamma,
// d = detuning / gamma and p = K F / (2 pi^2 gamma^3), for K > 0.
double response(double y, double d) { return y * ((d - y) * (d - y) + 0.25); }

double spinodal_root(double d) { return std::sqrt(std::max(0.0, 4.0 * d * d - 3.0)); }
double spinodal_low(double d) { return (4.0 * d - spinodal_root(d)) / 6.0; }
double spinodal_high(double d) { return (4.0 * d + spinodal_root(d)) / 6.0; }

double normalized_strength(const KerrMode& mode, double strength) {
    return std::abs(mode.kerr) * strength / (2.0 * pi * pi * std::pow(mode.gamma, 3));
}

double strength_from_normalized(const KerrMode& mode, double p) {
    return 2.0 * pi * pi * p * std::pow(mode.gamma, 3) / std::abs(mode.kerr);
}

void require_positive_kerr(const KerrMode& mode) {
    if (!(mode.kerr > 0.0)) {
        throw Error(ErrorCode::NonpositiveKerr, "bistability requires K > 0");
    }
    if (!(mode.gamma > 0.0)) {
        throw Error(ErrorCode::InvalidParameter, "linewidth must be positive");
    }
}

// Solves branch(d) = p for d > sqrt(3)/2 where branch is increasing in d.
template <class Branch>
double solve_normalized_detuning(Branch branch, double p) {
    const double p_onset = response(1.0 / std::sqrt(3.0), half_sqrt3);
    if (!(p > p_onset)) {
        std::ostringstream msg;
        msg << "drive below the bifurcation onset (p = " << p << " <= " << p_onset << ")";
        throw Error(ErrorCode::BelowBifurcation, msg.str());
    }
    double lo = half_sqrt3;
    double hi = std::max(2.0, 2.0 * std::cbrt(27.0 * p / 4.0) + 1.0);
    auto f = [&](double d) { return branch(d) - p; };
    int guard = 0;
    while (f(hi) < 0.0) {
        lo = hi;
        hi *= 2.0;
        if (++guard > 200) throw Error(ErrorCode::RootBracketingFailure, "no switching detuning");
    }
    boost::uintmax_t max_iter = 200;
    boost::math::tools::eps_tolerance<double> tol(std::numeric_limits<double>::digits - 3);
    auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, tol, max_iter);
    return 0.5 * (a + b);
}

}  // namespace

KerrMode amplifier_mode(const ModeSpectrum& spectrum, int n, double coupling_fraction) {
    KerrMode m;
    m.index = n;
    m.nu = spectrum.frequency(n);
    m.gamma = spectrum.linewidth(n);
    m.kerr = spectrum.kerr(n);
    m.gamma_ext = coupling_fraction * m.gamma;
    return m;
}

void DriveSpec::validate() const {
    if (!(photon_flux >= 0.0)) throw Error(ErrorCode::InvalidParameter, "photon flux must be >= 0");
    if (!(duration > 0.0)) throw Error(ErrorCode::InvalidParameter, "drive duration must be > 0");
}

double drive_strength(const KerrMode& mode, double photon_flux) {
    return two_pi * mode.gamma_ext * photon_flux;
}

double photon_flux_for_strength(const KerrMode& mode, double strength) {
    return strength / (two_pi * mode.gamma_ext);
}

double SteadyState::unstable() const {
    for (const auto& b : branches) {
        if (b.stability == Stability::unstable) return b.photon_number;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

SteadyState steady_state(const KerrMode& mode, double detuning, double strength) {
    if (!(mode.gamma > 0.0)) throw Error(ErrorCode::InvalidParameter, "linewidth must be positive");
    if (!(strength >= 0.0)) throw Error(ErrorCode::InvalidParameter, "drive strength must be >= 0");
    SteadyState out;
    if (strength == 0.0) {
        out.branches.push_back({0.0, Stability::stable});
        return out;
    }
    if (mode.kerr == 0.0) {
        const double w = two_pi * detuning;
        const double k = pi * mode.gamma;
        out.branches.push_back({strength / (w * w + k * k), Stability::stable});
        return out;
    }
    // K < 0 mirrors K > 0 under detuning -> -detuning.
    const double d = std::copysign(1.0, mode.kerr) * detuning / mode.gamma;
    const double p = normalized_strength(mode, strength);
    const CubicRoots cubic = solve_cubic(-2.0 * d, d * d + 0.25, -p);
    const double to_photons = mode.gamma / (2.0 * std::abs(mode.kerr));
    out.degenerate_root = cubic.degenerate;
    std::vector<double> ys;
    for (double y : cubic.roots) {
        if (y >= 0.0) ys.push_back(y);
    }
    if (ys.size() == 3) {
        out.branches = {{ys[0] * to_photons, Stability::stable},
                        {ys[1] * to_photons, Stability::unstable},
                        {ys[2] * to_photons, Stability::stable}};
    } else if (ys.size() == 2) {
        // Saddle-node: the merged pair is marginal.
        const double dd = std::max(d, half_sqrt3);
        const bool low_merged = std::abs(ys[0] - spinodal_low(dd)) < std::abs(ys[1] - spinodal_high(dd));
        out.branches = {{ys[0] * to_photons, low_merged ? Stability::unstable : Stability::stable},
                        {ys[1] * to_photons, low_merged ? Stability::stable : Stability::unstable}};
    } else {
        for (double y : ys) out.branches.push_back({y * to_photons, Stability::stable});
    }
    return out;
}

SteadyState steady_state(const ModeSpectrum& spectrum, const DriveSpec& drive, int n,
                         double coupling_fraction) {
    drive.validate();
    const KerrMode mode = amplifier_mode(spectrum, n, coupling_fraction);
    return steady_state(mode, drive.nu_d - mode.nu, drive_strength(mode, drive.photon_flux));
}

std::complex<double> branch_amplitude(const KerrMode& mode, double detuning, double strength,
                                      double photon_number) {
    const std::complex<double> lambda(-pi * mode.gamma,
                                      two_pi * (detuning - 2.0 * mode.kerr * photon_number));
    return std::complex<double>(0.0, std::sqrt(strength)) / lambda;
}

double effective_temperature(double temperature, double nu) {
    if (!(nu > 0.0)) throw Error(ErrorCode::InvalidParameter, "frequency must be positive");
    if (temperature < 0.0) throw Error(ErrorCode::InvalidParameter, "temperature must be >= 0");
    const double half_quantum = constants::planck * nu / (2.0 * constants::boltzmann);
    if (temperature == 0.0) return half_quantum;
    return half_quantum / std::tanh(half_quantum / temperature);
}

double crossover_temperature(double nu) {
    return constants::planck * nu / (4.0 * constants::boltzmann);
}

ThermalEnvironment thermal_environment(double temperature, double nu) {
    ThermalEnvironment env;
    env.temperature = temperature;
    env.t_eff = effective_temperature(temperature, nu);
    env.n_eff = constants::boltzmann * env.t_eff / (constants::planck * nu);
    return env;
}

BistabilityRegion bistability_region(const KerrMode& mode) {
    require_positive_kerr(mode);
    BistabilityRegion r;
    r.critical_detuning = half_sqrt3 * mode.gamma;
    // At the onset the two spinodal roots merge at y = 2d/3 = 1/sqrt(3).
    const double y_onset = spinodal_low(half_sqrt3 * (1.0 + 1e-15));
    r.onset_photon_number = y_onset * mode.gamma / (2.0 * mode.kerr);
    r.onset_strength = strength_from_normalized(mode, response(y_onset, half_sqrt3));
    r.convention_constant = critical_photon_number(mode.gamma, mode.kerr) / r.onset_photon_number;
    return r;
}

SpinodalStrengths spinodal_strengths(const KerrMode& mode, double detuning) {
    require_positive_kerr(mode);
    const double d = detuning / mode.gamma;
    if (!(d > half_sqrt3)) {
        throw Error(ErrorCode::BelowBifurcation, "detuning inside the critical detuning: no bistability");
    }
    SpinodalStrengths s;
    s.lower = strength_from_normalized(mode, response(spinodal_high(d), d));
    s.upper = strength_from_normalized(mode, response(spinodal_low(d), d));
    return s;
}

double switching_detuning(const KerrMode& mode, double strength) {
    require_positive_kerr(mode);
    const double p = normalized_strength(mode, strength);
    const double d = solve_normalized_detuning([](double x) { return response(spinodal_low(x), x); }, p);
    return d * mode.gamma;
}

double retrapping_detuning(const KerrMode& mode, double strength) {
    require_positive_kerr(mode);
    const double p = normalized_strength(mode, strength);
    const double d = solve_normalized_detuning([](double x) { return response(spinodal_high(x), x); }, p);
    return d * mode.gamma;
}

double strength_for_switching_detuning(const KerrMode& mode, double detuning) {
    return spinodal_strengths(mode, detuning).upper;
}

double dykman_width(const ModeSpectrum& spectrum, const ThermalEnvironment& env, double delta_nu, int n) {
    if (!(delta_nu > 0.0)) {
        throw Error(ErrorCode::NonpositiveDetuning, "the width law needs a positive detuning");
    }
    const double nu = spectrum.frequency(n);
    const double participation = spectrum.beta * spectrum.beta / spectrum.n_squids;
    const double thermal = constants::boltzmann * env.t_eff / spectrum.e_j;
    return std::cbrt(9.0) / 4.0 * std::pow(participation * thermal, 2.0 / 3.0) *
           std::cbrt(delta_nu / nu);
}

double dykman_reference_detuning(const ModeSpectrum& spectrum, const ThermalEnvironment& env,
                                 double target_fraction, int n) {
    if (!(target_fraction > 0.0)) throw Error(ErrorCode::InvalidParameter, "target must be positive");
    const double nu = spectrum.frequency(n);
    const double at_full = dykman_width(spectrum, env, nu, n);  // (dnu/nu)^(1/3) = 1
    const double ratio = target_fraction / at_full;
    return nu * ratio * ratio * ratio;
}

double ActivationCurve::operator()(double nu_d) const {
    const double x = direction * (nu_d - nu_switch);
    if (x <= 0.0) return 1.0;
    const double rate_time = attempt_product * std::exp(-barrier * std::pow(x / scale, exponent));
    return -std::expm1(-rate_time);
}

double ActivationCurve::frequency_at(double p) const {
    if (!(p > 0.0 && p < 1.0)) throw Error(ErrorCode::InvalidParameter, "probability must be in (0, 1)");
    const double rate_time = -std::log1p(-p);
    const double e = std::log(attempt_product / rate_time) / barrier;
    const double x = e > 0.0 ? scale * std::pow(e, 1.0 / exponent) : 0.0;
    return nu_switch + direction * x;
}

double ActivationCurve::width_10_90() const { return std::abs(frequency_at(0.1) - frequency_at(0.9)); }

double activation_width_factor(double attempt_product, double barrier, double exponent) {
    ActivationCurve c;
    c.attempt_product = attempt_product;
    c.barrier = barrier;
    c.exponent = exponent;
    return c.width_10_90();
}

ActivationCurve activation_curve(const ModeSpectrum& spectrum, const ThermalEnvironment& env,
                                 double photon_flux, double pulse_duration,
                                 const SwitchingCalibration& calibration, int n,
                                 double coupling_fraction) {
    if (!(pulse_duration > 0.0)) throw Error(ErrorCode::InvalidParameter, "pulse duration must be > 0");
    const KerrMode mode = amplifier_mode(spectrum, n, coupling_fraction);
    const double detuning = switching_detuning(mode, drive_strength(mode, photon_flux));
    ActivationCurve c;
    c.nu_switch = mode.nu + detuning;
    c.direction = 1;
    c.attempt_product = calibration.attempt_rate_over_gamma * mode.gamma * pulse_duration;
    c.barrier = calibration.barrier;
    c.exponent = calibration.exponent;
    const double width = calibration.width_scale * dykman_width(spectrum, env, detuning, n) * mode.nu;
    c.scale = width / activation_width_factor(c.attempt_product, c.barrier, c.exponent);
    return c;
}

double switching_probability_analytic(const ModeSpectrum& spectrum, const ThermalEnvironment& env,
                                      const DriveSpec& drive, double pulse_duration,
                                      const SwitchingCalibration& calibration, int n,
                                      double coupling_fraction) {
    drive.validate();
    return activation_curve(spectrum, env, drive.photon_flux, pulse_duration, calibration, n,
                            coupling_fraction)(drive.nu_d);
}

SwitchingCalibration calibrate_switching(const ModeSpectrum& spectrum, const ThermalEnvironment& env,
                                         double photon_flux, double pulse_duration,
                                         double target_width, SwitchingCalibration base, int n,
                                         double coupling_fraction) {
    base.width_scale = 1.0;
    if (target_width <= 0.0) return base;
    const ActivationCurve c =
        activation_curve(spectrum, env, photon_flux, pulse_duration, base, n, coupling_fraction);
    base.width_scale = target_width / c.width_10_90();
    return base;
}

// ---------------------------------------------------------------------------

double max_time_step(const KerrMode& mode, double detuning) {
    const double by_linewidth = 0.02 / mode.gamma;
    const double scale = std::abs(detuning);
    if (scale == 0.0) return by_linewidth;
    return std::min(by_linewidth, 0.5 / (two_pi * scale));
}

KerrStepper::KerrStepper(const KerrMode& mode, double detuning, double n_eff, double dt)
    : omega_(two_pi * detuning),
      chi_(two_pi * 2.0 * mode.kerr),
      half_kappa_(pi * mode.gamma),
      dt_(dt),
      noise_sd_(std::sqrt(two_pi * mode.gamma * n_eff * dt / 2.0)) {}

std::complex<double> KerrStepper::drift(std::complex<double> alpha, double drive_amplitude) const {
    const double n = std::norm(alpha);
    return std::complex<double>(-half_kappa_, omega_ - chi_ * n) * alpha -
           std::complex<double>(0.0, drive_amplitude);
}

void KerrStepper::step_deterministic(std::complex<double>& alpha, double drive_amplitude) const {
    const double h = dt_;
    const auto k1 = drift(alpha, drive_amplitude);
    const auto k2 = drift(alpha + 0.5 * h * k1, drive_amplitude);
    const auto k3 = drift(alpha + 0.5 * h * k2, drive_amplitude);
    const auto k4 = drift(alpha + h * k3, drive_amplitude);
    alpha += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

void KerrStepper::step(std::complex<double>& alpha, double drive_amplitude, std::mt19937_64& rng) {
    step_deterministic(alpha, drive_amplitude);
    if (noise_sd_ > 0.0) {
        const double re = normal_(rng);
        const double im = normal_(rng);
        alpha += std::complex<double>(noise_sd_ * re, noise_sd_ * im);
    }
}

NoiseRealization draw_noise(const NoiseSpec& noise, std::mt19937_64& rng, std::optional<double> shared_flux) {
    std::normal_distribution<double> normal;
    // Always four draws so the dynamics stream does not depend on which sources are on.
    const double z_flux = normal(rng);
    const double z_amp = normal(rng);
    const double z_freq = normal(rng);
    const double z_excess = normal(rng);
    NoiseRealization r;
    r.flux_offset = shared_flux ? *shared_flux : noise.sigma_flux * z_flux;
    r.amplitude_factor = 1.0 + noise.drive_amp_jitter * z_amp;
    r.drive_offset = noise.drive_freq_jitter * z_freq;
    r.mode_offset = noise.excess_freq_noise * z_excess;
    return r;
}

KerrMode shifted_mode(const KerrMode& mode, const ModeSpectrum& spectrum, const NoiseRealization& r) {
    KerrMode out = mode;
    const std::size_t i = spectrum.index_of(mode.index);
    const double df = r.flux_offset;
    out.nu += spectrum.frequency_slope[i] * df + 0.5 * spectrum.frequency_curvature[i] * df * df +
              r.mode_offset;
    return out;
}

SwitchThresholds switch_thresholds(const KerrMode& mode, double detuning, double strength) {
    const SteadyState ss = steady_state(mode, detuning, strength);
    SwitchThresholds t;
    if (ss.branches.size() >= 2) {
        t.low = ss.low();
        t.unstable = ss.bistable() ? ss.branches[1].photon_number : ss.unstable();
        t.midpoint = 0.5 * (ss.low() + ss.high());
        t.low_branch_exists = true;
        return t;
    }
    const double n = ss.branches.front().photon_number;
    if (mode.kerr != 0.0) {
        const double d = std::copysign(1.0, mode.kerr) * detuning / mode.gamma;
        const double y = 2.0 * std::abs(mode.kerr) * n / mode.gamma;
        if (d > 0.0 && y > 2.0 * d / 3.0) {
            // Past the switching point: only the high branch is left.
            t.low_branch_exists = false;
            t.unstable = 0.5 * n;
            t.midpoint = 0.5 * n;
            return t;
        }
    }
    throw Error(ErrorCode::NonconvergentBranches,
                "single low-amplitude branch at this drive: nothing to switch to");
}

namespace {

struct SwitchDetector {
    double unstable;
    double midpoint;
    std::size_t dwell_steps;
    std::size_t deadline_step;  // dwell episodes must start at or before this step

    std::size_t above_count = 0;
    std::size_t episode_start = 0;
    double last_cross = std::numeric_limits<double>::quiet_NaN();
    double episode_cross = std::numeric_limits<double>::quiet_NaN();
    bool was_above_unstable = false;
    bool switched = false;

    // Returns true while the trajectory still has to be integrated.
    bool update(std::size_t step, double t, double n) {
        const bool above_unstable = n > unstable;
        if (above_unstable && !was_above_unstable) last_cross = t;
        was_above_unstable = above_unstable;
        if (n > midpoint) {
            if (above_count == 0) {
                episode_start = step;
                episode_cross = std::isnan(last_cross) ? t : last_cross;
            }
            ++above_count;
            if (above_count >= dwell_steps && episode_start <= deadline_step) switched = true;
        } else {
            above_count = 0;
        }
        if (switched) return false;
        if (step < deadline_step) return true;
        return above_count > 0 && episode_start <= deadline_step;
    }
};

}  // namespace

TrajectoryResult simulate_trajectory(const ModeSpectrum& spectrum, const ThermalEnvironment& env,
                                     const DriveSpec& drive, const NoiseSpec& noise,
                                     std::uint64_t seed, const TrajectoryOptions& options) {
    drive.validate();
    noise.validate();
    std::mt19937_64 rng(seed);
    TrajectoryResult result;
    result.noise = draw_noise(noise, rng, options.flux_offset);

    const KerrMode base = amplifier_mode(spectrum, options.mode, options.coupling_fraction);
    const KerrMode mode = shifted_mode(base, spectrum, result.noise);
    const double detuning = drive.nu_d + result.noise.drive_offset - mode.nu;
    const double strength = drive_strength(mode, drive.photon_flux) *
                            result.noise.amplitude_factor * result.noise.amplitude_factor;
    const SwitchThresholds thr = switch_thresholds(mode, detuning, strength);

    const double dt_max = max_time_step(mode, detuning);
    const double dt = options.dt > 0.0 ? options.dt : dt_max;
    if (dt > dt_max * (1.0 + 1e-9)) {
        std::ostringstream msg;
        msg << "dt = " << dt << " s exceeds the admissible " << dt_max << " s";
        throw Error(ErrorCode::StepSizeTooLarge, msg.str());
    }
    result.dt = dt;
    const double t_max = options.t_max > 0.0 ? options.t_max : drive.duration;
    const auto steps = static_cast<std::size_t>(std::ceil(t_max / dt - 1e-9));
    const auto dwell_steps = static_cast<std::size_t>(
        std::max(1.0, std::ceil(options.dwell_linewidths / mode.gamma / dt - 1e-9)));

    std::complex<double> alpha(0.0, 0.0);
    if (options.initial == InitialState::low_branch && thr.low_branch_exists) {
        alpha = branch_amplitude(mode, detuning, strength, thr.low);
    }
    KerrStepper stepper(mode, detuning, env.n_eff, dt);
    const double amplitude = std::sqrt(strength);
    SwitchDetector detector{thr.unstable, thr.midpoint, dwell_steps, steps};
    const std::size_t stride = std::max<std::size_t>(1, options.record_stride);

    auto record = [&](std::size_t step) {
        const double t = step * dt;
        result.trajectory.push_back({t, alpha.real(), alpha.imag(), std::norm(alpha)});
    };
    if (options.record) record(0);
    for (std::size_t s = 1;; ++s) {
        stepper.step(alpha, amplitude, rng);
        const double t = s * dt;
        const bool keep_going = detector.update(s, t, std::norm(alpha));
        if (options.record && (s % stride == 0 || s == steps)) record(s);
        if (!keep_going && !(options.record && s < steps)) break;
    }
    result.switched = detector.switched;
    result.switch_time =
        detector.switched ? detector.episode_cross : std::numeric_limits<double>::quiet_NaN();
    return result;
}

EnsembleResult switching_ensemble(const ModeSpectrum& spectrum, const ThermalEnvironment& env,
                                  const DriveSpec& drive, const NoiseSpec& noise,
                                  std::uint64_t master_seed, std::size_t trials,
                                  const TrajectoryOptions& options, unsigned jobs,
                                  std::uint64_t stream) {
    TrajectoryOptions opts = options;
    opts.record = false;
    std::vector<char> switched(trials, 0);
    parallel_for(trials, jobs, [&](std::size_t i) {
        const auto r = simulate_trajectory(spectrum, env, drive, noise,
                                           derive_seed(master_seed, stream, i), opts);
        switched[i] = r.switched ? 1 : 0;
    });
    EnsembleResult out;
    out.trials = trials;
    for (char c : switched) out.switches += static_cast<std::size_t>(c);
    return out;
}

void write_trajectory_csv(std::ostream& out, const TrajectoryResult& result) {
    out << "t_s,re_alpha,im_alpha,n_photons\n";
    out.precision(12);
    for (const auto& p : result.trajectory) {
        out << p.t << ',' << p.re_alpha << ',' << p.im_alpha << ',' << p.n_photons << '\n';
    }
}

}  // namespace kerrsim
