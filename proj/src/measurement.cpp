#include "kerrsim/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/beta.hpp>

#include "kerrsim/constants.hpp"
#include "kerrsim/error.hpp"
#include "kerrsim/noise_model.hpp"
#include "kerrsim/parallel.hpp"

namespace kerrsim {

void PulseSpec::validate(double gamma) const {
    std::ostringstream msg;
    if (!(plateau_power >= 0.0)) msg << "plateau power must be >= 0; ";
    if (!(latch_power_fraction >= 0.0 && latch_power_fraction <= 1.0)) msg << "latch fraction must be in [0, 1]; ";
    if (!(t_rise >= 0.0 && t_latch >= 0.0)) msg << "rise and latch times must be >= 0; ";
    if (!(t_measure > 0.0)) msg << "measurement time must be > 0; ";
    if (!(repetition_rate > 0.0)) msg << "repetition rate must be > 0; ";
    if (msg.str().empty() && !(off_time() >= 10.0 / gamma)) {
        msg << "off time " << off_time() << " s is shorter than 10/gamma = " << 10.0 / gamma << " s; ";
    }
    if (!msg.str().empty()) throw Error(ErrorCode::InvalidParameter, msg.str());
}

PulseSpec default_pulse(const KerrMode& mode, double nu_d, double photon_flux) {
    PulseSpec p;
    p.nu_d = nu_d;
    p.plateau_power = photon_flux;
    p.t_rise = 10.0 / mode.gamma;
    p.t_measure = 20.0 / mode.gamma;
    p.t_latch = 100.0 / mode.gamma;
    return p;
}

double pre_pulse_photons(const PulseSpec& pulse, const KerrMode& mode, double n_end) {
    return n_end * std::exp(-constants::two_pi * mode.gamma * pulse.off_time());
}

namespace {

double latch_settle(const PulseSpec& pulse, double gamma) { return std::min(10.0 / gamma, 0.5 * pulse.t_latch); }

double sample_interval(const DetectionSpec& d, double gamma) {
    return d.sample_interval > 0.0 ? d.sample_interval : 0.5 / gamma;
}

std::size_t latch_samples(const PulseSpec& pulse, const DetectionSpec& d, double gamma) {
    return static_cast<std::size_t>(std::floor((pulse.t_latch - latch_settle(pulse, gamma)) /
                                               sample_interval(d, gamma) + 1e-9));
}

}  // namespace

Discriminator make_discriminator(const KerrMode& mode, const PulseSpec& pulse) {
    Discriminator disc;
    const double detuning = pulse.nu_d - mode.nu;
    const double strength = drive_strength(mode, pulse.plateau_power) * pulse.latch_power_fraction;
    const SteadyState ss = steady_state(mode, detuning, strength);
    std::complex<double> low, high;
    bool have_high = true;
    if (ss.branches.size() >= 2) {
        low = branch_amplitude(mode, detuning, strength, ss.low());
        high = branch_amplitude(mode, detuning, strength, ss.high());
    } else {
        const double n = ss.low();
        const double d = std::copysign(1.0, mode.kerr) * detuning / mode.gamma;
        const double y = 2.0 * std::abs(mode.kerr) * n / mode.gamma;
        if (mode.kerr != 0.0 && d > 0.0 && y > 2.0 * d / 3.0) {
            high = branch_amplitude(mode, detuning, strength, n);
        } else {
            low = branch_amplitude(mode, detuning, strength, n);
            have_high = false;
        }
    }
    disc.low = low;
    if (!have_high || std::abs(high - low) == 0.0) {
        // Nothing to switch to: no finite threshold.
        disc.axis = {1.0, 0.0};
        disc.separation = 0.0;
        disc.threshold = std::numeric_limits<double>::infinity();
        return disc;
    }
    disc.separation = std::abs(high - low);
    disc.axis = (high - low) / disc.separation;
    disc.threshold = 0.5 * disc.separation;
    return disc;
}

double discrimination_fidelity(const KerrMode& mode, const PulseSpec& pulse, const DetectionSpec& detection) {
    const Discriminator disc = make_discriminator(mode, pulse);
    const std::size_t n = latch_samples(pulse, detection, mode.gamma);
    if (n == 0 || !std::isfinite(disc.threshold)) return 0.5;
    if (detection.noise_photons <= 0.0) return 1.0;
    const double sigma_mean = std::sqrt(detection.noise_photons / static_cast<double>(n));
    const boost::math::normal_distribution<double> z;
    return boost::math::cdf(z, 0.5 * disc.separation / sigma_mean);
}

PulseResult run_pulse(const PulseSpec& pulse, const ModeSpectrum& spectrum, const ThermalEnvironment& env,
                      const NoiseSpec& noise, std::uint64_t seed, const DetectionSpec& detection,
                      std::optional<double> shared_flux, bool record_trace, int mode_index,
                      double coupling_fraction) {
    const KerrMode nominal = amplifier_mode(spectrum, mode_index, coupling_fraction);
    pulse.validate(nominal.gamma);
    noise.validate();
    std::mt19937_64 rng(seed);
    const NoiseRealization real = draw_noise(noise, rng, shared_flux);
    const KerrMode mode = shifted_mode(nominal, spectrum, real);
    const double detuning = pulse.nu_d + real.drive_offset - mode.nu;
    const double amplitude =
        std::sqrt(drive_strength(mode, pulse.plateau_power)) * real.amplitude_factor;
    const double latch_amplitude = amplitude * std::sqrt(pulse.latch_power_fraction);
    const double dt = max_time_step(mode, detuning);
    KerrStepper stepper(mode, detuning, env.n_eff, dt);

    const Discriminator disc = make_discriminator(nominal, pulse);
    const double midpoint = [&] {
        try {
            return switch_thresholds(mode, detuning, amplitude * amplitude).midpoint;
        } catch (const Error&) {
            return std::numeric_limits<double>::infinity();
        }
    }();

    std::mt19937_64 detector_rng(splitmix64(seed ^ 0xd1b54a32d192ed03ULL));
    std::normal_distribution<double> normal;
    const double sigma_x = std::sqrt(std::max(0.0, detection.noise_photons));
    const double ds = sample_interval(detection, mode.gamma);
    const double t_plateau_end = pulse.t_rise + pulse.t_measure;
    const double t_end = pulse.duration();
    const double t_window = t_plateau_end + latch_settle(pulse, mode.gamma);

    PulseResult result;
    std::complex<double> alpha(0.0, 0.0);
    const auto steps = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9));
    double next_sample = ds;
    double latch_sum = 0.0;
    std::size_t latch_count = 0;
    bool plateau_checked = false;
    for (std::size_t s = 1; s <= steps; ++s) {
        const double t0 = (s - 1) * dt;
        double a;
        if (t0 < pulse.t_rise) {
            a = amplitude * (t0 + 0.5 * dt) / pulse.t_rise;
        } else if (t0 < t_plateau_end) {
            a = amplitude;
        } else {
            a = latch_amplitude;
        }
        stepper.step(alpha, a, rng);
        const double t = s * dt;
        if (!plateau_checked && t >= t_plateau_end) {
            result.switched_dynamics = std::norm(alpha) > midpoint;
            plateau_checked = true;
        }
        while (t >= next_sample - 1e-12 * ds && next_sample <= t_end + 1e-12 * ds) {
            const double x = std::real((alpha - disc.low) * std::conj(disc.axis)) + sigma_x * normal(detector_rng);
            if (record_trace) result.trace.push_back({next_sample, x});
            if (next_sample > t_window && latch_count < latch_samples(pulse, detection, mode.gamma)) {
                latch_sum += x;
                ++latch_count;
            }
            next_sample += ds;
        }
    }
    result.latch_mean = latch_count ? latch_sum / static_cast<double>(latch_count) : 0.0;
    result.switched = latch_count > 0 && result.latch_mean > disc.threshold;
    return result;
}

BinomialInterval clopper_pearson(std::size_t k, std::size_t n, double confidence) {
    if (n == 0 || k > n) throw Error(ErrorCode::InvalidParameter, "need 0 <= k <= n and n > 0");
    const double alpha = 1.0 - confidence;
    BinomialInterval ci;
    const auto kd = static_cast<double>(k);
    const auto nd = static_cast<double>(n);
    ci.low = k == 0 ? 0.0 : boost::math::ibeta_inv(kd, nd - kd + 1.0, 0.5 * alpha);
    ci.high = k == n ? 1.0 : boost::math::ibeta_inv(kd + 1.0, nd - kd, 1.0 - 0.5 * alpha);
    return ci;
}

std::uint64_t pulse_seed(std::uint64_t master_seed, std::uint64_t curve, std::uint64_t point, std::uint64_t pulse) {
    return derive_seed(derive_seed(master_seed, curve, point), 0x70756c7365ULL, pulse);
}

std::optional<double> curve_flux_offset(const NoiseSpec& noise, std::uint64_t master_seed, std::uint64_t curve) {
    if (noise.resample != ResamplePolicy::per_curve) return std::nullopt;
    return sample_quasistatic_flux(noise, derive_seed(master_seed, curve, 0x6375727665ULL));
}

ProbabilityEstimate switching_probability(const PulseSpec& pulse, const ModeSpectrum& spectrum,
                                          const ThermalEnvironment& env, const NoiseSpec& noise,
                                          const AcquisitionOptions& options, std::uint64_t curve,
                                          std::uint64_t point) {
    if (options.n_pulses == 0) throw Error(ErrorCode::InvalidParameter, "n_pulses must be >= 1");
    const KerrMode nominal = amplifier_mode(spectrum, options.mode, options.coupling_fraction);
    pulse.validate(nominal.gamma);
    noise.validate();
    const std::optional<double> shared = curve_flux_offset(noise, options.master_seed, curve);
    std::vector<char> switched(options.n_pulses, 0);
    auto seed_of = [&](std::size_t j) { return pulse_seed(options.master_seed, curve, point, j); };

    switch (options.engine) {
        case Engine::analytic: {
            const ActivationCurve base = activation_curve(spectrum, env, pulse.plateau_power, pulse.t_measure,
                                                          options.calibration, options.mode,
                                                          options.coupling_fraction);
            parallel_for(options.n_pulses, options.jobs, [&](std::size_t j) {
                std::mt19937_64 rng(seed_of(j));
                const NoiseRealization real = draw_noise(noise, rng, shared);
                const double shift = shifted_mode(nominal, spectrum, real).nu - nominal.nu;
                const ActivationCurve curve_j =
                    real.amplitude_factor == 1.0
                        ? base
                        : activation_curve(spectrum, env,
                                           pulse.plateau_power * real.amplitude_factor * real.amplitude_factor,
                                           pulse.t_measure, options.calibration, options.mode,
                                           options.coupling_fraction);
                const double p = curve_j(pulse.nu_d + real.drive_offset - shift);
                std::uniform_real_distribution<double> u;
                switched[j] = u(rng) < p ? 1 : 0;
            });
            break;
        }
        case Engine::trajectory: {
            const DriveSpec drive{pulse.nu_d, pulse.plateau_power, pulse.t_measure};
            TrajectoryOptions opts;
            opts.dt = options.dt;
            opts.t_max = pulse.t_measure;
            opts.mode = options.mode;
            opts.coupling_fraction = options.coupling_fraction;
            opts.flux_offset = shared;
            parallel_for(options.n_pulses, options.jobs, [&](std::size_t j) {
                switched[j] = simulate_trajectory(spectrum, env, drive, noise, seed_of(j), opts).switched ? 1 : 0;
            });
            break;
        }
        case Engine::pulse: {
            parallel_for(options.n_pulses, options.jobs, [&](std::size_t j) {
                switched[j] = run_pulse(pulse, spectrum, env, noise, seed_of(j), options.detection, shared, false,
                                        options.mode, options.coupling_fraction)
                                      .switched
                                  ? 1
                                  : 0;
            });
            break;
        }
    }
    ProbabilityEstimate est;
    est.n_pulses = options.n_pulses;
    est.switches = static_cast<std::size_t>(std::count(switched.begin(), switched.end(), 1));
    est.p_s = static_cast<double>(est.switches) / static_cast<double>(est.n_pulses);
    est.ci = clopper_pearson(est.switches, est.n_pulses);
    return est;
}

namespace {

// Pool-adjacent-violators for a non-increasing fit.
std::vector<double> isotonic_decreasing(const std::vector<double>& y, const std::vector<double>& w) {
    struct Block {
        double value, weight;
        std::size_t count;
    };
    std::vector<Block> blocks;
    for (std::size_t i = 0; i < y.size(); ++i) {
        blocks.push_back({y[i], w[i], 1});
        while (blocks.size() > 1 && blocks[blocks.size() - 2].value < blocks.back().value) {
            Block b = blocks.back();
            blocks.pop_back();
            Block& a = blocks.back();
            a.value = (a.value * a.weight + b.value * b.weight) / (a.weight + b.weight);
            a.weight += b.weight;
            a.count += b.count;
        }
    }
    std::vector<double> out;
    out.reserve(y.size());
    for (const auto& b : blocks) out.insert(out.end(), b.count, b.value);
    return out;
}

// Shape-preserving cubic Hermite slopes (Fritsch-Butland weights, three-point ends).
std::vector<double> pchip_slopes(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    std::vector<double> d(n, 0.0);
    if (n < 2) return d;
    std::vector<double> h(n - 1), delta(n - 1);
    for (std::size_t k = 0; k + 1 < n; ++k) {
        h[k] = x[k + 1] - x[k];
        delta[k] = (y[k + 1] - y[k]) / h[k];
    }
    if (n == 2) {
        d[0] = d[1] = delta[0];
        return d;
    }
    for (std::size_t k = 1; k + 1 < n; ++k) {
        if (delta[k - 1] * delta[k] <= 0.0) continue;
        const double w1 = 2.0 * h[k] + h[k - 1];
        const double w2 = h[k] + 2.0 * h[k - 1];
        d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
    }
    auto edge = [](double h0, double h1, double m0, double m1) {
        double dd = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
        if (dd * m0 <= 0.0) return 0.0;
        if (m0 * m1 <= 0.0 && std::abs(dd) > std::abs(3.0 * m0)) return 3.0 * m0;
        return dd;
    };
    d[0] = edge(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = edge(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    return d;
}

double hermite(double x0, double x1, double y0, double y1, double d0, double d1, double x) {
    const double h = x1 - x0;
    const double t = (x - x0) / h;
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * h * d0 + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * h * d1;
}

}  // namespace

double crossing_frequency(const std::vector<SCurvePoint>& points, double level) {
    if (points.size() < 2) throw Error(ErrorCode::RangeNotSpanned, "curve has fewer than two points");
    std::vector<double> x, y, w;
    for (const auto& p : points) {
        x.push_back(p.nu_d);
        y.push_back(p.p_s);
        w.push_back(p.n_pulses > 0 ? static_cast<double>(p.n_pulses) : 1.0);
    }
    for (std::size_t i = 1; i < x.size(); ++i) {
        if (!(x[i] > x[i - 1])) throw Error(ErrorCode::InvalidParameter, "curve grid must be strictly increasing");
    }
    // Work with a non-increasing sequence; flip increasing curves.
    const bool increasing = y.back() > y.front();
    double lv = level;
    if (increasing) {
        for (auto& v : y) v = 1.0 - v;
        lv = 1.0 - level;
    }
    const std::vector<double> q = isotonic_decreasing(y, w);
    if (!(q.front() >= lv && q.back() <= lv)) {
        std::ostringstream msg;
        msg << "curve does not cross the level " << level;
        throw Error(ErrorCode::RangeNotSpanned, msg.str());
    }
    const std::vector<double> d = pchip_slopes(x, q);
    for (std::size_t k = 0; k + 1 < x.size(); ++k) {
        if (!(q[k] >= lv && q[k + 1] <= lv) || q[k] == q[k + 1]) continue;
        double a = x[k], b = x[k + 1];
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (a + b);
            if (hermite(x[k], x[k + 1], q[k], q[k + 1], d[k], d[k + 1], mid) > lv) a = mid; else b = mid;
            if (b - a <= 1e-15 * std::max(std::abs(a), 1.0)) break;
        }
        return 0.5 * (a + b);
    }
    // The level equals a flat stretch at one end of the data.
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (q[k] == lv) return x[k];
    }
    throw Error(ErrorCode::RangeNotSpanned, "no crossing found");
}

double width_10_90(const std::vector<SCurvePoint>& points) {
    return std::abs(crossing_frequency(points, 0.9) - crossing_frequency(points, 0.1));
}

double width_10_90(const SCurve& curve) { return width_10_90(curve.points); }

SCurve make_curve(const std::vector<double>& nu, const std::vector<double>& p, std::size_t n_pulses) {
    if (nu.size() != p.size()) throw Error(ErrorCode::InvalidParameter, "grid and probabilities differ in size");
    SCurve c;
    for (std::size_t i = 0; i < nu.size(); ++i) {
        SCurvePoint pt;
        pt.nu_d = nu[i];
        pt.p_s = p[i];
        pt.n_pulses = n_pulses;
        if (n_pulses > 0) {
            pt.switches = static_cast<std::size_t>(std::llround(p[i] * static_cast<double>(n_pulses)));
            const auto ci = clopper_pearson(pt.switches, n_pulses);
            pt.ci_low = ci.low;
            pt.ci_high = ci.high;
        }
        c.points.push_back(pt);
    }
    try {
        c.width_10_90 = width_10_90(c);
        c.nu_50 = crossing_frequency(c.points, 0.5);
    } catch (const Error&) {
        c.width_10_90 = std::numeric_limits<double>::quiet_NaN();
        c.nu_50 = std::numeric_limits<double>::quiet_NaN();
    }
    return c;
}

SCurve s_curve(const std::vector<double>& grid, const PulseSpec& pulse_template, const ModeSpectrum& spectrum,
               const ThermalEnvironment& env, const NoiseSpec& noise, const AcquisitionOptions& options,
               std::size_t curve_index) {
    if (grid.size() < 2) throw Error(ErrorCode::GridTooNarrow, "grid needs at least two frequencies");
    if (!std::is_sorted(grid.begin(), grid.end())) throw Error(ErrorCode::InvalidParameter, "grid must be sorted");
    SCurve c;
    c.curve_index = curve_index;
    c.flux_offset = curve_flux_offset(noise, options.master_seed, curve_index).value_or(0.0);
    double p_min = 1.0, p_max = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        PulseSpec pulse = pulse_template;
        pulse.nu_d = grid[i];
        const auto est = switching_probability(pulse, spectrum, env, noise, options, curve_index, i);
        c.points.push_back({grid[i], est.p_s, est.n_pulses, est.switches, est.ci.low, est.ci.high});
        p_min = std::min(p_min, est.p_s);
        p_max = std::max(p_max, est.p_s);
    }
    if (!(p_min < 0.05 && p_max > 0.95)) {
        std::ostringstream msg;
        msg << "switching probability spans only [" << p_min << ", " << p_max << "]";
        throw Error(ErrorCode::GridTooNarrow, msg.str());
    }
    c.width_10_90 = width_10_90(c);
    c.nu_50 = crossing_frequency(c.points, 0.5);
    return c;
}

SCurve average_curves(const std::vector<SCurve>& curves) {
    if (curves.empty()) throw Error(ErrorCode::InvalidParameter, "no curves to average");
    SCurve avg;
    const std::size_t m = curves.front().points.size();
    for (const auto& c : curves) {
        if (c.points.size() != m) throw Error(ErrorCode::InvalidParameter, "curves use different grids");
    }
    for (std::size_t i = 0; i < m; ++i) {
        SCurvePoint pt;
        pt.nu_d = curves.front().points[i].nu_d;
        double sum = 0.0;
        for (const auto& c : curves) {
            if (c.points[i].nu_d != pt.nu_d) throw Error(ErrorCode::InvalidParameter, "curves use different grids");
            sum += c.points[i].p_s;
            pt.n_pulses += c.points[i].n_pulses;
            pt.switches += c.points[i].switches;
        }
        pt.p_s = sum / static_cast<double>(curves.size());
        if (pt.n_pulses > 0) {
            const auto ci = clopper_pearson(pt.switches, pt.n_pulses);
            pt.ci_low = ci.low;
            pt.ci_high = ci.high;
        }
        avg.points.push_back(pt);
    }
    avg.width_10_90 = width_10_90(avg);
    avg.nu_50 = crossing_frequency(avg.points, 0.5);
    return avg;
}

CurveSetSummary summarize_curves(const std::vector<SCurve>& curves, std::uint64_t seed, std::size_t bootstrap) {
    if (curves.size() < 2) throw Error(ErrorCode::InvalidParameter, "need at least two curves");
    CurveSetSummary s;
    const SCurve avg = average_curves(curves);
    s.averaged_width = avg.width_10_90;

    std::vector<double> widths, nu50;
    for (const auto& c : curves) {
        widths.push_back(width_10_90(c));
        nu50.push_back(crossing_frequency(c.points, 0.5));
    }
    auto mean_sd = [](const std::vector<double>& v) {
        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        return std::pair{mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
    };
    std::tie(s.mean_single_width, s.sd_single_width) = mean_sd(widths);
    const auto [nu50_mean, nu50_sd] = mean_sd(nu50);
    s.nu50_sd = nu50_sd;

    // Per-curve pulse count at each point.
    std::vector<std::size_t> n_per_point;
    for (const auto& p : curves.front().points) n_per_point.push_back(std::max<std::size_t>(p.n_pulses, 1));
    std::mt19937_64 rng(seed);
    std::vector<double> boot;
    boot.reserve(bootstrap);
    std::vector<SCurvePoint> pts = avg.points;
    for (std::size_t b = 0; b < bootstrap; ++b) {
        for (std::size_t i = 0; i < pts.size(); ++i) {
            std::binomial_distribution<std::size_t> draw(n_per_point[i], std::clamp(avg.points[i].p_s, 0.0, 1.0));
            pts[i].n_pulses = n_per_point[i];
            pts[i].p_s = static_cast<double>(draw(rng)) / static_cast<double>(n_per_point[i]);
        }
        try {
            boot.push_back(crossing_frequency(pts, 0.5));
        } catch (const Error&) {
        }
    }
    if (boot.size() < 2) throw Error(ErrorCode::RangeNotSpanned, "bootstrap curves do not cross 0.5");
    s.nu50_binomial_sd = mean_sd(boot).second;
    s.dof = curves.size() - 1;
    double chi2 = 0.0;
    for (double v : nu50) chi2 += (v - nu50_mean) * (v - nu50_mean);
    s.chi_square = s.nu50_binomial_sd > 0.0 ? chi2 / (s.nu50_binomial_sd * s.nu50_binomial_sd)
                                            : std::numeric_limits<double>::infinity();
    const boost::math::chi_squared_distribution<double> dist(static_cast<double>(s.dof));
    s.p_value = std::isfinite(s.chi_square) ? boost::math::cdf(boost::math::complement(dist, s.chi_square)) : 0.0;
    return s;
}

}  // namespace kerrsim
