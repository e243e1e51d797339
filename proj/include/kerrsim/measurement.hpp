#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <vector>

#include "kerrsim/circuit_model.hpp"
#include "kerrsim/duffing.hpp"
#include "kerrsim/noise_spec.hpp"

namespace kerrsim {

/// Rise, measurement plateau and reduced-power latch plateau, then off until
/// the next repetition. Times in seconds.
struct PulseSpec {
    double nu_d = 0.0;
    double plateau_power = 0.0;         // photon flux on the measurement plateau
    double latch_power_fraction = 0.8;  // latch power / plateau power
    double t_rise = 0.0;
    double t_measure = 0.0;
    double t_latch = 0.0;
    double repetition_rate = 1e3;       // Hz

    double duration() const { return t_rise + t_measure + t_latch; }
    double off_time() const { return 1.0 / repetition_rate - duration(); }

    /// Throws InvalidParameter unless the off time is at least 10 / gamma.
    void validate(double gamma) const;
};

/// Rise 10/gamma, plateau 20/gamma, latch 100/gamma at 0.8 power.
PulseSpec default_pulse(const KerrMode& mode, double nu_d, double photon_flux);

/// Photon number left at the start of the next pulse when a pulse ends with `n_end`.
double pre_pulse_photons(const PulseSpec& pulse, const KerrMode& mode, double n_end);

/// Additive Gaussian noise on the homodyne quadrature, sigma^2 = noise_photons per sample.
struct DetectionSpec {
    double noise_photons = 20.0;
    double sample_interval = 0.0;  // s; 0 selects 0.5 / gamma
};

/// Quadrature axis and decision threshold derived from the two latch-power branches.
struct Discriminator {
    std::complex<double> low;       // low-branch amplitude at latch power
    std::complex<double> axis;      // unit vector from low toward high
    double separation = 0.0;        // |alpha_high - alpha_low|
    double threshold = 0.0;         // separation / 2 along the axis, relative to low
};

Discriminator make_discriminator(const KerrMode& mode, const PulseSpec& pulse);

struct HomodyneSample {
    double t = 0.0;
    double x = 0.0;  // quadrature relative to the low branch
};

struct PulseResult {
    bool switched = false;           // homodyne decision
    bool switched_dynamics = false;  // photon-number criterion during the plateau
    double latch_mean = 0.0;         // averaged quadrature in the latch window
    std::vector<HomodyneSample> trace;
};

/// Fidelity of the latch-window decision for Gaussian detection noise,
/// Phi(d / 2) with d the branch separation over the averaged noise.
double discrimination_fidelity(const KerrMode& mode, const PulseSpec& pulse, const DetectionSpec& detection);

PulseResult run_pulse(const PulseSpec& pulse, const ModeSpectrum& spectrum, const ThermalEnvironment& env,
                      const NoiseSpec& noise, std::uint64_t seed, const DetectionSpec& detection = {},
                      std::optional<double> shared_flux = std::nullopt, bool record_trace = false,
                      int mode_index = 3, double coupling_fraction = 0.5);

struct BinomialInterval {
    double low = 0.0;
    double high = 1.0;
};

/// Exact (Clopper-Pearson) interval at the given confidence.
BinomialInterval clopper_pearson(std::size_t k, std::size_t n, double confidence = 0.95);

/// analytic: Bernoulli draws from the activation curve of each pulse's noise
/// realization. trajectory: photon-number decision on the plateau only.
/// pulse: full pulse with homodyne decision.
enum class Engine { analytic, trajectory, pulse };

struct AcquisitionOptions {
    Engine engine = Engine::analytic;
    std::size_t n_pulses = 1000;
    std::uint64_t master_seed = 1;
    unsigned jobs = 0;
    SwitchingCalibration calibration;
    DetectionSpec detection;
    double dt = 0.0;  // trajectory and pulse engines; 0 selects max_time_step
    int mode = 3;
    double coupling_fraction = 0.5;
};

struct ProbabilityEstimate {
    double p_s = 0.0;
    std::size_t switches = 0;
    std::size_t n_pulses = 0;
    BinomialInterval ci;
};

/// Seeds depend only on (master_seed, curve, point, pulse).
std::uint64_t pulse_seed(std::uint64_t master_seed, std::uint64_t curve, std::uint64_t point, std::uint64_t pulse);

/// Quasi-static flux shared by a whole curve (per_curve policy), else nullopt.
std::optional<double> curve_flux_offset(const NoiseSpec& noise, std::uint64_t master_seed, std::uint64_t curve);

ProbabilityEstimate switching_probability(const PulseSpec& pulse, const ModeSpectrum& spectrum,
                                          const ThermalEnvironment& env, const NoiseSpec& noise,
                                          const AcquisitionOptions& options, std::uint64_t curve = 0,
                                          std::uint64_t point = 0);

struct SCurvePoint {
    double nu_d = 0.0;
    double p_s = 0.0;
    std::size_t n_pulses = 0;
    std::size_t switches = 0;
    double ci_low = 0.0;
    double ci_high = 1.0;
};

struct SCurve {
    std::vector<SCurvePoint> points;
    double width_10_90 = 0.0;
    double nu_50 = 0.0;
    std::size_t curve_index = 0;
    double flux_offset = 0.0;  // shared offset of this curve, Phi0
};

/// Level crossings of a monotone interpolant through the isotonic regression
/// of the points. Throws RangeNotSpanned.
double crossing_frequency(const std::vector<SCurvePoint>& points, double level);
double width_10_90(const std::vector<SCurvePoint>& points);
double width_10_90(const SCurve& curve);

/// Builds an SCurve from (nu, p) samples, e.g. for fitting or tests.
SCurve make_curve(const std::vector<double>& nu, const std::vector<double>& p, std::size_t n_pulses = 0);

/// One curve over `grid` (sorted). Throws GridTooNarrow unless the estimates
/// reach below 0.05 and above 0.95.
SCurve s_curve(const std::vector<double>& grid, const PulseSpec& pulse_template, const ModeSpectrum& spectrum,
               const ThermalEnvironment& env, const NoiseSpec& noise, const AcquisitionOptions& options,
               std::size_t curve_index = 0);

/// Pointwise average; counts are pooled for the intervals.
SCurve average_curves(const std::vector<SCurve>& curves);

struct CurveSetSummary {
    double averaged_width = 0.0;     // width of the averaged curve
    double mean_single_width = 0.0;  // mean of the single-curve widths
    double sd_single_width = 0.0;
    double nu50_sd = 0.0;            // observed curve-to-curve scatter
    double nu50_binomial_sd = 0.0;   // expected from counting statistics alone
    double chi_square = 0.0;
    std::size_t dof = 0;
    double p_value = 1.0;            // upper tail of chi^2(dof)
};

/// Compares the nu_50 scatter with a parametric bootstrap of binomial noise
/// around the averaged curve.
CurveSetSummary summarize_curves(const std::vector<SCurve>& curves, std::uint64_t seed,
                                 std::size_t bootstrap = 2000);

}  // namespace kerrsim
