#pragma once

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <vector>

#include "kerrsim/circuit_model.hpp"
#include "kerrsim/noise_spec.hpp"

namespace kerrsim {

/// Single driven Kerr mode in the rotating frame of the drive.
struct KerrMode {
    int index = 3;
    double nu = 0.0;         // Hz
    double gamma = 0.0;      // Hz, FWHM
    double kerr = 0.0;       // Hz, self-Kerr K; the mode shifts by 2K per photon
    double gamma_ext = 0.0;  // Hz, coupling to the input port
};

KerrMode amplifier_mode(const ModeSpectrum& spectrum, int n = 3, double coupling_fraction = 0.5);

struct DriveSpec {
    double nu_d = 0.0;         // Hz
    double photon_flux = 0.0;  // photons / s at the input port
    double duration = 1.0;     // s

    void validate() const;
};

/// Squared drive amplitude F (photons / s^2) entering the amplitude equation
/// d alpha/dt = ... - i sqrt(F), with F = 2 pi gamma_ext * photon_flux.
double drive_strength(const KerrMode& mode, double photon_flux);
double photon_flux_for_strength(const KerrMode& mode, double strength);

enum class Stability { stable, unstable };

struct Branch {
    double photon_number = 0.0;
    Stability stability = Stability::stable;
};

/// Roots of n [(2 pi (dnu - 2 K n))^2 + (pi gamma)^2] = F, sorted by photon number.
struct SteadyState {
    std::vector<Branch> branches;
    bool degenerate_root = false;

    bool bistable() const { return branches.size() == 3; }
    double low() const { return branches.front().photon_number; }
    double high() const { return branches.back().photon_number; }
    double unstable() const;
};

SteadyState steady_state(const KerrMode& mode, double detuning, double strength);
SteadyState steady_state(const ModeSpectrum& spectrum, const DriveSpec& drive, int n = 3,
                         double coupling_fraction = 0.5);

/// Complex amplitude of a steady state with the given photon number.
std::complex<double> branch_amplitude(const KerrMode& mode, double detuning, double strength,
                                      double photon_number);

struct ThermalEnvironment {
    double temperature = 0.0;  // K
    double t_eff = 0.0;        // K
    double n_eff = 0.5;        // k_B T_eff / (h nu)
};

/// (h nu / 2 k_B) coth(h nu / 2 k_B T); the T = 0 limit is h nu / 2 k_B.
double effective_temperature(double temperature, double nu);
double crossover_temperature(double nu);
ThermalEnvironment thermal_environment(double temperature, double nu);

struct BistabilityRegion {
    double critical_detuning = 0.0;      // Hz, (sqrt(3)/2) gamma
    double onset_photon_number = 0.0;    // in the amplitude-equation convention
    double onset_strength = 0.0;         // F at the onset
    double convention_constant = 0.0;    // critical_photon_number / onset_photon_number
};

/// Bistability of a mode with K > 0. Throws NonpositiveKerr otherwise.
BistabilityRegion bistability_region(const KerrMode& mode);

struct SpinodalStrengths {
    double lower = 0.0;  // below: only the low branch
    double upper = 0.0;  // above: only the high branch
};

/// Drive-strength interval of bistability at a detuning beyond the critical one.
SpinodalStrengths spinodal_strengths(const KerrMode& mode, double detuning);

/// Detuning at which the low branch disappears for a fixed drive strength:
/// the switching point of a frequency sweep. Throws BelowBifurcation.
double switching_detuning(const KerrMode& mode, double strength);

/// Detuning at which the high branch disappears for a fixed drive strength.
double retrapping_detuning(const KerrMode& mode, double strength);

/// Strength whose switching detuning equals `detuning`.
double strength_for_switching_detuning(const KerrMode& mode, double detuning);

/// Width law for the S-curve, returned as Delta S / nu_3:
/// 3^(2/3)/4 (beta^2/N)^(2/3) (k_B T_eff / E_j)^(2/3) (dnu / nu_3)^(1/3).
double dykman_width(const ModeSpectrum& spectrum, const ThermalEnvironment& env, double delta_nu,
                    int n = 3);

/// Detuning at which dykman_width equals `target_fraction`.
double dykman_reference_detuning(const ModeSpectrum& spectrum, const ThermalEnvironment& env,
                                 double target_fraction, int n = 3);

/// Constants of the activation-law switching model. The width scale is a
/// multiplier on the width-law prediction; 1 reproduces it exactly.
struct SwitchingCalibration {
    double width_scale = 1.0;
    double attempt_rate_over_gamma = 1.0;
    double barrier = 1.0;
    double exponent = 1.5;
};

/// P_s(nu_d) = 1 - exp(-Gamma t) with Gamma = nu_a exp(-b (x / w)^exponent),
/// x the distance from the switching point on the metastable side. P_s = 1
/// past the switching point.
struct ActivationCurve {
    double nu_switch = 0.0;        // Hz
    double scale = 1.0;            // w, Hz
    double attempt_product = 1.0;  // nu_a * t
    double barrier = 1.0;
    double exponent = 1.5;
    int direction = 1;             // +1: metastable for nu_d > nu_switch

    double operator()(double nu_d) const;
    double width_10_90() const;
    /// Drive frequency at which P_s equals p (0 < p < 1).
    double frequency_at(double p) const;
};

/// width_10_90 / w for the activation form.
double activation_width_factor(double attempt_product, double barrier = 1.0, double exponent = 1.5);

ActivationCurve activation_curve(const ModeSpectrum& spectrum, const ThermalEnvironment& env,
                                 double photon_flux, double pulse_duration,
                                 const SwitchingCalibration& calibration = {}, int n = 3,
                                 double coupling_fraction = 0.5);

double switching_probability_analytic(const ModeSpectrum& spectrum, const ThermalEnvironment& env,
                                      const DriveSpec& drive, double pulse_duration,
                                      const SwitchingCalibration& calibration = {}, int n = 3,
                                      double coupling_fraction = 0.5);

/// Width scale that makes the analytic 10-90 width equal `target_width` (Hz)
/// at the given drive; `target_width <= 0` keeps the width law.
SwitchingCalibration calibrate_switching(const ModeSpectrum& spectrum, const ThermalEnvironment& env,
                                         double photon_flux, double pulse_duration,
                                         double target_width, SwitchingCalibration base = {},
                                         int n = 3, double coupling_fraction = 0.5);

// ---------------------------------------------------------------------------
// Stochastic trajectories

enum class InitialState { vacuum, low_branch };

struct TrajectoryOptions {
    double dt = 0.0;               // s; 0 selects max_time_step
    double t_max = 0.0;            // s; 0 uses drive.duration
    double dwell_linewidths = 5.0; // dwell above the branch midpoint, in units of 1/gamma
    InitialState initial = InitialState::low_branch;
    bool record = false;
    std::size_t record_stride = 1;
    int mode = 3;
    double coupling_fraction = 0.5;
    std::optional<double> flux_offset;  // shared quasi-static offset (per-curve policy)
};

struct TrajectoryPoint {
    double t = 0.0;
    double re_alpha = 0.0;
    double im_alpha = 0.0;
    double n_photons = 0.0;
};

struct TrajectoryResult {
    std::vector<TrajectoryPoint> trajectory;
    bool switched = false;
    double switch_time = 0.0;  // NaN when not switched
    double dt = 0.0;
    NoiseRealization noise;
};

/// Largest admissible step: min(0.02/gamma, 0.5 / (2 pi |detuning|)).
double max_time_step(const KerrMode& mode, double detuning);

/// RK4 for the drift with an additive complex Gaussian increment per step.
/// The increment has E|dW|^2 = 2 pi gamma n_eff dt, so a linear mode
/// thermalizes to <|alpha|^2> = n_eff.
class KerrStepper {
public:
    KerrStepper(const KerrMode& mode, double detuning, double n_eff, double dt);

    void step(std::complex<double>& alpha, double drive_amplitude, std::mt19937_64& rng);
    void step_deterministic(std::complex<double>& alpha, double drive_amplitude) const;

    double dt() const { return dt_; }

private:
    std::complex<double> drift(std::complex<double> alpha, double drive_amplitude) const;

    double omega_;      // 2 pi detuning
    double chi_;        // 2 pi * 2K
    double half_kappa_; // pi gamma
    double dt_;
    double noise_sd_;   // per quadrature
    std::normal_distribution<double> normal_;
};

/// Draws one realization of every noise source. Flux noise is replaced by
/// `shared_flux` when given.
NoiseRealization draw_noise(const NoiseSpec& noise, std::mt19937_64& rng,
                            std::optional<double> shared_flux = std::nullopt);

/// Mode frequency including flux and excess offsets.
KerrMode shifted_mode(const KerrMode& mode, const ModeSpectrum& spectrum,
                      const NoiseRealization& realization);

/// Photon-number thresholds used to declare a switch.
struct SwitchThresholds {
    double unstable = 0.0;
    double midpoint = 0.0;
    bool low_branch_exists = true;
    double low = 0.0;
};

SwitchThresholds switch_thresholds(const KerrMode& mode, double detuning, double strength);

TrajectoryResult simulate_trajectory(const ModeSpectrum& spectrum, const ThermalEnvironment& env,
                                     const DriveSpec& drive, const NoiseSpec& noise,
                                     std::uint64_t seed, const TrajectoryOptions& options = {});

struct EnsembleResult {
    std::size_t trials = 0;
    std::size_t switches = 0;
    double fraction() const { return trials ? static_cast<double>(switches) / trials : 0.0; }
};

/// `trials` independent trajectories with seeds derive_seed(master_seed, stream, i).
EnsembleResult switching_ensemble(const ModeSpectrum& spectrum, const ThermalEnvironment& env,
                                  const DriveSpec& drive, const NoiseSpec& noise,
                                  std::uint64_t master_seed, std::size_t trials,
                                  const TrajectoryOptions& options = {}, unsigned jobs = 0,
                                  std::uint64_t stream = 0);

/// CSV with header t_s,re_alpha,im_alpha,n_photons.
void write_trajectory_csv(std::ostream& out, const TrajectoryResult& result);

}  // namespace kerrsim
