#pragma once

#include <vector>

#include "kerrsim/analysis.hpp"
#include "kerrsim/measurement.hpp"

namespace kerrsim {

/// Largest K_n * n / gamma_n accepted as linear response.
inline constexpr double linearity_limit = 0.1;

/// Mean photon number of mode n under a weak CW probe:
/// n_peak (g/2)^2 / ((nu - nu_n)^2 + (g/2)^2), n_peak = probe_power / (pi g_n)
/// for a symmetric two-port. Throws LinearityViolated.
double coupled_mode_occupation(const ModeSpectrum& spectrum, int n, double nu_probe, double probe_power,
                               double coupling_fraction = 0.5);

/// Shift of the amplifier mode, lambda_{3,n} * n_bar. UncoupledMode for even n.
double cross_kerr_shift(const ModeSpectrum& spectrum, int n, double n_bar, int amplifier = 3);

/// width / lambda_{3,n}. UncoupledMode for even n.
double photon_sensitivity(const ModeSpectrum& spectrum, double width, int n, int amplifier = 3);

/// Probe power whose on-resonance shift raises P_s from `bias_p` to `peak_p`
/// on the given activation curve.
double probe_power_for_peak(const ModeSpectrum& spectrum, int n, const ActivationCurve& curve, double bias_p,
                            double peak_p, int amplifier = 3, double coupling_fraction = 0.5);

struct SpectroscopyPoint {
    double nu_probe = 0.0;
    double p_s = 0.0;
    double ci_low = 0.0;
    double ci_high = 1.0;
    std::size_t n_pulses = 0;
};

struct SpectroscopyScan {
    int target_mode = 1;
    std::vector<double> probe_grid;
    double probe_power = 0.0;  // photons / s
    std::vector<SpectroscopyPoint> trace;
    double bias_before = 0.0;
    double bias_after = 0.0;
    bool fitted = false;       // false for even modes
    double fitted_center = 0.0;
    double fitted_center_sigma = 0.0;
    double fitted_width = 0.0;
    FitResult fit;
};

struct ScanOptions {
    double bias_target = 0.1;
    double bias_tolerance = 0.02;
    double drift_limit = 0.05;   // beyond counting noise
    std::size_t scan_index = 0;  // curve index used for seeding
};

/// Probe sweep with the amplifier biased by `bias`. Checks the bias before and
/// after (BiasDrift) and fits a Lorentzian to the trace of odd modes.
SpectroscopyScan run_scan(SpectroscopyScan scan, const PulseSpec& bias, const ModeSpectrum& spectrum,
                          const ThermalEnvironment& env, const NoiseSpec& noise, const AcquisitionOptions& options,
                          const ScanOptions& scan_options = {});

/// Evenly spaced probe frequencies over nu_n +- half_span_linewidths * gamma_n.
std::vector<double> probe_grid(const ModeSpectrum& spectrum, int n, std::size_t points,
                               double half_span_linewidths = 6.0);

struct ModeCenter {
    int mode = 1;
    double center = 0.0;  // Hz
    double sigma = 0.0;   // Hz, 0 for unweighted
};

struct BetaFit {
    FitResult fit;        // "nu1_bare", "ratio" (L_array / L_wg)
    double beta = 0.0;
    double beta_sigma = 0.0;
};

/// Fits the odd-mode condition cot(x) = r x, x = pi nu / (2 nu1_bare), to
/// measured mode centers; beta = r / (1 + r).
BetaFit extract_beta(const std::vector<ModeCenter>& centers, double nu1_guess, double ratio_guess = 0.03);

}  // namespace kerrsim
