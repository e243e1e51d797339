#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "kerrsim/circuit_model.hpp"
#include "kerrsim/duffing.hpp"
#include "kerrsim/fitting.hpp"
#include "kerrsim/noise_spec.hpp"

namespace kerrsim {

/// z(0.9) - z(0.1) for the standard normal: 10-90 width of a Gaussian per unit RMS.
double gaussian_10_90_factor();

/// One quasi-static flux offset (Phi0).
double sample_quasistatic_flux(const NoiseSpec& noise, std::uint64_t seed);

/// Offsets for `n_pulses` pulses of one curve: a single shared draw under
/// per_curve, independent draws under per_pulse.
std::vector<double> sample_quasistatic_flux(const NoiseSpec& noise, std::uint64_t seed, std::size_t n_pulses);

/// d nu_n / d(Phi/Phi0) and its second derivative by central differences.
double flux_slope(const CircuitParams& params, FluxPoint flux, int n = 3);
double flux_curvature(const CircuitParams& params, FluxPoint flux, int n = 3);

/// Delta S(Phi) = Delta S_0 + c_g |d nu_n / d Phi| sigma_Phi.
double broadened_width(const CircuitParams& params, FluxPoint flux, double intrinsic_width,
                       const NoiseSpec& noise, int n = 3);

/// 10-90 spread of the quadratic shift nu''/2 dPhi^2 with dPhi ~ N(0, sigma).
double second_order_width(const CircuitParams& params, FluxPoint flux, double sigma_flux, int n = 3);

struct JitterContribution {
    double amplitude = 0.0;  // Hz, 10-90 equivalent
    double frequency = 0.0;  // Hz, 10-90 equivalent
    double jitter = 0.0;     // Hz, both in quadrature
    double total = 0.0;      // Hz, jitter and intrinsic in quadrature
};

/// Amplitude jitter moves the switching point by 2F d nu_sw / dF per unit
/// relative amplitude; frequency jitter shifts it one to one.
JitterContribution drive_jitter_contribution(const KerrMode& mode, double photon_flux, const NoiseSpec& noise,
                                             double intrinsic_width);

double combine_quadrature(const std::vector<double>& widths);

/// 10-90 width of the curve averaged over a Gaussian shift of the switching
/// point with RMS `sigma_nu` (Hz).
double convolved_width(const ActivationCurve& curve, double sigma_nu);

/// Fits Delta S(Phi) = Delta S_0 + c_g |d nu / d Phi| sigma_Phi to (flux, width)
/// points. Parameters: "delta_s0" (Hz), "sigma_flux" (Phi0).
FitResult fit_flux_noise(const CircuitParams& params, const std::vector<std::pair<double, double>>& points,
                         int n = 3);

}  // namespace kerrsim
