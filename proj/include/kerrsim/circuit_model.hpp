#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include <Eigen/Dense>

namespace kerrsim {

/// Reduced flux Phi/Phi0. Every flux-dependent quantity is periodic with
/// period 1 and even in the flux.
struct FluxPoint {
    double phi_reduced = 0.0;

    /// Representative in [-0.5, 0.5].
    double wrapped() const;
};

/// Static device description. The waveguide is a half-wave line whose bare
/// fundamental is `nu1_bare`; its total inductance follows from the line
/// impedance as L_wg = Z0 / (2 nu1_bare).
struct CircuitParams {
    int n_squids = 7;
    double i_c = 6.72e-6;            // A, single-SQUID critical current at zero flux
    double c_end = 7e-12;            // F
    double nu1_bare = 1.8e9;         // Hz
    double z0 = 50.0;                // Ohm
    double areal_dispersion = 0.04;  // stored only, see array_inductance_spread

    double l_wg() const { return z0 / (2.0 * nu1_bare); }

    /// Throws InvalidParameter on a violated invariant (including beta(0) >= 0.1).
    void validate() const;
};

/// Linewidths (FWHM, Hz) per mode. Modes without an explicit entry scale from
/// the reference mode at constant quality factor.
struct Linewidths {
    int reference_mode = 3;
    std::map<int, double> fwhm{{3, 212e3}};

    double for_mode(int n, double nu_n, double nu_reference) const;
};

struct ModeSpectrum {
    std::vector<int> modes;
    std::vector<double> frequencies;   // Hz
    std::vector<double> linewidths;    // Hz, FWHM
    std::vector<double> self_kerr;     // Hz
    Eigen::MatrixXd cross_kerr;        // Hz, symmetric, zero diagonal
    std::vector<double> frequency_slope;      // d nu_n / d(Phi/Phi0), Hz
    std::vector<double> frequency_curvature;  // d^2 nu_n / d(Phi/Phi0)^2, Hz
    double beta = 0.0;
    double e_j = 0.0;                  // J, single SQUID
    int n_squids = 1;
    double z0 = 0.0;
    FluxPoint flux;

    std::size_t index_of(int n) const;  // throws InvalidParameter if absent
    bool contains(int n) const;
    double frequency(int n) const { return frequencies[index_of(n)]; }
    double linewidth(int n) const { return linewidths[index_of(n)]; }
    double kerr(int n) const { return self_kerr[index_of(n)]; }
    double cross(int n, int m) const { return cross_kerr(index_of(n), index_of(m)); }
};

inline constexpr double default_divergence_guard = 1e-6;

/// L_j = Phi0 / (2 pi i_c |cos(pi Phi/Phi0)|).
double josephson_inductance(double i_c, FluxPoint flux, double eps_div = default_divergence_guard);

double array_inductance(const CircuitParams& params, FluxPoint flux);

/// Josephson energy of one SQUID, Phi0 i_c |cos| / (2 pi).
double josephson_energy(const CircuitParams& params, FluxPoint flux);

double beta(const CircuitParams& params, FluxPoint flux);

/// Resonance of mode n. Even modes have a current node at the array and sit at
/// n * nu1_bare. Odd modes solve cot(kl/2) = omega L_array / (2 Z0) on the
/// branch that reduces to the bare n-th mode as L_array -> 0.
double mode_frequency(const CircuitParams& params, int n, FluxPoint flux);

/// 2 pi Z0 / R_K, the largest admissible K_n / nu_n.
double kerr_ratio_bound(double z0);

ModeSpectrum kerr_coefficients(const CircuitParams& params, FluxPoint flux,
                               const std::vector<int>& modes,
                               const Linewidths& linewidths = {});

/// N_c = 2 gamma / (sqrt(3) K).
double critical_photon_number(double gamma, double k_self);

/// Adjusts nu1_bare and L_wg (through Z0) so that nu_3(0) and beta(0) hit the targets.
CircuitParams calibrate(const CircuitParams& start, double target_nu3, double target_beta);

/// The device anchored to the measured nu_3(0) = 5.32 GHz and beta(0) = 2.54 %.
CircuitParams reference_device();

/// Per-SQUID critical currents drawn with relative spread `areal_dispersion`,
/// for sensitivity studies. The array inductance is the series sum.
double array_inductance_spread(const CircuitParams& params, FluxPoint flux,
                               std::uint64_t seed);

}  // namespace kerrsim
