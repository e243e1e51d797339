#pragma once

#include <vector>

#include "kerrsim/circuit_model.hpp"
#include "kerrsim/duffing.hpp"

namespace kerrsim {

struct OperatingPointSpec {
    double flux = 0.0;                      // Phi / Phi0
    double temperature = 0.008;             // K
    double detuning = 0.0;                  // Hz, switching detuning; 0 selects the width-law reference
    double reference_fraction = 0.5e-6;     // Delta S / nu defining the reference detuning
    double reference_temperature = 0.008;   // K, temperature at which the reference is taken
    int mode = 3;
    double coupling_fraction = 0.5;
    std::vector<int> modes{1, 2, 3, 4, 5, 7, 9};
    Linewidths linewidths;
};

/// Spectrum, thermal bath and the drive power whose switching detuning equals
/// the requested one.
struct OperatingPoint {
    ModeSpectrum spectrum;
    KerrMode mode;
    ThermalEnvironment env;
    double detuning = 0.0;     // Hz
    double photon_flux = 0.0;  // photons / s
    double nu_switch = 0.0;    // Hz
};

OperatingPoint make_operating_point(const CircuitParams& params, const OperatingPointSpec& spec);

/// Evenly spaced drive frequencies covering P_s from `edge` to 1 - edge of
/// `curve`, widened by `stretch` about the midpoint and by `margin` Hz per side.
std::vector<double> scurve_grid(const ActivationCurve& curve, std::size_t points, double stretch = 1.0,
                                double margin = 0.0, double edge = 0.002);

}  // namespace kerrsim
