#include "kerrsim/operating_point.hpp"

#include <algorithm>

#include "kerrsim/error.hpp"

namespace kerrsim {

OperatingPoint make_operating_point(const CircuitParams& params, const OperatingPointSpec& spec) {
    params.validate();
    if (std::find(spec.modes.begin(), spec.modes.end(), spec.mode) == spec.modes.end()) {
        throw Error(ErrorCode::InvalidParameter, "the amplifier mode must be in the mode list");
    }
    OperatingPoint op;
    op.spectrum = kerr_coefficients(params, FluxPoint{spec.flux}, spec.modes, spec.linewidths);
    op.mode = amplifier_mode(op.spectrum, spec.mode, spec.coupling_fraction);
    op.env = thermal_environment(spec.temperature, op.mode.nu);
    if (spec.detuning > 0.0) {
        op.detuning = spec.detuning;
    } else {
        const auto reference_env = thermal_environment(spec.reference_temperature, op.mode.nu);
        op.detuning = dykman_reference_detuning(op.spectrum, reference_env, spec.reference_fraction, spec.mode);
    }
    op.photon_flux = photon_flux_for_strength(op.mode, strength_for_switching_detuning(op.mode, op.detuning));
    op.nu_switch = op.mode.nu + op.detuning;
    return op;
}

std::vector<double> scurve_grid(const ActivationCurve& curve, std::size_t points, double stretch, double margin,
                                 double edge) {
    if (points < 2) throw Error(ErrorCode::InvalidParameter, "grid needs at least two points");
    const double a = curve.frequency_at(1.0 - edge);
    const double b = curve.frequency_at(edge);
    const double center = 0.5 * (a + b);
    const double half = 0.5 * std::abs(b - a) * stretch + margin;
    std::vector<double> grid(points);
    for (std::size_t i = 0; i < points; ++i) {
        grid[i] = center - half + 2.0 * half * static_cast<double>(i) / static_cast<double>(points - 1);
    }
    return grid;
}

}  // namespace kerrsim
