#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kerrsim/circuit_model.hpp"
#include "kerrsim/duffing.hpp"
#include "kerrsim/measurement.hpp"
#include "kerrsim/noise_spec.hpp"
#include "kerrsim/operating_point.hpp"

namespace kerrsim {

/// Pulse timing in units of 1/gamma of the amplifier mode.
struct PulseShape {
    double rise = 10.0;
    double measure = 20.0;
    double latch = 100.0;
    double latch_power_fraction = 0.8;
    double repetition_rate = 1e3;  // Hz
};

struct RunSpec {
    std::uint64_t seed = 1;
    unsigned jobs = 0;  // 0: all hardware threads
    std::size_t n_pulses = 1000;
    Engine engine = Engine::analytic;
    double dt_over_gamma = 0.0;  // 0: automatic step
    double noise_photons = 20.0;
};

struct TuneSpec {
    double phi_min = 0.0;
    double phi_max = 0.45;
    std::size_t phi_points = 46;
    std::vector<int> modes{2, 3, 4};
};

struct ScurveSpec {
    std::size_t curves = 50;
    std::size_t points = 41;
    double stretch = 1.5;
    std::size_t bootstrap = 2000;
};

struct SpectroscopySpec {
    std::vector<int> modes{1, 5, 7, 9};
    std::vector<int> beta_modes{1, 5, 7};  // fitted centers used to re-extract beta
    std::size_t points = 41;
    double half_span_linewidths = 6.0;
    double bias_p = 0.1;
    double peak_p = 0.6;
    double probe_power = 0.0;  // photons / s; 0 targets peak_p
};

enum class SweepAxis { flux, temperature, power };

struct NoiseSweepSpec {
    SweepAxis axis = SweepAxis::flux;
    std::vector<double> values;  // empty: axis default (Phi0, K, or power relative to the operating point)
    bool monte_carlo = true;
    std::size_t mc_curves = 10;
    std::size_t mc_points = 31;
};

enum class FitKind { lorentzian, scurve, tuning, flux_noise };

struct FitSpec {
    FitKind kind = FitKind::lorentzian;
    std::string input;
    bool fit_exponent = false;
};

struct CalibrateSpec {
    double target_nu3 = 5.32e9;  // Hz
    double target_beta = 0.0254;
};

/// Everything a run depends on besides the master seed.
struct ExperimentConfig {
    CircuitParams device = reference_device();
    OperatingPointSpec operating_point;
    PulseShape pulse;
    NoiseSpec noise;
    SwitchingCalibration calibration;
    double target_width = 0.0;  // Hz; > 0 rescales the width law to this 10-90 width
    RunSpec run;
    TuneSpec tune;
    ScurveSpec scurve;
    SpectroscopySpec spectroscopy;
    NoiseSweepSpec noise_sweep;
    FitSpec fit;
    CalibrateSpec calibrate;

    /// Throws ConfigError on an inconsistent configuration.
    void validate() const;
};

/// INI text with sections; missing keys keep their defaults, unknown sections
/// or keys raise ConfigError.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// The configuration as INI text that parse_config reads back unchanged.
std::string dump_config(const ExperimentConfig& config);

SweepAxis parse_axis(const std::string& name);
std::string axis_name(SweepAxis axis);

}  // namespace kerrsim
