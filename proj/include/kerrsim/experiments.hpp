#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kerrsim/config.hpp"
#include "kerrsim/measurement.hpp"
#include "kerrsim/operating_point.hpp"

namespace kerrsim {

/// A file produced by a subcommand, relative to the output directory.
struct OutputFile {
    std::string name;
    std::string content;
};

using Outputs = std::vector<OutputFile>;

/// Operating point, pulse and acquisition settings derived from a config.
struct Setup {
    OperatingPoint op;
    PulseSpec pulse;            // nu_d at the switching point
    ActivationCurve curve;      // noiseless analytic S-curve
    AcquisitionOptions acquisition;
};

/// `calibration` overrides the width calibration (otherwise derived from the
/// config, including switching.target_width_kHz).
Setup make_setup(const ExperimentConfig& config, const OperatingPointSpec& spec,
                 std::optional<SwitchingCalibration> calibration = std::nullopt);
Setup make_setup(const ExperimentConfig& config);

/// Grid for one S-curve, widened to hold curves displaced by the configured noise.
std::vector<double> noisy_scurve_grid(const Setup& setup, const ExperimentConfig& config, std::size_t points,
                                      double stretch);

Outputs cmd_tune(const ExperimentConfig& config);
Outputs cmd_scurve(const ExperimentConfig& config);
Outputs cmd_spectroscopy(const ExperimentConfig& config);
Outputs cmd_noise_sweep(const ExperimentConfig& config);
Outputs cmd_fit(const ExperimentConfig& config);
Outputs cmd_calibrate(const ExperimentConfig& config);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Index of the first header among `names`, or nullopt.
    std::optional<std::size_t> column(const std::vector<std::string>& names) const;
};

/// Comma-separated values; blank lines and lines starting with '#' are skipped.
CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::string& path);

/// Deterministic number formatting used in every CSV.
std::string format_number(double value);

}  // namespace kerrsim
