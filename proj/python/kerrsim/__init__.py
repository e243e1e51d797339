"""Kerr resonator bifurcation amplifier simulator.

Experiment functions take INI text (empty for defaults) and return a dict
mapping output file names to CSV text, matching the command-line tool.
"""

from ._kerrsim import (
    CircuitParams,
    KerrsimError,
    array_inductance,
    beta,
    calibrate,
    calibrate_device,
    critical_photon_number,
    default_config,
    effective_temperature,
    fit,
    kerr_coefficients,
    lorentzian_fit,
    mode_frequency,
    noise_sweep,
    normalize_config,
    reference_device,
    scurve,
    spectroscopy,
    tune,
    width_10_90,
)

__all__ = [
    "CircuitParams",
    "KerrsimError",
    "array_inductance",
    "beta",
    "calibrate",
    "calibrate_device",
    "critical_photon_number",
    "default_config",
    "effective_temperature",
    "fit",
    "kerr_coefficients",
    "lorentzian_fit",
    "mode_frequency",
    "noise_sweep",
    "normalize_config",
    "reference_device",
    "scurve",
    "spectroscopy",
    "tune",
    "width_10_90",
]
