#include "kerrsim/config.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "kerrsim/error.hpp"

namespace kerrsim {

namespace {

[[noreturn]] void bad(const std::string& key, const std::string& what) {
    throw Error(ErrorCode::ConfigError, key + ": " + what);
}

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

double to_double(const std::string& key, const std::string& text) {
    const std::string s = trim(text);
    double v = 0.0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size() || s.empty()) bad(key, "expected a number, got '" + text + "'");
    return v;
}

long long to_int(const std::string& key, const std::string& text) {
    const std::string s = trim(text);
    long long v = 0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size() || s.empty()) bad(key, "expected an integer, got '" + text + "'");
    return v;
}

std::size_t to_count(const std::string& key, const std::string& text) {
    const long long v = to_int(key, text);
    if (v < 0) bad(key, "must be >= 0");
    return static_cast<std::size_t>(v);
}

bool to_bool(const std::string& key, const std::string& text) {
    const std::string s = trim(text);
    if (s == "true" || s == "yes" || s == "on" || s == "1") return true;
    if (s == "false" || s == "no" || s == "off" || s == "0") return false;
    bad(key, "expected true or false, got '" + text + "'");
}

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, sep)) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<int> to_modes(const std::string& key, const std::string& text) {
    std::vector<int> modes;
    for (const auto& s : split(text, ',')) {
        const long long n = to_int(key, s);
        if (n < 1) bad(key, "mode indices start at 1");
        modes.push_back(static_cast<int>(n));
    }
    return modes;
}

std::vector<double> to_doubles(const std::string& key, const std::string& text) {
    std::vector<double> v;
    for (const auto& s : split(text, ',')) v.push_back(to_double(key, s));
    return v;
}

std::string num(double v) { return fmt::format("{:.15g}", v); }

template <class T>
std::string join(const std::vector<T>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + num(v[i]);
    return out;
}


Engine to_engine(const std::string& key, const std::string& s) {
    if (s == "analytic") return Engine::analytic;
    if (s == "trajectory") return Engine::trajectory;
    if (s == "pulse") return Engine::pulse;
    bad(key, "engine must be analytic, trajectory or pulse");
}

std::string engine_name(Engine e) {
    switch (e) {
        case Engine::analytic: return "analytic";
        case Engine::trajectory: return "trajectory";
        case Engine::pulse: return "pulse";
    }
    return "analytic";
}

FitKind to_fit_kind(const std::string& key, const std::string& s) {
    if (s == "lorentzian") return FitKind::lorentzian;
    if (s == "scurve") return FitKind::scurve;
    if (s == "tuning") return FitKind::tuning;
    if (s == "flux_noise") return FitKind::flux_noise;
    bad(key, "kind must be lorentzian, scurve, tuning or flux_noise");
}

std::string fit_kind_name(FitKind k) {
    switch (k) {
        case FitKind::lorentzian: return "lorentzian";
        case FitKind::scurve: return "scurve";
        case FitKind::tuning: return "tuning";
        case FitKind::flux_noise: return "flux_noise";
    }
    return "lorentzian";
}

struct Key {
    std::function<void(ExperimentConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

// Ordered (section, key) registry shared by the parser and the dumper.
const std::vector<std::pair<std::string, Key>>& registry() {
    using C = ExperimentConfig;
    using S = const std::string&;
    static const std::vector<std::pair<std::string, Key>> keys = {
        {"device.n_squids", {[](C& c, S k, S v) { c.device.n_squids = static_cast<int>(to_int(k, v)); },
                             [](const C& c) { return std::to_string(c.device.n_squids); }}},
        {"device.i_c_uA", {[](C& c, S k, S v) { c.device.i_c = to_double(k, v) * 1e-6; },
                           [](const C& c) { return num(c.device.i_c * 1e6); }}},
        {"device.z0_ohm", {[](C& c, S k, S v) { c.device.z0 = to_double(k, v); },
                           [](const C& c) { return num(c.device.z0); }}},
        {"device.nu1_bare_GHz", {[](C& c, S k, S v) { c.device.nu1_bare = to_double(k, v) * 1e9; },
                                 [](const C& c) { return num(c.device.nu1_bare * 1e-9); }}},
        {"device.c_end_pF", {[](C& c, S k, S v) { c.device.c_end = to_double(k, v) * 1e-12; },
                             [](const C& c) { return num(c.device.c_end * 1e12); }}},
        {"device.areal_dispersion", {[](C& c, S k, S v) { c.device.areal_dispersion = to_double(k, v); },
                                     [](const C& c) { return num(c.device.areal_dispersion); }}},
        {"device.gamma_per_mode_kHz",
         {[](C& c, S k, S v) {
              c.operating_point.linewidths.fwhm.clear();
              for (const auto& item : split(v, ',')) {
                  const auto parts = split(item, ':');
                  if (parts.size() != 2) bad(k, "expected mode:linewidth pairs");
                  const auto n = static_cast<int>(to_int(k, parts[0]));
                  c.operating_point.linewidths.fwhm[n] = to_double(k, parts[1]) * 1e3;
              }
          },
          [](const C& c) {
              std::string out;
              for (const auto& [n, g] : c.operating_point.linewidths.fwhm) {
                  out += (out.empty() ? "" : ", ") + fmt::format("{}:{:.15g}", n, g * 1e-3);
              }
              return out;
          }}},
        {"operating_point.flux", {[](C& c, S k, S v) { c.operating_point.flux = to_double(k, v); },
                                  [](const C& c) { return num(c.operating_point.flux); }}},
        {"operating_point.temperature_mK",
         {[](C& c, S k, S v) { c.operating_point.temperature = to_double(k, v) * 1e-3; },
          [](const C& c) { return num(c.operating_point.temperature * 1e3); }}},
        {"operating_point.detuning_kHz",
         {[](C& c, S k, S v) { c.operating_point.detuning = to_double(k, v) * 1e3; },
          [](const C& c) { return num(c.operating_point.detuning * 1e-3); }}},
        {"operating_point.reference_fraction_ppm",
         {[](C& c, S k, S v) { c.operating_point.reference_fraction = to_double(k, v) * 1e-6; },
          [](const C& c) { return num(c.operating_point.reference_fraction * 1e6); }}},
        {"operating_point.reference_temperature_mK",
         {[](C& c, S k, S v) { c.operating_point.reference_temperature = to_double(k, v) * 1e-3; },
          [](const C& c) { return num(c.operating_point.reference_temperature * 1e3); }}},
        {"operating_point.mode", {[](C& c, S k, S v) { c.operating_point.mode = static_cast<int>(to_int(k, v)); },
                                  [](const C& c) { return std::to_string(c.operating_point.mode); }}},
        {"operating_point.coupling_fraction",
         {[](C& c, S k, S v) { c.operating_point.coupling_fraction = to_double(k, v); },
          [](const C& c) { return num(c.operating_point.coupling_fraction); }}},
        {"operating_point.modes", {[](C& c, S k, S v) { c.operating_point.modes = to_modes(k, v); },
                                   [](const C& c) { return join(c.operating_point.modes); }}},
        {"pulse.rise_over_gamma", {[](C& c, S k, S v) { c.pulse.rise = to_double(k, v); },
                                   [](const C& c) { return num(c.pulse.rise); }}},
        {"pulse.measure_over_gamma", {[](C& c, S k, S v) { c.pulse.measure = to_double(k, v); },
                                      [](const C& c) { return num(c.pulse.measure); }}},
        {"pulse.latch_over_gamma", {[](C& c, S k, S v) { c.pulse.latch = to_double(k, v); },
                                    [](const C& c) { return num(c.pulse.latch); }}},
        {"pulse.latch_power_fraction", {[](C& c, S k, S v) { c.pulse.latch_power_fraction = to_double(k, v); },
                                        [](const C& c) { return num(c.pulse.latch_power_fraction); }}},
        {"pulse.repetition_rate_Hz", {[](C& c, S k, S v) { c.pulse.repetition_rate = to_double(k, v); },
                                      [](const C& c) { return num(c.pulse.repetition_rate); }}},
        {"noise.sigma_flux_uphi0", {[](C& c, S k, S v) { c.noise.sigma_flux = to_double(k, v) * 1e-6; },
                                    [](const C& c) { return num(c.noise.sigma_flux * 1e6); }}},
        {"noise.drive_amp_jitter", {[](C& c, S k, S v) { c.noise.drive_amp_jitter = to_double(k, v); },
                                    [](const C& c) { return num(c.noise.drive_amp_jitter); }}},
        {"noise.drive_freq_jitter_Hz", {[](C& c, S k, S v) { c.noise.drive_freq_jitter = to_double(k, v); },
                                        [](const C& c) { return num(c.noise.drive_freq_jitter); }}},
        {"noise.excess_freq_noise_Hz", {[](C& c, S k, S v) { c.noise.excess_freq_noise = to_double(k, v); },
                                        [](const C& c) { return num(c.noise.excess_freq_noise); }}},
        {"noise.resample",
         {[](C& c, S k, S v) {
              if (v == "per_curve") c.noise.resample = ResamplePolicy::per_curve;
              else if (v == "per_pulse") c.noise.resample = ResamplePolicy::per_pulse;
              else bad(k, "must be per_curve or per_pulse");
          },
          [](const C& c) {
              return std::string(c.noise.resample == ResamplePolicy::per_curve ? "per_curve" : "per_pulse");
          }}},
        {"switching.width_scale", {[](C& c, S k, S v) { c.calibration.width_scale = to_double(k, v); },
                                   [](const C& c) { return num(c.calibration.width_scale); }}},
        {"switching.attempt_rate_over_gamma",
         {[](C& c, S k, S v) { c.calibration.attempt_rate_over_gamma = to_double(k, v); },
          [](const C& c) { return num(c.calibration.attempt_rate_over_gamma); }}},
        {"switching.barrier", {[](C& c, S k, S v) { c.calibration.barrier = to_double(k, v); },
                               [](const C& c) { return num(c.calibration.barrier); }}},
        {"switching.exponent", {[](C& c, S k, S v) { c.calibration.exponent = to_double(k, v); },
                                [](const C& c) { return num(c.calibration.exponent); }}},
        {"switching.target_width_kHz", {[](C& c, S k, S v) { c.target_width = to_double(k, v) * 1e3; },
                                        [](const C& c) { return num(c.target_width * 1e-3); }}},
        {"run.seed", {[](C& c, S k, S v) {
                          const std::string s = trim(v);
                          std::uint64_t x = 0;
                          const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
                          if (ec != std::errc() || end != s.data() + s.size() || s.empty()) bad(k, "expected a u64");
                          c.run.seed = x;
                      },
                      [](const C& c) { return std::to_string(c.run.seed); }}},
        {"run.jobs", {[](C& c, S k, S v) { c.run.jobs = static_cast<unsigned>(to_count(k, v)); },
                      [](const C& c) { return std::to_string(c.run.jobs); }}},
        {"run.n_pulses", {[](C& c, S k, S v) { c.run.n_pulses = to_count(k, v); },
                          [](const C& c) { return std::to_string(c.run.n_pulses); }}},
        {"run.engine", {[](C& c, S k, S v) { c.run.engine = to_engine(k, trim(v)); },
                        [](const C& c) { return engine_name(c.run.engine); }}},
        {"run.dt_over_gamma", {[](C& c, S k, S v) { c.run.dt_over_gamma = to_double(k, v); },
                               [](const C& c) { return num(c.run.dt_over_gamma); }}},
        {"run.noise_photons", {[](C& c, S k, S v) { c.run.noise_photons = to_double(k, v); },
                               [](const C& c) { return num(c.run.noise_photons); }}},
        {"tune.phi_min", {[](C& c, S k, S v) { c.tune.phi_min = to_double(k, v); },
                          [](const C& c) { return num(c.tune.phi_min); }}},
        {"tune.phi_max", {[](C& c, S k, S v) { c.tune.phi_max = to_double(k, v); },
                          [](const C& c) { return num(c.tune.phi_max); }}},
        {"tune.phi_points", {[](C& c, S k, S v) { c.tune.phi_points = to_count(k, v); },
                             [](const C& c) { return std::to_string(c.tune.phi_points); }}},
        {"tune.modes", {[](C& c, S k, S v) { c.tune.modes = to_modes(k, v); },
                        [](const C& c) { return join(c.tune.modes); }}},
        {"scurve.curves", {[](C& c, S k, S v) { c.scurve.curves = to_count(k, v); },
                           [](const C& c) { return std::to_string(c.scurve.curves); }}},
        {"scurve.points", {[](C& c, S k, S v) { c.scurve.points = to_count(k, v); },
                           [](const C& c) { return std::to_string(c.scurve.points); }}},
        {"scurve.stretch", {[](C& c, S k, S v) { c.scurve.stretch = to_double(k, v); },
                            [](const C& c) { return num(c.scurve.stretch); }}},
        {"scurve.bootstrap", {[](C& c, S k, S v) { c.scurve.bootstrap = to_count(k, v); },
                              [](const C& c) { return std::to_string(c.scurve.bootstrap); }}},
        {"spectroscopy.modes", {[](C& c, S k, S v) { c.spectroscopy.modes = to_modes(k, v); },
                                [](const C& c) { return join(c.spectroscopy.modes); }}},
        {"spectroscopy.beta_modes", {[](C& c, S k, S v) { c.spectroscopy.beta_modes = to_modes(k, v); },
                                     [](const C& c) { return join(c.spectroscopy.beta_modes); }}},
        {"spectroscopy.points", {[](C& c, S k, S v) { c.spectroscopy.points = to_count(k, v); },
                                 [](const C& c) { return std::to_string(c.spectroscopy.points); }}},
        {"spectroscopy.half_span_linewidths",
         {[](C& c, S k, S v) { c.spectroscopy.half_span_linewidths = to_double(k, v); },
          [](const C& c) { return num(c.spectroscopy.half_span_linewidths); }}},
        {"spectroscopy.bias_p", {[](C& c, S k, S v) { c.spectroscopy.bias_p = to_double(k, v); },
                                 [](const C& c) { return num(c.spectroscopy.bias_p); }}},
        {"spectroscopy.peak_p", {[](C& c, S k, S v) { c.spectroscopy.peak_p = to_double(k, v); },
                                 [](const C& c) { return num(c.spectroscopy.peak_p); }}},
        {"spectroscopy.probe_power", {[](C& c, S k, S v) { c.spectroscopy.probe_power = to_double(k, v); },
                                      [](const C& c) { return num(c.spectroscopy.probe_power); }}},
        {"noise_sweep.axis", {[](C& c, S, S v) { c.noise_sweep.axis = parse_axis(trim(v)); },
                              [](const C& c) { return axis_name(c.noise_sweep.axis); }}},
        {"noise_sweep.values", {[](C& c, S k, S v) { c.noise_sweep.values = to_doubles(k, v); },
                                [](const C& c) { return join(c.noise_sweep.values); }}},
        {"noise_sweep.monte_carlo", {[](C& c, S k, S v) { c.noise_sweep.monte_carlo = to_bool(k, v); },
                                     [](const C& c) { return std::string(c.noise_sweep.monte_carlo ? "true" : "false"); }}},
        {"noise_sweep.mc_curves", {[](C& c, S k, S v) { c.noise_sweep.mc_curves = to_count(k, v); },
                                   [](const C& c) { return std::to_string(c.noise_sweep.mc_curves); }}},
        {"noise_sweep.mc_points", {[](C& c, S k, S v) { c.noise_sweep.mc_points = to_count(k, v); },
                                   [](const C& c) { return std::to_string(c.noise_sweep.mc_points); }}},
        {"fit.kind", {[](C& c, S k, S v) { c.fit.kind = to_fit_kind(k, trim(v)); },
                      [](const C& c) { return fit_kind_name(c.fit.kind); }}},
        {"fit.input", {[](C& c, S, S v) { c.fit.input = trim(v); }, [](const C& c) { return c.fit.input; }}},
        {"fit.fit_exponent", {[](C& c, S k, S v) { c.fit.fit_exponent = to_bool(k, v); },
                              [](const C& c) { return std::string(c.fit.fit_exponent ? "true" : "false"); }}},
        {"calibrate.target_nu3_GHz", {[](C& c, S k, S v) { c.calibrate.target_nu3 = to_double(k, v) * 1e9; },
                                      [](const C& c) { return num(c.calibrate.target_nu3 * 1e-9); }}},
        {"calibrate.target_beta", {[](C& c, S k, S v) { c.calibrate.target_beta = to_double(k, v); },
                                   [](const C& c) { return num(c.calibrate.target_beta); }}},
    };
    return keys;
}

const Key* find_key(const std::string& path) {
    for (const auto& [name, key] : registry()) {
        if (name == path) return &key;
    }
    return nullptr;
}

}  // namespace

SweepAxis parse_axis(const std::string& name) {
    if (name == "flux") return SweepAxis::flux;
    if (name == "temperature") return SweepAxis::temperature;
    if (name == "power") return SweepAxis::power;
    throw Error(ErrorCode::ConfigError, "axis must be flux, temperature or power, got '" + name + "'");
}

std::string axis_name(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::flux: return "flux";
        case SweepAxis::temperature: return "temperature";
        case SweepAxis::power: return "power";
    }
    return "flux";
}

void ExperimentConfig::validate() const {
    try {
        device.validate();
        noise.validate();
    } catch (const Error& e) {
        throw Error(ErrorCode::ConfigError, e.what());
    }
    auto require = [](bool ok, const char* what) {
        if (!ok) throw Error(ErrorCode::ConfigError, what);
    };
    require(std::abs(operating_point.flux) < 0.5, "operating_point.flux must satisfy |flux| < 0.5");
    require(operating_point.temperature > 0.0, "operating_point.temperature_mK must be > 0");
    require(operating_point.reference_temperature > 0.0, "operating_point.reference_temperature_mK must be > 0");
    require(operating_point.detuning >= 0.0, "operating_point.detuning_kHz must be >= 0");
    require(operating_point.reference_fraction > 0.0, "operating_point.reference_fraction_ppm must be > 0");
    require(operating_point.coupling_fraction > 0.0 && operating_point.coupling_fraction <= 1.0,
            "operating_point.coupling_fraction must be in (0, 1]");
    require(operating_point.mode % 2 == 1, "operating_point.mode must be odd");
    require(std::find(operating_point.modes.begin(), operating_point.modes.end(), operating_point.mode) !=
                operating_point.modes.end(),
            "operating_point.modes must contain the amplifier mode");
    require(!operating_point.linewidths.fwhm.empty(), "device.gamma_per_mode_kHz is empty");
    require(operating_point.linewidths.fwhm.count(operating_point.mode) == 1,
            "device.gamma_per_mode_kHz must give the amplifier mode");
    for (const auto& [n, g] : operating_point.linewidths.fwhm) require(g > 0.0, "linewidths must be > 0");
    require(pulse.rise >= 0.0 && pulse.measure > 0.0 && pulse.latch >= 0.0, "pulse durations must be >= 0");
    require(pulse.latch_power_fraction > 0.0 && pulse.latch_power_fraction <= 1.0,
            "pulse.latch_power_fraction must be in (0, 1]");
    require(pulse.repetition_rate > 0.0, "pulse.repetition_rate_Hz must be > 0");
    require(calibration.width_scale > 0.0 && calibration.attempt_rate_over_gamma > 0.0 && calibration.barrier > 0.0 &&
                calibration.exponent > 0.0,
            "switching parameters must be > 0");
    require(target_width >= 0.0, "switching.target_width_kHz must be >= 0");
    require(run.n_pulses >= 1, "run.n_pulses must be >= 1");
    require(run.dt_over_gamma >= 0.0, "run.dt_over_gamma must be >= 0");
    require(run.noise_photons > 0.0, "run.noise_photons must be > 0");
    require(tune.phi_points >= 1 && tune.phi_max >= tune.phi_min, "tune grid is empty");
    require(std::abs(tune.phi_min) < 0.5 && std::abs(tune.phi_max) < 0.5, "tune flux range must stay inside |phi| < 0.5");
    require(!tune.modes.empty(), "tune.modes is empty");
    require(scurve.curves >= 1 && scurve.points >= 5 && scurve.stretch > 0.0, "scurve needs >= 1 curve and >= 5 points");
    require(!spectroscopy.modes.empty() && spectroscopy.points >= 8, "spectroscopy needs modes and >= 8 points");
    require(spectroscopy.half_span_linewidths > 0.0, "spectroscopy.half_span_linewidths must be > 0");
    require(spectroscopy.bias_p > 0.0 && spectroscopy.peak_p > spectroscopy.bias_p && spectroscopy.peak_p < 1.0,
            "spectroscopy needs 0 < bias_p < peak_p < 1");
    require(spectroscopy.probe_power >= 0.0, "spectroscopy.probe_power must be >= 0");
    for (int n : spectroscopy.modes) {
        require(std::find(operating_point.modes.begin(), operating_point.modes.end(), n) !=
                    operating_point.modes.end(),
                "spectroscopy.modes must be listed in operating_point.modes");
    }
    require(noise_sweep.mc_curves >= 1 && noise_sweep.mc_points >= 5, "noise_sweep needs >= 1 curve and >= 5 points");
    require(calibrate.target_nu3 > 0.0 && calibrate.target_beta > 0.0 && calibrate.target_beta < 0.1,
            "calibrate targets out of range");
}

ExperimentConfig parse_config(const std::string& text) {
    // property_tree only knows ';' comments.
    std::string cleaned;
    std::istringstream lines(text);
    for (std::string line; std::getline(lines, line);) {
        const std::string t = trim(line);
        cleaned += (t.starts_with("#") ? std::string() : line) + "\n";
    }
    boost::property_tree::ptree tree;
    try {
        std::istringstream in(cleaned);
        boost::property_tree::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw Error(ErrorCode::ConfigError, std::string("malformed configuration: ") + e.message() + " (line " +
                                                std::to_string(e.line()) + ")");
    }
    ExperimentConfig config;
    for (const auto& [section, body] : tree) {
        if (body.empty()) bad(section, "keys must live inside a [section]");
        for (const auto& [key, value] : body) {
            const std::string path = section + "." + key;
            const Key* k = find_key(path);
            if (!k) bad(path, "unknown key");
            k->set(config, path, value.get_value<std::string>());
        }
    }
    config.validate();
    return config;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open configuration '" + path + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

std::string dump_config(const ExperimentConfig& config) {
    std::string out, section;
    for (const auto& [name, key] : registry()) {
        const auto dot = name.find('.');
        const std::string s = name.substr(0, dot);
        if (s != section) {
            out += (section.empty() ? "" : "\n") + fmt::format("[{}]\n", s);
            section = s;
        }
        out += fmt::format("{} = {}\n", name.substr(dot + 1), key.get(config));
    }
    return out;
}

}  // namespace kerrsim
