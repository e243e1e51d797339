#include "kerrsim/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "kerrsim/analysis.hpp"
#include "kerrsim/error.hpp"
#include "kerrsim/noise_model.hpp"
#include "kerrsim/spectroscopy.hpp"

namespace kerrsim {

std::string format_number(double value) {
    if (std::isnan(value)) return "nan";
    return fmt::format("{:.12g}", value);
}

namespace {

class Csv {
public:
    explicit Csv(const std::vector<std::string>& header) { row(header); }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) text_ += ',';
            text_ += cells[i];
        }
        text_ += '\n';
    }

    const std::string& str() const { return text_; }

private:
    std::string text_;
};

std::string num(double v) { return format_number(v); }
std::string num(std::size_t v) { return std::to_string(v); }
std::string num(int v) { return std::to_string(v); }

std::vector<double> linspace(double a, double b, std::size_t n) {
    std::vector<double> v(n, a);
    for (std::size_t i = 1; i < n; ++i) v[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    return v;
}

PulseSpec make_pulse(const ExperimentConfig& config, const OperatingPoint& op) {
    const double g = op.mode.gamma;
    PulseSpec p;
    p.nu_d = op.nu_switch;
    p.plateau_power = op.photon_flux;
    p.latch_power_fraction = config.pulse.latch_power_fraction;
    p.t_rise = config.pulse.rise / g;
    p.t_measure = config.pulse.measure / g;
    p.t_latch = config.pulse.latch / g;
    p.repetition_rate = config.pulse.repetition_rate;
    p.validate(g);
    return p;
}

// Summary rows as two-column CSV.
class Summary {
public:
    void add(const std::string& key, double value) { csv_.row({key, num(value)}); }
    void add(const std::string& key, const std::string& value) { csv_.row({key, value}); }
    const std::string& str() const { return csv_.str(); }

private:
    Csv csv_{{"quantity", "value"}};
};

}  // namespace

Setup make_setup(const ExperimentConfig& config, const OperatingPointSpec& spec,
                 std::optional<SwitchingCalibration> calibration) {
    OperatingPointSpec s = spec;
    s.linewidths.reference_mode = s.mode;
    Setup out;
    out.op = make_operating_point(config.device, s);
    out.pulse = make_pulse(config, out.op);
    SwitchingCalibration cal = config.calibration;
    if (calibration) {
        cal = *calibration;
    } else if (config.target_width > 0.0) {
        cal = calibrate_switching(out.op.spectrum, out.op.env, out.op.photon_flux, out.pulse.t_measure,
                                  config.target_width, config.calibration, s.mode, s.coupling_fraction);
    }
    out.curve = activation_curve(out.op.spectrum, out.op.env, out.op.photon_flux, out.pulse.t_measure, cal, s.mode,
                                 s.coupling_fraction);
    auto& a = out.acquisition;
    a.engine = config.run.engine;
    a.n_pulses = config.run.n_pulses;
    a.master_seed = config.run.seed;
    a.jobs = config.run.jobs;
    a.calibration = cal;
    a.detection.noise_photons = config.run.noise_photons;
    a.dt = config.run.dt_over_gamma / out.op.mode.gamma;
    a.mode = s.mode;
    a.coupling_fraction = s.coupling_fraction;
    return out;
}

Setup make_setup(const ExperimentConfig& config) { return make_setup(config, config.operating_point); }

std::vector<double> noisy_scurve_grid(const Setup& setup, const ExperimentConfig& config, std::size_t points,
                                      double stretch) {
    const auto& sp = setup.op.spectrum;
    const std::size_t i = sp.index_of(setup.acquisition.mode);
    const double sf = config.noise.sigma_flux;
    const double flux_shift = std::abs(sp.frequency_slope[i]) * sf + 0.5 * std::abs(sp.frequency_curvature[i]) * sf * sf;
    const auto jitter = drive_jitter_contribution(setup.op.mode, setup.op.photon_flux, config.noise, 0.0);
    const double amp_shift = jitter.amplitude / gaussian_10_90_factor();
    const double sigma = std::hypot(flux_shift, config.noise.drive_freq_jitter, config.noise.excess_freq_noise);
    const double spread = std::hypot(sigma, amp_shift);
    return scurve_grid(setup.curve, points, stretch, 4.0 * spread);
}

Outputs cmd_tune(const ExperimentConfig& config) {
    Csv csv({"phi_reduced", "mode", "frequency_Hz"});
    for (double phi : linspace(config.tune.phi_min, config.tune.phi_max, config.tune.phi_points)) {
        for (int n : config.tune.modes) {
            csv.row({num(phi), num(n), num(mode_frequency(config.device, n, FluxPoint{phi}))});
        }
    }
    return {{"tune.csv", csv.str()}};
}

Outputs cmd_scurve(const ExperimentConfig& config) {
    const Setup s = make_setup(config);
    const auto grid = noisy_scurve_grid(s, config, config.scurve.points, config.scurve.stretch);

    std::vector<SCurve> curves;
    for (std::size_t c = 0; c < config.scurve.curves; ++c) {
        curves.push_back(s_curve(grid, s.pulse, s.op.spectrum, s.op.env, config.noise, s.acquisition, c));
    }

    Csv all({"nu_d_Hz", "p_s", "ci_low", "ci_high", "n_pulses", "curve_index"});
    Csv widths({"curve_index", "nu_50_Hz", "width_10_90_Hz", "flux_offset_phi0"});
    for (const auto& c : curves) {
        for (const auto& p : c.points) {
            all.row({num(p.nu_d), num(p.p_s), num(p.ci_low), num(p.ci_high), num(p.n_pulses), num(c.curve_index)});
        }
        widths.row({num(c.curve_index), num(c.nu_50), num(c.width_10_90), num(c.flux_offset)});
    }

    const SCurve avg = average_curves(curves);
    Csv average({"nu_d_Hz", "p_s", "ci_low", "ci_high", "n_pulses"});
    for (const auto& p : avg.points) {
        average.row({num(p.nu_d), num(p.p_s), num(p.ci_low), num(p.ci_high), num(p.n_pulses)});
    }

    SCurveFitOptions fo;
    fo.attempt_product = s.curve.attempt_product;
    fo.barrier = s.curve.barrier;
    fo.exponent = s.curve.exponent;
    const auto fit = s_curve_fit(avg, fo);
    const auto stats = summarize_curves(curves, config.run.seed, config.scurve.bootstrap);

    Summary sum;
    sum.add("detuning_Hz", s.op.detuning);
    sum.add("photon_flux", s.op.photon_flux);
    sum.add("nu_switch_Hz", s.op.nu_switch);
    sum.add("dykman_width_Hz", dykman_width(s.op.spectrum, s.op.env, s.op.detuning, s.acquisition.mode) * s.op.mode.nu);
    sum.add("analytic_width_Hz", s.curve.width_10_90());
    sum.add("averaged_width_Hz", stats.averaged_width);
    sum.add("averaged_fit_width_Hz", fit.width);
    sum.add("averaged_fit_width_sigma_Hz", fit.width_sigma);
    sum.add("mean_single_width_Hz", stats.mean_single_width);
    sum.add("sd_single_width_Hz", stats.sd_single_width);
    sum.add("nu50_sd_Hz", stats.nu50_sd);
    sum.add("nu50_binomial_sd_Hz", stats.nu50_binomial_sd);
    sum.add("chi_square", stats.chi_square);
    sum.add("dof", static_cast<double>(stats.dof));
    sum.add("p_value", stats.p_value);
    return {{"scurve.csv", all.str()},
            {"scurve_average.csv", average.str()},
            {"scurve_widths.csv", widths.str()},
            {"scurve_summary.csv", sum.str()}};
}

Outputs cmd_spectroscopy(const ExperimentConfig& config) {
    const Setup s = make_setup(config);
    const auto& spec = config.spectroscopy;
    const auto& sp = s.op.spectrum;
    const int amp = s.acquisition.mode;
    PulseSpec bias = s.pulse;
    bias.nu_d = s.curve.frequency_at(spec.bias_p);

    auto power_for = [&](int n) {
        if (spec.probe_power > 0.0) return spec.probe_power;
        if (n % 2) return probe_power_for_peak(sp, n, s.curve, spec.bias_p, spec.peak_p, amp, s.acquisition.coupling_fraction);
        // Uncoupled: any power within the linearity guard gives a flat trace.
        return probe_power_for_peak(sp, amp == 1 ? 5 : 1, s.curve, spec.bias_p, spec.peak_p, amp,
                                    s.acquisition.coupling_fraction);
    };

    Csv trace({"mode", "nu_probe_Hz", "p_s", "ci_low", "ci_high"});
    Csv fits({"mode", "model_frequency_Hz", "fitted_center_Hz", "fitted_center_sigma_Hz", "fitted_width_Hz",
              "probe_power", "bias_before", "bias_after", "photon_sensitivity"});
    std::vector<ModeCenter> centers;
    ScanOptions so;
    so.bias_target = spec.bias_p;
    for (int n : spec.modes) {
        SpectroscopyScan scan;
        scan.target_mode = n;
        scan.probe_grid = probe_grid(sp, n, spec.points, spec.half_span_linewidths);
        scan.probe_power = power_for(n);
        so.scan_index = static_cast<std::size_t>(n);
        scan = run_scan(scan, bias, sp, s.op.env, config.noise, s.acquisition, so);
        for (const auto& p : scan.trace) {
            trace.row({num(n), num(p.nu_probe), num(p.p_s), num(p.ci_low), num(p.ci_high)});
        }
        if (scan.fitted) {
            fits.row({num(n), num(sp.frequency(n)), num(scan.fitted_center), num(scan.fitted_center_sigma),
                      num(scan.fitted_width), num(scan.probe_power), num(scan.bias_before), num(scan.bias_after),
                      num(photon_sensitivity(sp, s.curve.width_10_90(), n, amp))});
            if (std::find(spec.beta_modes.begin(), spec.beta_modes.end(), n) != spec.beta_modes.end()) {
                centers.push_back({n, scan.fitted_center, scan.fitted_center_sigma});
            }
        } else {
            fits.row({num(n), num(sp.frequency(n)), "", "", "", num(scan.probe_power), num(scan.bias_before),
                      num(scan.bias_after), ""});
        }
    }
    Outputs out{{"spectroscopy.csv", trace.str()}, {"spectroscopy_fit.csv", fits.str()}};
    if (centers.size() >= 2) {
        const auto b = extract_beta(centers, config.device.nu1_bare);
        Summary sum;
        sum.add("beta", b.beta);
        sum.add("beta_sigma", b.beta_sigma);
        sum.add("nu1_bare_Hz", b.fit.value("nu1_bare"));
        sum.add("nu1_bare_sigma_Hz", b.fit.sigma("nu1_bare"));
        sum.add("model_beta", sp.beta);
        out.push_back({"spectroscopy_beta.csv", sum.str()});
    }
    return out;
}

Outputs cmd_noise_sweep(const ExperimentConfig& config) {
    const auto& sw = config.noise_sweep;
    const Setup base = make_setup(config);
    const SwitchingCalibration cal = base.acquisition.calibration;
    const double cg = gaussian_10_90_factor();

    std::vector<double> values = sw.values;
    if (values.empty()) {
        switch (sw.axis) {
            case SweepAxis::flux: values = linspace(0.0, 0.4, 9); break;
            case SweepAxis::temperature: values = {8, 25, 50, 100, 200, 400}; break;
            case SweepAxis::power: values = {1, 1.5, 2, 3, 5, 7, 10}; break;
        }
    }

    Csv csv({"axis_value", "delta_s_Hz", "delta_s_analytic_Hz", "delta_s_mc_Hz", "mc_ci_Hz"});
    for (std::size_t k = 0; k < values.size(); ++k) {
        const double v = values[k];
        OperatingPointSpec spec = config.operating_point;
        spec.detuning = base.op.detuning;
        switch (sw.axis) {
            case SweepAxis::flux: spec.flux = v; break;
            case SweepAxis::temperature: spec.temperature = v * 1e-3; break;
            case SweepAxis::power: {
                if (!(v > 0.0)) throw Error(ErrorCode::ConfigError, "power factors must be > 0");
                const double strength = drive_strength(base.op.mode, base.op.photon_flux * v);
                spec.detuning = switching_detuning(base.op.mode, strength);
                break;
            }
        }
        const Setup s = make_setup(config, spec, cal);
        const double analytic =
            dykman_width(s.op.spectrum, s.op.env, s.op.detuning, s.acquisition.mode) * s.op.mode.nu;
        const double intrinsic = s.curve.width_10_90();
        const double jittered = combine_quadrature(
            {drive_jitter_contribution(s.op.mode, s.op.photon_flux, config.noise, intrinsic).total,
             cg * config.noise.excess_freq_noise});
        const double predicted = broadened_width(config.device, FluxPoint{spec.flux}, jittered, config.noise,
                                                 s.acquisition.mode);

        std::string mc = "", ci = "";
        if (sw.monte_carlo) {
            const auto grid = noisy_scurve_grid(s, config, sw.mc_points, 1.5);
            std::vector<SCurve> curves;
            for (std::size_t c = 0; c < sw.mc_curves; ++c) {
                curves.push_back(s_curve(grid, s.pulse, s.op.spectrum, s.op.env, config.noise, s.acquisition,
                                         k * sw.mc_curves + c));
            }
            const SCurve avg = average_curves(curves);
            SCurveFitOptions fo;
            fo.attempt_product = s.curve.attempt_product;
            fo.barrier = s.curve.barrier;
            fo.exponent = s.curve.exponent;
            mc = num(width_10_90(avg));
            ci = num(1.96 * s_curve_fit(avg, fo).width_sigma);
        }
        csv.row({num(v), num(predicted), num(analytic), mc, ci});
    }
    return {{"noise_sweep_" + axis_name(sw.axis) + ".csv", csv.str()}};
}

namespace {

double cell(const CsvTable& t, std::size_t row, std::size_t col) {
    const std::string& s = t.rows[row].at(col);
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw Error(ErrorCode::ConfigError, fmt::format("row {}: '{}' is not a number", row + 1, s));
    }
}

std::size_t need(const CsvTable& t, const std::vector<std::string>& names) {
    if (auto c = t.column(names)) return *c;
    std::string list;
    for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
    throw Error(ErrorCode::ConfigError, "input lacks a column named one of: " + list);
}

Outputs fit_outputs(const std::string& kind, const FitResult& f, const std::vector<std::pair<std::string, double>>& extra) {
    std::vector<std::string> header{"kind", "converged", "residual_rms"}, row{kind, f.converged ? "true" : "false",
                                                                              num(f.residual_rms)};
    std::string block = fmt::format("[fit]\nkind = {}\nconverged = {}\nresidual_rms = {}\n", kind,
                                    f.converged ? "true" : "false", num(f.residual_rms));
    for (std::size_t i = 0; i < f.names.size(); ++i) {
        header.push_back(f.names[i]);
        header.push_back(f.names[i] + "_sigma");
        row.push_back(num(f.values[i]));
        row.push_back(num(f.sigmas[i]));
        block += fmt::format("{} = {} +- {}\n", f.names[i], num(f.values[i]), num(f.sigmas[i]));
    }
    for (const auto& [name, value] : extra) {
        header.push_back(name);
        row.push_back(num(value));
        block += fmt::format("{} = {}\n", name, num(value));
    }
    Csv csv(header);
    csv.row(row);
    return {{"fit.csv", csv.str()}, {"fit.txt", block}};
}

}  // namespace

Outputs cmd_fit(const ExperimentConfig& config) {
    if (config.fit.input.empty()) throw Error(ErrorCode::ConfigError, "fit.input is not set");
    const CsvTable t = read_csv(config.fit.input);
    if (t.rows.empty()) throw Error(ErrorCode::ConfigError, "input has no data rows");

    switch (config.fit.kind) {
        case FitKind::lorentzian: {
            const auto cx = need(t, {"nu_Hz", "nu_probe_Hz", "frequency_Hz", "nu"});
            const auto cy = need(t, {"magnitude", "s21", "value", "p_s"});
            const auto cs = t.column({"sigma"});
            std::vector<TracePoint> trace;
            for (std::size_t r = 0; r < t.rows.size(); ++r) {
                trace.push_back({cell(t, r, cx), cell(t, r, cy), cs ? cell(t, r, *cs) : 0.0});
            }
            return fit_outputs("lorentzian", lorentzian_fit(trace), {});
        }
        case FitKind::scurve: {
            const auto cx = need(t, {"nu_d_Hz", "nu_Hz"});
            const auto cy = need(t, {"p_s"});
            const auto cn = t.column({"n_pulses"});
            // Rows sharing a drive frequency (several curves) are pooled.
            std::map<double, std::pair<double, std::size_t>> pooled;
            for (std::size_t r = 0; r < t.rows.size(); ++r) {
                const std::size_t n = cn ? static_cast<std::size_t>(cell(t, r, *cn)) : 0;
                auto& [sum, count] = pooled[cell(t, r, cx)];
                const double w = n > 0 ? static_cast<double>(n) : 1.0;
                sum += cell(t, r, cy) * w;
                count += n > 0 ? n : 1;
            }
            std::vector<double> nu, p;
            std::size_t n_min = 0;
            for (const auto& [x, v] : pooled) {
                nu.push_back(x);
                p.push_back(v.first / static_cast<double>(v.second));
                n_min = n_min == 0 ? v.second : std::min(n_min, v.second);
            }
            const Setup s = make_setup(config);
            SCurveFitOptions fo;
            fo.attempt_product = s.curve.attempt_product;
            fo.barrier = s.curve.barrier;
            fo.exponent = s.curve.exponent;
            fo.fit_exponent = config.fit.fit_exponent;
            const auto f = s_curve_fit(make_curve(nu, p, cn ? n_min : 0), fo);
            return fit_outputs("scurve", f.fit, {{"width_10_90_Hz", f.width}, {"width_10_90_sigma_Hz", f.width_sigma}});
        }
        case FitKind::tuning: {
            const auto cx = need(t, {"phi_reduced", "flux"});
            const auto cy = need(t, {"frequency_Hz"});
            const auto cm = t.column({"mode"});
            std::vector<TuningPoint> pts;
            for (std::size_t r = 0; r < t.rows.size(); ++r) {
                const int mode = cm ? static_cast<int>(cell(t, r, *cm)) : config.operating_point.mode;
                pts.push_back({cell(t, r, cx), cell(t, r, cy), mode});
            }
            const auto f = tuning_curve_fit(pts, config.device);
            return fit_outputs("tuning", f.fit,
                               {{"l_array_H", f.l_array}, {"l_array_sigma_H", f.l_array_sigma}, {"beta", beta(f.params, FluxPoint{0.0})}});
        }
        case FitKind::flux_noise: {
            const auto cx = need(t, {"axis_value", "phi_reduced"});
            std::vector<std::pair<double, double>> pts;
            const auto mc = t.column({"delta_s_mc_Hz"});
            const bool use_mc = mc && std::all_of(t.rows.begin(), t.rows.end(),
                                                  [&](const auto& row) { return !row.at(*mc).empty(); });
            const auto cy = use_mc ? *mc : need(t, {"delta_s_Hz", "width_Hz"});
            for (std::size_t r = 0; r < t.rows.size(); ++r) pts.emplace_back(cell(t, r, cx), cell(t, r, cy));
            return fit_outputs("flux_noise", fit_flux_noise(config.device, pts, config.operating_point.mode), {});
        }
    }
    throw Error(ErrorCode::ConfigError, "unknown fit kind");
}

Outputs cmd_calibrate(const ExperimentConfig& config) {
    ExperimentConfig calibrated = config;
    calibrated.device = calibrate(config.device, config.calibrate.target_nu3, config.calibrate.target_beta);
    const Setup s = make_setup(calibrated);
    calibrated.calibration = s.acquisition.calibration;
    calibrated.target_width = 0.0;
    calibrated.run.jobs = RunSpec{}.jobs;  // thread count is not part of the result

    const auto& sp = s.op.spectrum;
    const int n = s.acquisition.mode;
    Summary sum;
    sum.add("n_squids", static_cast<double>(calibrated.device.n_squids));
    sum.add("i_c_A", calibrated.device.i_c);
    sum.add("z0_ohm", calibrated.device.z0);
    sum.add("nu1_bare_Hz", calibrated.device.nu1_bare);
    sum.add("l_wg_H", calibrated.device.l_wg());
    sum.add("l_array_H", array_inductance(calibrated.device, FluxPoint{0.0}));
    sum.add("beta", beta(calibrated.device, FluxPoint{0.0}));
    sum.add("nu_mode_Hz", sp.frequency(n));
    sum.add("kerr_Hz", sp.kerr(n));
    if (n != 1 && sp.contains(1)) sum.add("cross_kerr_1_Hz", sp.cross(n, 1));
    sum.add("critical_photon_number", critical_photon_number(sp.linewidth(n), sp.kerr(n)));
    sum.add("detuning_Hz", s.op.detuning);
    sum.add("detuning_over_gamma", s.op.detuning / sp.linewidth(n));
    sum.add("dykman_width_ppm", dykman_width(sp, s.op.env, s.op.detuning, n) * 1e6);
    sum.add("width_scale", calibrated.calibration.width_scale);
    sum.add("analytic_width_Hz", s.curve.width_10_90());
    sum.add("photon_flux", s.op.photon_flux);
    return {{"calibrate.csv", sum.str()}, {"calibrated.ini", dump_config(calibrated)}};
}

std::optional<std::size_t> CsvTable::column(const std::vector<std::string>& names) const {
    for (const auto& n : names) {
        auto it = std::find(header.begin(), header.end(), n);
        if (it != header.end()) return static_cast<std::size_t>(it - header.begin());
    }
    return std::nullopt;
}

CsvTable parse_csv(const std::string& text) {
    CsvTable t;
    std::istringstream in(text);
    std::string line;
    auto split = [](const std::string& s) {
        std::vector<std::string> cells;
        std::string cellv;
        std::istringstream ss(s);
        while (std::getline(ss, cellv, ',')) {
            const auto a = cellv.find_first_not_of(" \t\r");
            const auto b = cellv.find_last_not_of(" \t\r");
            cells.push_back(a == std::string::npos ? std::string() : cellv.substr(a, b - a + 1));
        }
        if (!s.empty() && s.back() == ',') cells.emplace_back();
        return cells;
    };
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        auto cells = split(line);
        if (t.header.empty()) {
            t.header = std::move(cells);
            continue;
        }
        if (cells.size() != t.header.size()) {
            throw Error(ErrorCode::ConfigError, fmt::format("CSV row {} has {} cells, header has {}",
                                                            t.rows.size() + 1, cells.size(), t.header.size()));
        }
        t.rows.push_back(std::move(cells));
    }
    if (t.header.empty()) throw Error(ErrorCode::ConfigError, "CSV input is empty");
    return t;
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return parse_csv(text.str());
}

}  // namespace kerrsim
