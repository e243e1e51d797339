// kerrsim: command-line front end for the simulator.
//
//   kerrsim tune | scurve | spectroscopy | noise-sweep | fit | calibrate [options]
//
// Exit status: 0 success, 2 configuration or input error, 3 numerical failure.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "kerrsim/config.hpp"
#include "kerrsim/error.hpp"
#include "kerrsim/experiments.hpp"

namespace fs = std::filesystem;
using namespace kerrsim;

namespace {

std::string timestamp() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm utc{};
    gmtime_r(&t, &utc);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &utc);
    return buf;
}

void write_outputs(const Outputs& outputs, const fs::path& dir, bool stamp) {
    fs::create_directories(dir);
    const std::string header = stamp ? "# generated " + timestamp() + "\n" : "";
    for (const auto& f : outputs) {
        const fs::path path = dir / f.name;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
        if (path.extension() == ".csv") out << header;
        out << f.content;
        if (!out) throw Error(ErrorCode::IoError, "write failed for '" + path.string() + "'");
        std::cerr << "wrote " << path.string() << '\n';
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kerr resonator bifurcation amplifier simulator"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, out_dir = ".";
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> jobs;
    bool no_stamp = false, dry_run = false;
    app.add_option("--config", config_path, "INI configuration file");
    app.add_option("--seed", seed, "master seed (overrides run.seed)");
    app.add_option("--out", out_dir, "output directory")->capture_default_str();
    app.add_option("--jobs", jobs, "worker threads, 0 for all (overrides run.jobs)");
    app.add_flag("--no-header-timestamp", no_stamp, "omit the '# generated' line from CSV outputs");
    app.add_flag("--dry-run", dry_run, "print the resolved configuration and exit");

    auto* tune = app.add_subcommand("tune", "mode frequencies against flux");
    auto* scurve = app.add_subcommand("scurve", "switching probability curves and widths");
    auto* spectro = app.add_subcommand("spectroscopy", "dispersive spectroscopy of coupled modes");
    auto* sweep = app.add_subcommand("noise-sweep", "S-curve width against flux, temperature or drive power");
    auto* fit = app.add_subcommand("fit", "fit a model to a CSV file");
    auto* calib = app.add_subcommand("calibrate", "solve the device for target frequency and participation");

    std::string axis;
    sweep->add_option("--axis", axis, "flux, temperature or power");
    std::string fit_input, fit_kind;
    fit->add_option("--input", fit_input, "CSV file to fit");
    fit->add_option("--kind", fit_kind, "lorentzian, scurve, tuning or flux_noise");
    bool fit_exponent = false;
    fit->add_flag("--fit-exponent", fit_exponent, "let the S-curve exponent float");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        ExperimentConfig config = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
        if (seed) config.run.seed = *seed;
        if (jobs) config.run.jobs = *jobs;
        if (!axis.empty()) config.noise_sweep.axis = parse_axis(axis);
        if (!fit_input.empty()) config.fit.input = fit_input;
        if (!fit_kind.empty()) {
            const ExperimentConfig k = parse_config("[fit]\nkind = " + fit_kind + "\n");
            config.fit.kind = k.fit.kind;
        }
        if (fit_exponent) config.fit.fit_exponent = true;
        config.validate();

        if (dry_run) {
            std::cout << dump_config(config);
            return 0;
        }

        Outputs outputs;
        if (*tune) outputs = cmd_tune(config);
        else if (*scurve) outputs = cmd_scurve(config);
        else if (*spectro) outputs = cmd_spectroscopy(config);
        else if (*sweep) outputs = cmd_noise_sweep(config);
        else if (*fit) outputs = cmd_fit(config);
        else if (*calib) outputs = cmd_calibrate(config);

        write_outputs(outputs, out_dir, !no_stamp);
        for (const auto& f : outputs) {
            if (f.name == "fit.txt") std::cout << f.content;
        }
        return 0;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return is_config_error(e.code()) || e.code() == ErrorCode::InvalidParameter ? 2 : 3;
    } catch (const boost::property_tree::ptree_error& e) {
        std::cerr << "error [ConfigError]: " << e.what() << '\n';
        return 2;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error [IoError]: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
