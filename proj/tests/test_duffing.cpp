#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "kerrsim/circuit_model.hpp"
#include "kerrsim/duffing.hpp"
#include "kerrsim/error.hpp"

using namespace kerrsim;

namespace {

constexpr double h_planck = 6.62607015e-34;
constexpr double k_b = 1.380649e-23;
constexpr double pi_ = 3.14159265358979323846;

ModeSpectrum spectrum() { return kerr_coefficients(reference_device(), FluxPoint{0.0}, {1, 2, 3, 4, 5}); }

double cubic_lhs(const KerrMode& m, double detuning, double n) {
    const double a = 2 * pi_ * (detuning - 2 * m.kerr * n);
    const double b = pi_ * m.gamma;
    return n * (a * a + b * b);
}

// Photon flux whose switching detuning is `detuning`.
double flux_for_switch(const KerrMode& m, double detuning) {
    return photon_flux_for_strength(m, strength_for_switching_detuning(m, detuning));
}

ErrorCode code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::IoError;
}

}  // namespace

TEST_CASE("effective temperature") {
    const double nu = 5.32e9;
    const double half = h_planck * nu / (2 * k_b);
    CHECK(effective_temperature(0.0, nu) == doctest::Approx(half).epsilon(1e-14));
    CHECK(effective_temperature(0.0, nu) == doctest::Approx(0.1277).epsilon(1e-3));
    CHECK(effective_temperature(1.0, nu) == doctest::Approx(1.0054).epsilon(1e-4));
    CHECK(effective_temperature(0.4, nu) == doctest::Approx(half / std::tanh(half / 0.4)).epsilon(1e-14));
    CHECK(crossover_temperature(nu) == doctest::Approx(0.0638).epsilon(2e-3));
    CHECK(crossover_temperature(nu) > 0.060);
    CHECK(crossover_temperature(nu) < 0.070);
    double previous = 0.0;
    for (double t = 0.0; t < 2.0; t += 0.01) {
        const double te = effective_temperature(t, nu);
        CHECK(te >= previous);
        CHECK(te >= std::max(t, half) * (1 - 1e-12));
        previous = te;
    }
    const auto env = thermal_environment(0.0, nu);
    CHECK(env.n_eff == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("steady state special cases") {
    KerrMode m{3, 5.32e9, 212e3, 781.6, 106e3};
    SUBCASE("no drive") {
        const auto ss = steady_state(m, 1e6, 0.0);
        REQUIRE(ss.branches.size() == 1);
        CHECK(ss.low() == 0.0);
    }
    SUBCASE("linear cavity on resonance") {
        KerrMode lin = m;
        lin.kerr = 0.0;
        const double f = 3.3e12;
        const auto ss = steady_state(lin, 0.0, f);
        REQUIRE(ss.branches.size() == 1);
        CHECK(ss.low() == doctest::Approx(f / ((pi_ * lin.gamma) * (pi_ * lin.gamma))).epsilon(1e-14));
        // On resonance with gamma_ext = gamma / 2, n = flux / (pi gamma).
        const double flux = 1e9;
        CHECK(steady_state(lin, 0.0, drive_strength(lin, flux)).low() ==
              doctest::Approx(flux / (pi_ * lin.gamma)).epsilon(1e-12));
    }
    SUBCASE("inside the critical detuning there is one root at every power") {
        for (double frac : {-1.0, 0.0, 0.5, 0.86}) {
            for (double logf = 8; logf < 18; logf += 0.05) {
                const auto ss = steady_state(m, frac * m.gamma, std::pow(10.0, logf));
                CHECK(ss.branches.size() == 1);
            }
        }
    }
}

TEST_CASE("steady-state roots satisfy the cubic") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> lg(4.0, 7.0), lk(0.0, 4.0), ld(-3.0, 8.0), lf(0.0, 1.0);
    int bistable = 0;
    for (int i = 0; i < 1000; ++i) {
        KerrMode m;
        m.gamma = std::pow(10.0, lg(rng));
        m.kerr = std::pow(10.0, lk(rng)) * (i % 5 == 0 ? -1.0 : 1.0);
        m.gamma_ext = m.gamma / 2;
        const double d = ld(rng);
        const double detuning = d * m.gamma * (m.kerr > 0 ? 1.0 : -1.0);
        // Strength spanning the bistable window at this detuning.
        const double p = std::pow(10.0, lf(rng) * 3.0 - 1.5) * (d > 0 ? d * d * d / 4 : 0.2);
        const double f = 2 * pi_ * pi_ * p * std::pow(m.gamma, 3) / std::abs(m.kerr);
        const auto ss = steady_state(m, detuning, f);
        REQUIRE(!ss.branches.empty());
        for (const auto& b : ss.branches) {
            CHECK(b.photon_number >= 0.0);
            CHECK(std::abs(cubic_lhs(m, detuning, b.photon_number) - f) / f < 1e-9);
        }
        if (ss.bistable()) {
            ++bistable;
            CHECK(ss.branches[0].stability == Stability::stable);
            CHECK(ss.branches[1].stability == Stability::unstable);
            CHECK(ss.branches[2].stability == Stability::stable);
            CHECK(ss.branches[0].photon_number < ss.branches[1].photon_number);
            CHECK(ss.branches[1].photon_number < ss.branches[2].photon_number);
        }
    }
    CHECK(bistable > 50);
}

TEST_CASE("bistability onset and convention constant") {
    KerrMode m{3, 5.32e9, 212e3, 940.0, 106e3};
    const auto r = bistability_region(m);
    CHECK(r.critical_detuning == doctest::Approx(std::sqrt(3.0) / 2 * m.gamma));
    CHECK(r.convention_constant == doctest::Approx(4.0).epsilon(1e-6));
    CHECK(r.onset_photon_number * r.convention_constant == doctest::Approx(260.4).epsilon(3.0 / 260.0));

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> g(1e4, 1e7), k(1.0, 1e4);
    for (int i = 0; i < 50; ++i) {
        KerrMode o{3, 5e9, g(rng), k(rng), 0.0};
        o.gamma_ext = o.gamma / 2;
        CHECK(bistability_region(o).convention_constant == doctest::Approx(4.0).epsilon(1e-6));
    }

    KerrMode wide = m;
    wide.gamma *= 2;
    CHECK(bistability_region(wide).critical_detuning == doctest::Approx(2 * r.critical_detuning));

    KerrMode weak = m;
    weak.kerr = 1e-9;
    CHECK(bistability_region(weak).onset_strength > 1e6 * r.onset_strength);

    KerrMode flat = m;
    flat.kerr = 0.0;
    CHECK(code_of([&] { bistability_region(flat); }) == ErrorCode::NonpositiveKerr);
}

TEST_CASE("spinodals bound the bistable window") {
    KerrMode m{3, 5.32e9, 212e3, 781.6, 106e3};
    const double detuning = 4 * m.gamma;
    const auto s = spinodal_strengths(m, detuning);
    CHECK(s.lower < s.upper);
    CHECK(steady_state(m, detuning, s.lower * 0.999).branches.size() == 1);
    CHECK(steady_state(m, detuning, s.lower * 1.001).bistable());
    CHECK(steady_state(m, detuning, s.upper * 0.999).bistable());
    CHECK(steady_state(m, detuning, s.upper * 1.001).branches.size() == 1);

    CHECK(strength_for_switching_detuning(m, detuning) == doctest::Approx(s.upper).epsilon(1e-12));
    CHECK(switching_detuning(m, s.upper) == doctest::Approx(detuning).epsilon(1e-10));
    CHECK(retrapping_detuning(m, s.lower) == doctest::Approx(detuning).epsilon(1e-10));
    CHECK(code_of([&] { spinodal_strengths(m, 0.5 * m.gamma); }) == ErrorCode::BelowBifurcation);
    CHECK(code_of([&] { switching_detuning(m, 0.5 * bistability_region(m).onset_strength); }) ==
          ErrorCode::BelowBifurcation);
}

TEST_CASE("hysteresis under a power sweep") {
    KerrMode m{3, 5.32e9, 212e3, 781.6, 106e3};
    const double detuning = 3 * m.gamma;
    const auto s = spinodal_strengths(m, detuning);
    const int steps = 400;
    const double f_min = 0.5 * s.lower, f_max = 1.5 * s.upper;
    const double step = (f_max - f_min) / steps;

    auto follow = [&](double f, double previous) {
        const auto ss = steady_state(m, detuning, f);
        double best = ss.low();
        for (const auto& b : ss.branches) {
            if (b.stability == Stability::stable &&
                std::abs(b.photon_number - previous) < std::abs(best - previous)) {
                best = b.photon_number;
            }
        }
        return best;
    };
    double n = 0.0, jump_up = -1.0, jump_down = -1.0;
    for (int i = 0; i <= steps; ++i) {
        const double f = f_min + i * step;
        const double next = follow(f, n);
        if (i > 0 && next > 2 * n && jump_up < 0) jump_up = f;
        n = next;
    }
    for (int i = steps; i >= 0; --i) {
        const double f = f_min + i * step;
        const double next = follow(f, n);
        if (next < 0.5 * n && jump_down < 0) jump_down = f;
        n = next;
    }
    CHECK(std::abs(jump_up - s.upper) <= step);
    CHECK(std::abs(jump_down - s.lower) <= step);
}

TEST_CASE("width law") {
    const auto spec = spectrum();
    const double nu3 = spec.frequency(3);
    const auto cold = thermal_environment(0.008, nu3);
    const double d_ref = dykman_reference_detuning(spec, cold, 0.5e-6);
    CHECK(dykman_width(spec, cold, d_ref) == doctest::Approx(0.5e-6).epsilon(1e-10));
    CHECK(d_ref >= 2 * spec.linewidth(3));
    CHECK(d_ref <= 6 * spec.linewidth(3));

    // Hand evaluation of the width law.
    const double ej = spec.e_j;
    const double expected = std::pow(3.0, 2.0 / 3.0) / 4 * std::pow(0.0254 * 0.0254 / 7, 2.0 / 3.0) *
                            std::pow(k_b * cold.t_eff / ej, 2.0 / 3.0) * std::cbrt(d_ref / nu3);
    CHECK(dykman_width(spec, cold, d_ref) == doctest::Approx(expected).epsilon(1e-9));

    CHECK(dykman_width(spec, cold, 2 * d_ref) / dykman_width(spec, cold, d_ref) ==
          doctest::Approx(std::cbrt(2.0)).epsilon(1e-12));

    const double half = h_planck * nu3 / (2 * k_b);
    const double ratio_oracle = std::pow((half / std::tanh(half / 0.4)) / (half / std::tanh(half / 0.008)), 2.0 / 3.0);
    const auto warm = thermal_environment(0.4, nu3);
    CHECK(dykman_width(spec, warm, d_ref) / dykman_width(spec, cold, d_ref) ==
          doctest::Approx(ratio_oracle).epsilon(1e-12));
    CHECK(ratio_oracle == doctest::Approx(2.2).epsilon(0.05));

    CHECK(code_of([&] { dykman_width(spec, cold, 0.0); }) == ErrorCode::NonpositiveDetuning);
    CHECK(code_of([&] { dykman_width(spec, cold, -1.0); }) == ErrorCode::NonpositiveDetuning);
}

TEST_CASE("analytic activation curve") {
    const auto spec = spectrum();
    const auto env = thermal_environment(0.008, spec.frequency(3));
    const auto mode = amplifier_mode(spec);
    const double d_ref = dykman_reference_detuning(spec, env, 0.5e-6);
    const double flux = flux_for_switch(mode, d_ref);
    const double t_pulse = 20.0 / mode.gamma;
    const auto curve = activation_curve(spec, env, flux, t_pulse);

    CHECK(curve.nu_switch == doctest::Approx(mode.nu + d_ref).epsilon(1e-14));
    CHECK(curve(curve.nu_switch) == 1.0);
    CHECK(curve(curve.nu_switch - 1e3) == 1.0);
    CHECK(curve(curve.nu_switch + 1e6) < 1e-12);
    CHECK(curve.width_10_90() == doctest::Approx(dykman_width(spec, env, d_ref) * spec.frequency(3)).epsilon(1e-9));
    CHECK(curve(curve.frequency_at(0.1)) == doctest::Approx(0.1).epsilon(1e-9));
    CHECK(curve(curve.frequency_at(0.9)) == doctest::Approx(0.9).epsilon(1e-9));

    double previous = 1.0;
    for (double x = -5e3; x < 3e4; x += 50.0) {
        const double p = curve(curve.nu_switch + x);
        CHECK(p <= previous);
        CHECK(p >= 0.0);
        previous = p;
    }

    DriveSpec drive{curve.frequency_at(0.5), flux, t_pulse};
    CHECK(switching_probability_analytic(spec, env, drive, t_pulse) == doctest::Approx(0.5).epsilon(1e-9));

    const auto calib = calibrate_switching(spec, env, flux, t_pulse, 4.5e3);
    const auto measured = activation_curve(spec, env, flux, t_pulse, calib);
    CHECK(measured.width_10_90() == doctest::Approx(4.5e3).epsilon(1e-9));
    CHECK(std::abs(measured.width_10_90() - 4.5e3) <= 0.5e3);

    CHECK(code_of([&] { activation_curve(spec, env, 1.0, t_pulse); }) == ErrorCode::BelowBifurcation);
}

TEST_CASE("time step limits") {
    KerrMode m{3, 5.32e9, 212e3, 781.6, 106e3};
    CHECK(max_time_step(m, 0.0) == doctest::Approx(0.02 / m.gamma));
    CHECK(max_time_step(m, 4 * m.gamma) == doctest::Approx(0.02 / m.gamma));
    CHECK(max_time_step(m, 100 * m.gamma) == doctest::Approx(0.5 / (2 * pi_ * 100 * m.gamma)));
}

TEST_CASE("stochastic trajectories") {
    const auto spec = spectrum();
    const auto mode = amplifier_mode(spec);
    const auto env = thermal_environment(0.008, mode.nu);
    const double d_ref = dykman_reference_detuning(spec, env, 0.5e-6);
    const double flux = flux_for_switch(mode, d_ref);
    const double t_pulse = 20.0 / mode.gamma;
    const NoiseSpec quiet;

    SUBCASE("noise-free metastable low branch never switches") {
        ThermalEnvironment silent = env;
        silent.n_eff = 0.0;
        DriveSpec drive{mode.nu + d_ref + 2e3, flux, t_pulse};
        const auto r = simulate_trajectory(spec, silent, drive, quiet, 1);
        CHECK_FALSE(r.switched);
        CHECK(std::isnan(r.switch_time));
    }
    SUBCASE("drive past the switching point switches within a few linewidths") {
        DriveSpec drive{mode.nu + d_ref - 50e3, flux, t_pulse};
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const auto r = simulate_trajectory(spec, env, drive, quiet, seed);
            CHECK(r.switched);
            CHECK(r.switch_time < 10.0 / mode.gamma);
        }
    }
    SUBCASE("determinism") {
        DriveSpec drive{mode.nu + d_ref + 5e3, flux, t_pulse};
        TrajectoryOptions opts;
        opts.record = true;
        opts.record_stride = 7;
        const auto a = simulate_trajectory(spec, env, drive, quiet, 99, opts);
        const auto b = simulate_trajectory(spec, env, drive, quiet, 99, opts);
        REQUIRE(a.trajectory.size() == b.trajectory.size());
        for (std::size_t i = 0; i < a.trajectory.size(); ++i) {
            CHECK(a.trajectory[i].re_alpha == b.trajectory[i].re_alpha);
            CHECK(a.trajectory[i].im_alpha == b.trajectory[i].im_alpha);
        }
        std::ostringstream csv;
        write_trajectory_csv(csv, a);
        CHECK(csv.str().rfind("t_s,re_alpha,im_alpha,n_photons\n", 0) == 0);
    }
    SUBCASE("ensemble statistics do not depend on the worker count") {
        DriveSpec drive{mode.nu + d_ref + 4e3, flux, t_pulse};
        const auto one = switching_ensemble(spec, env, drive, quiet, 5, 64, {}, 1);
        const auto many = switching_ensemble(spec, env, drive, quiet, 5, 64, {}, 4);
        CHECK(one.switches == many.switches);
        CHECK(one.trials == 64);
    }
    SUBCASE("errors") {
        DriveSpec drive{mode.nu + d_ref + 5e3, flux, t_pulse};
        TrajectoryOptions big;
        big.dt = 0.05 / mode.gamma;
        CHECK(code_of([&] { simulate_trajectory(spec, env, drive, quiet, 1, big); }) == ErrorCode::StepSizeTooLarge);
        DriveSpec weak{mode.nu + d_ref, 1.0, t_pulse};
        CHECK(code_of([&] { simulate_trajectory(spec, env, weak, quiet, 1); }) == ErrorCode::NonconvergentBranches);
    }
}

TEST_CASE("thermal noise strength matches the occupation") {
    // A driven-free linear mode relaxes to <|alpha|^2> = n_eff.
    KerrMode lin{3, 5e9, 1e5, 0.0, 5e4};
    const double n_eff = 3.0;
    KerrStepper stepper(lin, 0.0, n_eff, 0.02 / lin.gamma);
    std::mt19937_64 rng(11);
    std::complex<double> a(0.0, 0.0);
    double sum = 0.0;
    const int burn = 2000, samples = 400000;
    for (int i = 0; i < burn; ++i) stepper.step(a, 0.0, rng);
    for (int i = 0; i < samples; ++i) {
        stepper.step(a, 0.0, rng);
        sum += std::norm(a);
    }
    CHECK(sum / samples == doctest::Approx(n_eff).epsilon(0.05));
}

TEST_CASE("noise realizations shift the mode") {
    const auto spec = kerr_coefficients(reference_device(), FluxPoint{0.2}, {3});
    const auto mode = amplifier_mode(spec);
    NoiseRealization r;
    r.flux_offset = 1e-3;
    const auto shifted = shifted_mode(mode, spec, r);
    const double exact = mode_frequency(reference_device(), 3, FluxPoint{0.201});
    CHECK(shifted.nu == doctest::Approx(exact).epsilon(1e-10));

    NoiseSpec spec_noise;
    spec_noise.sigma_flux = 5e-6;
    std::mt19937_64 a(1), b(1);
    const auto x = draw_noise(spec_noise, a);
    const auto y = draw_noise(spec_noise, b, 2e-6);
    CHECK(y.flux_offset == 2e-6);
    CHECK(x.amplitude_factor == y.amplitude_factor);
    CHECK(a() == b());
}
