#include <doctest.h>

#include <cmath>
#include <random>

#include "kerrsim/error.hpp"
#include "kerrsim/measurement.hpp"
#include "kerrsim/operating_point.hpp"

using namespace kerrsim;

namespace {

struct Fixture {
    OperatingPoint op = make_operating_point(reference_device(), {});
    PulseSpec pulse = default_pulse(op.mode, op.nu_switch, op.photon_flux);
    ActivationCurve curve = activation_curve(op.spectrum, op.env, op.photon_flux, pulse.t_measure);
};

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace

TEST_CASE("pulse validation and reset") {
    Fixture f;
    CHECK_NOTHROW(f.pulse.validate(f.op.mode.gamma));
    CHECK(f.pulse.t_measure == doctest::Approx(20.0 / f.op.mode.gamma));
    CHECK(f.pulse.t_latch == doctest::Approx(100.0 / f.op.mode.gamma));
    CHECK(f.pulse.latch_power_fraction == 0.8);

    PulseSpec fast = f.pulse;
    fast.repetition_rate = 5e3;  // period shorter than the pulse itself
    CHECK_THROWS_AS(fast.validate(f.op.mode.gamma), Error);
    PulseSpec bad = f.pulse;
    bad.latch_power_fraction = 1.5;
    CHECK_THROWS_AS(bad.validate(f.op.mode.gamma), Error);

    const auto ss = steady_state(f.op.mode, f.op.detuning + 3e3, drive_strength(f.op.mode, f.op.photon_flux));
    REQUIRE(ss.bistable());
    CHECK(pre_pulse_photons(f.pulse, f.op.mode, ss.high()) < 1e-3 * ss.low());

    PulseSpec tight = f.pulse;
    tight.repetition_rate = 1.0 / (tight.duration() + 10.0 / f.op.mode.gamma);
    CHECK_NOTHROW(tight.validate(f.op.mode.gamma));
    CHECK(pre_pulse_photons(tight, f.op.mode, ss.high()) < 1e-3 * ss.low());
}

TEST_CASE("clopper-pearson intervals") {
    const auto zero = clopper_pearson(0, 1000);
    CHECK(zero.low == 0.0);
    CHECK(zero.high == doctest::Approx(1.0 - std::pow(0.025, 1.0 / 1000)).epsilon(1e-10));
    CHECK(zero.high < 0.004);
    const auto all = clopper_pearson(1000, 1000);
    CHECK(all.high == 1.0);
    CHECK(all.low == doctest::Approx(std::pow(0.025, 1.0 / 1000)).epsilon(1e-10));

    const auto tenth = clopper_pearson(100, 1000);
    const double half_width = 0.5 * (tenth.high - tenth.low);
    CHECK(half_width == doctest::Approx(0.019).epsilon(0.05));
    CHECK(tenth.low < 0.1);
    CHECK(tenth.high > 0.1);

    // Exact-tail oracle: P(X >= k | p = low) = 0.025 for n = 20, k = 7.
    const auto ci = clopper_pearson(7, 20);
    auto binom_tail = [](int k, int n, double p) {
        double s = 0.0;
        for (int j = k; j <= n; ++j) s += std::exp(std::lgamma(n + 1.0) - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0) +
                                                   j * std::log(p) + (n - j) * std::log1p(-p));
        return s;
    };
    CHECK(binom_tail(7, 20, ci.low) == doctest::Approx(0.025).epsilon(1e-8));
    CHECK(1.0 - binom_tail(8, 20, ci.high) == doctest::Approx(0.025).epsilon(1e-8));
}

TEST_CASE("width extraction") {
    SUBCASE("gaussian cdf") {
        const double sigma = 1.7e3, center = 5.3e9;
        std::vector<double> nu, p;
        for (int i = 0; i <= 4000; ++i) {
            const double x = -6.0 + 12.0 * i / 4000.0;
            nu.push_back(center + sigma * x);
            p.push_back(normal_sf(x));
        }
        const auto c = make_curve(nu, p);
        // z(0.9) - z(0.1) from standard normal tables.
        CHECK(c.width_10_90 == doctest::Approx(2.5631031310892 * sigma).epsilon(1e-6));
        CHECK(c.nu_50 == doctest::Approx(center).epsilon(1e-12));

        // Increasing curves give the same width.
        std::vector<double> rising(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) rising[i] = 1.0 - p[i];
        CHECK(make_curve(nu, rising).width_10_90 == doctest::Approx(c.width_10_90).epsilon(1e-9));
    }
    SUBCASE("step function") {
        std::vector<double> nu, p;
        for (int i = 0; i < 40; ++i) {
            nu.push_back(i * 10.0);
            p.push_back(i < 20 ? 1.0 : 0.0);
        }
        CHECK(width_10_90(make_curve(nu, p)) <= 10.0);
    }
    SUBCASE("range not spanned") {
        const auto c = make_curve({1, 2, 3}, {0.5, 0.4, 0.3});
        CHECK_THROWS_AS(width_10_90(c), Error);
    }
    SUBCASE("grid refinement") {
        Fixture f;
        for (std::size_t n : {20, 40, 80}) {
            const auto grid = scurve_grid(f.curve, n);
            const auto fine = scurve_grid(f.curve, 2 * n - 1);
            std::vector<double> p, pf;
            for (double v : grid) p.push_back(f.curve(v));
            for (double v : fine) pf.push_back(f.curve(v));
            const double w = make_curve(grid, p).width_10_90;
            const double wf = make_curve(fine, pf).width_10_90;
            CHECK(std::abs(w - wf) / wf < 0.02);
            CHECK(wf == doctest::Approx(f.curve.width_10_90()).epsilon(0.02));
        }
    }
    SUBCASE("non-monotone noise is pooled") {
        const auto c = make_curve({0, 1, 2, 3, 4, 5}, {1.0, 0.95, 0.97, 0.3, 0.05, 0.0}, 1000);
        CHECK(c.width_10_90 > 0.0);
        CHECK(c.nu_50 > 2.0);
        CHECK(c.nu_50 < 3.5);
    }
}

TEST_CASE("switching probability estimates") {
    Fixture f;
    AcquisitionOptions opts;
    NoiseSpec quiet;

    SUBCASE("zero regime") {
        PulseSpec p = f.pulse;
        p.nu_d = f.curve.nu_switch + 20 * f.curve.width_10_90();
        const auto est = switching_probability(p, f.op.spectrum, f.op.env, quiet, opts);
        CHECK(est.switches == 0);
        CHECK(est.ci.high < 0.004);
    }
    SUBCASE("coverage at one half") {
        PulseSpec p = f.pulse;
        p.nu_d = f.curve.frequency_at(0.5);
        int covered = 0;
        for (std::uint64_t s = 0; s < 100; ++s) {
            opts.master_seed = 1000 + s;
            const auto est = switching_probability(p, f.op.spectrum, f.op.env, quiet, opts);
            covered += (est.ci.low <= 0.5 && 0.5 <= est.ci.high) ? 1 : 0;
        }
        CHECK(covered >= 93);
    }
    SUBCASE("estimator consistency") {
        PulseSpec p = f.pulse;
        p.nu_d = f.curve.frequency_at(0.3);
        opts.n_pulses = 100000;
        const auto est = switching_probability(p, f.op.spectrum, f.op.env, quiet, opts);
        CHECK(std::abs(est.p_s - 0.3) < 3.0 * std::sqrt(0.3 * 0.7 / 1e5));
    }
    SUBCASE("deterministic and independent of the worker count") {
        PulseSpec p = f.pulse;
        p.nu_d = f.curve.frequency_at(0.4);
        opts.jobs = 1;
        const auto a = switching_probability(p, f.op.spectrum, f.op.env, quiet, opts);
        opts.jobs = 3;
        const auto b = switching_probability(p, f.op.spectrum, f.op.env, quiet, opts);
        CHECK(a.switches == b.switches);
        opts.master_seed = 2;
        const auto c = switching_probability(p, f.op.spectrum, f.op.env, quiet, opts);
        CHECK(c.switches != a.switches);
    }
}

TEST_CASE("s-curves") {
    Fixture f;
    AcquisitionOptions opts;
    NoiseSpec quiet;
    const auto grid = scurve_grid(f.curve, 31);

    const auto c = s_curve(grid, f.pulse, f.op.spectrum, f.op.env, quiet, opts);
    int inside = 0;
    for (const auto& pt : c.points) {
        const double truth = f.curve(pt.nu_d);
        inside += (pt.ci_low <= truth && truth <= pt.ci_high) ? 1 : 0;
        CHECK(pt.p_s >= 0.0);
        CHECK(pt.p_s <= 1.0);
    }
    CHECK(inside >= static_cast<int>(0.9 * c.points.size()));
    CHECK(c.width_10_90 == doctest::Approx(f.curve.width_10_90()).epsilon(0.15));

    std::vector<double> narrow(grid.begin() + 12, grid.begin() + 16);
    CHECK_THROWS_AS(s_curve(narrow, f.pulse, f.op.spectrum, f.op.env, quiet, opts), Error);

    SUBCASE("averaging identical noise-free curves") {
        std::vector<double> p;
        const auto fine = scurve_grid(f.curve, 201);
        for (double v : fine) p.push_back(f.curve(v));
        const auto exact = make_curve(fine, p, 1000);
        std::vector<SCurve> copies(50, exact);
        CHECK(average_curves(copies).width_10_90 == doctest::Approx(exact.width_10_90).epsilon(0.01));
    }
    SUBCASE("averaged monte carlo curves") {
        std::vector<SCurve> curves;
        for (std::size_t k = 0; k < 50; ++k) curves.push_back(s_curve(grid, f.pulse, f.op.spectrum, f.op.env, quiet, opts, k));
        const auto avg = average_curves(curves);
        CHECK(avg.width_10_90 == doctest::Approx(f.curve.width_10_90()).epsilon(0.03));
        const auto summary = summarize_curves(curves, 7);
        CHECK(summary.p_value > 0.001);
        CHECK(summary.averaged_width == avg.width_10_90);
        CHECK(summary.dof == 49);
    }
}

TEST_CASE("pulses and homodyne discrimination") {
    Fixture f;
    NoiseSpec quiet;
    DetectionSpec det;

    const double fidelity = discrimination_fidelity(f.op.mode, f.pulse, det);
    CHECK(fidelity > 0.99);
    const Discriminator disc = make_discriminator(f.op.mode, f.pulse);
    CHECK(disc.separation > 0.0);
    CHECK(std::abs(std::abs(disc.axis) - 1.0) < 1e-12);

    SUBCASE("zero drive power") {
        PulseSpec off = f.pulse;
        off.plateau_power = 0.0;
        const auto r = run_pulse(off, f.op.spectrum, f.op.env, quiet, 3, det, std::nullopt, true);
        CHECK_FALSE(r.switched);
        double mean = 0.0, sq = 0.0;
        for (const auto& s : r.trace) {
            mean += s.x;
            sq += s.x * s.x;
        }
        mean /= r.trace.size();
        const double sd = std::sqrt(sq / r.trace.size() - mean * mean);
        CHECK(std::abs(mean) < 1.0);
        CHECK(sd == doctest::Approx(std::sqrt(20.0)).epsilon(0.15));
    }
    SUBCASE("beyond the switching point") {
        PulseSpec past = f.pulse;
        past.nu_d = f.curve.nu_switch - 20e3;
        int switched = 0;
        for (std::uint64_t s = 0; s < 100; ++s) {
            switched += run_pulse(past, f.op.spectrum, f.op.env, quiet, s, det).switched ? 1 : 0;
        }
        CHECK(switched == 100);
    }
    SUBCASE("deep in the metastable region") {
        PulseSpec hold = f.pulse;
        hold.nu_d = f.curve.nu_switch + 30e3;
        int switched = 0;
        for (std::uint64_t s = 0; s < 50; ++s) {
            const auto r = run_pulse(hold, f.op.spectrum, f.op.env, quiet, s, det);
            switched += r.switched ? 1 : 0;
            CHECK(r.switched == r.switched_dynamics);
        }
        CHECK(switched == 0);
    }
    SUBCASE("decision noise matches the analytic overlap") {
        // Latch means of non-switching pulses scatter by sqrt(noise / samples).
        PulseSpec hold = f.pulse;
        hold.nu_d = f.curve.nu_switch + 30e3;
        DetectionSpec noisy{2e4, 0.0};
        const double fid = discrimination_fidelity(f.op.mode, hold, noisy);
        int errors = 0;
        const int trials = 200;
        for (int s = 0; s < trials; ++s) {
            errors += run_pulse(hold, f.op.spectrum, f.op.env, quiet, 500 + s, noisy).switched ? 1 : 0;
        }
        const double expected = 1.0 - fid;
        CHECK(std::abs(errors / double(trials) - expected) < 4.0 * std::sqrt(expected * (1 - expected) / trials) + 0.01);
    }
}
