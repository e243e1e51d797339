#include <doctest.h>

#include <cmath>
#include <set>

#include "kerrsim/config.hpp"
#include "kerrsim/error.hpp"
#include "kerrsim/experiments.hpp"

using namespace kerrsim;

namespace {

ErrorCode code_of(const std::string& text) {
    try {
        parse_config(text);
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error raised");
    return ErrorCode::InvalidParameter;
}

}  // namespace

TEST_CASE("config defaults and round trip") {
    const ExperimentConfig d = parse_config("");
    CHECK(d.device.n_squids == reference_device().n_squids);
    CHECK(d.run.seed == 1);
    CHECK(d.spectroscopy.modes == std::vector<int>{1, 5, 7, 9});

    const std::string text = R"(
# comment
[run]
seed = 42
n_pulses = 200
engine = trajectory
[operating_point]
flux = 0.2
temperature_mK = 50
[noise]
sigma_flux_uphi0 = 30
[noise_sweep]
axis = temperature
values = 8, 25, 50
[tune]
modes = 3
)";
    const ExperimentConfig c = parse_config(text);
    CHECK(c.run.seed == 42);
    CHECK(c.run.n_pulses == 200);
    CHECK(c.run.engine == Engine::trajectory);
    CHECK(c.operating_point.flux == doctest::Approx(0.2));
    CHECK(c.operating_point.temperature == doctest::Approx(0.05));
    CHECK(c.noise.sigma_flux == doctest::Approx(30e-6));
    CHECK(c.noise_sweep.axis == SweepAxis::temperature);
    CHECK(c.noise_sweep.values == std::vector<double>{8, 25, 50});
    CHECK(c.tune.modes == std::vector<int>{3});

    // dump -> parse -> dump is a fixed point
    const std::string once = dump_config(c);
    CHECK(dump_config(parse_config(once)) == once);
    CHECK(parse_config(once).device.i_c == doctest::Approx(c.device.i_c).epsilon(1e-12));
}

TEST_CASE("config rejects bad input") {
    CHECK(code_of("[run]\nbogus = 1\n") == ErrorCode::ConfigError);
    CHECK(code_of("[nosuch]\nx = 1\n") == ErrorCode::ConfigError);
    CHECK(code_of("[run]\nseed = abc\n") == ErrorCode::ConfigError);
    CHECK(code_of("[run]\nengine = magic\n") == ErrorCode::ConfigError);
    CHECK(code_of("[operating_point]\nflux = 0.5\n") == ErrorCode::ConfigError);
    CHECK(is_config_error(ErrorCode::ConfigError));
    CHECK(is_config_error(ErrorCode::IoError));
    CHECK_FALSE(is_config_error(ErrorCode::NotConverged));
    CHECK_THROWS_AS(load_config("/nonexistent/file.ini"), Error);
    CHECK(parse_axis("power") == SweepAxis::power);
    CHECK(axis_name(SweepAxis::flux) == "flux");
}

TEST_CASE("csv helpers") {
    const auto t = parse_csv("# generated now\na,b\n1, 2\n\n3,4\n");
    REQUIRE(t.header == std::vector<std::string>{"a", "b"});
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0][1] == "2");
    CHECK(t.column({"x", "b"}) == 1u);
    CHECK_FALSE(t.column({"x"}).has_value());
    CHECK_THROWS_AS(parse_csv("a,b\n1\n"), Error);
    CHECK(format_number(0.1) == "0.1");
    CHECK(format_number(std::nan("")) == "nan");
}

TEST_CASE("tune output") {
    ExperimentConfig c;
    c.tune.phi_points = 10;
    const auto out = cmd_tune(c);
    REQUIRE(out.size() == 1);
    const auto t = parse_csv(out[0].content);
    CHECK(t.rows.size() == 10 * c.tune.modes.size());
    // odd modes fall with flux, even modes do not move
    const std::size_t k = c.tune.modes.size();
    for (std::size_t m = 0; m < k; ++m) {
        const bool odd = c.tune.modes[m] % 2 != 0;
        const double first = std::stod(t.rows[m][2]);
        double prev = first;
        for (std::size_t i = m + k; i < t.rows.size(); i += k) {
            const double f = std::stod(t.rows[i][2]);
            if (odd) {
                CHECK(f < prev);
            } else {
                CHECK(f == doctest::Approx(first).epsilon(1e-12));
            }
            prev = f;
        }
    }
}

TEST_CASE("scurve and calibrate outputs are deterministic") {
    ExperimentConfig c;
    c.scurve.curves = 3;
    c.scurve.points = 21;
    c.scurve.bootstrap = 50;
    c.run.n_pulses = 300;
    c.run.jobs = 1;
    const auto a = cmd_scurve(c);
    c.run.jobs = 3;
    const auto b = cmd_scurve(c);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].name == b[i].name);
        CHECK(a[i].content == b[i].content);
    }
    const auto widths = parse_csv(a[2].content);
    CHECK(widths.rows.size() == 3);

    const auto cal = cmd_calibrate(ExperimentConfig{});
    REQUIRE(cal.size() == 2);
    const auto back = parse_config(cal[1].content);
    CHECK(back.device.nu1_bare == doctest::Approx(reference_device().nu1_bare).epsilon(1e-9));
}
