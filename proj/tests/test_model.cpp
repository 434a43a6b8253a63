#include <doctest.h>

#include "helpers.hpp"
#include "tmadfrc/dft.hpp"
#include "tmadfrc/model.hpp"
#include "tmadfrc/scene.hpp"

using namespace tmadfrc;

TEST_SUITE("model")
{
    TEST_CASE("defaults and derived resolutions")
    {
        const SystemConfig cfg = table1_config();
        CHECK(cfg.num_subcarriers == 64);
        CHECK(cfg.num_rx_antennas == 24);
        CHECK(cfg.cu_angle_deg == 60.0);
        const auto res = derived_resolutions(cfg);
        CHECK(res.range_res_m == doctest::Approx(kSpeedOfLight / (2.0 * 64 * 120e3)).epsilon(1e-14));
        CHECK(res.velocity_res_mps ==
              doctest::Approx(kSpeedOfLight / (2.0 * 24e9 * 256 * 8.92e-6)).epsilon(1e-14));
        REQUIRE(res.angle_grid_deg.size() == 24);
        CHECK(res.angle_grid_deg[0].value() == 0.0);
    }

    TEST_CASE("approximate c gives the tabulated bin sizes")
    {
        const SystemConfig cfg = table2_config();
        const auto res = derived_resolutions(cfg);
        CHECK(res.range_res_m == doctest::Approx(19.53125).epsilon(1e-15));
        CHECK(res.velocity_res_mps == doctest::Approx(2.34375).epsilon(1e-15));
    }

    TEST_CASE("angle bins: half-wavelength array covers sin in [-1, 1)")
    {
        const SystemConfig cfg = table1_config();
        CHECK(angle_bin_sine(cfg, 4) == doctest::Approx(-1.0 / 3.0));
        CHECK(angle_bin_sine(cfg, 20) == doctest::Approx(1.0 / 3.0));
        CHECK(angle_bin_sine(cfg, 12) == doctest::Approx(1.0));
        SystemConfig wide = cfg;
        wide.rx_spacing_wavelengths = 1.0;
        const auto res = derived_resolutions(wide);
        CHECK(res.angle_grid_deg[12].has_value());
        CHECK_FALSE(derived_resolutions(cfg).angle_grid_deg.empty());
    }

    TEST_CASE("validate_config names the offending field")
    {
        SystemConfig cfg = table1_config();
        cfg.num_subcarriers = 0;
        CHECK_THROWS_WITH_AS(validate_config(cfg), doctest::Contains("num_subcarriers"), ConfigError);
        cfg = table1_config();
        cfg.symbol_duration_s = 1.0 / cfg.subcarrier_spacing_hz * 0.5;
        CHECK_THROWS_AS(validate_config(cfg), ConfigError);
        cfg = table1_config();
        cfg.symbol_duration_s = 1.0 / cfg.subcarrier_spacing_hz;
        CHECK_NOTHROW(validate_config(cfg));
    }

    TEST_CASE("config JSON round trip and strict keys")
    {
        SystemConfig cfg = table2_config();
        cfg.narrowband_doppler = true;
        const nlohmann::json j = cfg;
        CHECK(j.get<SystemConfig>() == cfg);
        CHECK_THROWS_AS(config_from_json_text(R"({"num_subcarrier": 64})"), ConfigError);
        CHECK_THROWS_AS(config_from_json_text("{not json"), ConfigError);
        CHECK(config_from_json_text("{}") == table1_config());
    }

    TEST_CASE("target JSON uses [re, im] reflectivity")
    {
        const Target t{10.0, 40.0, -3.0, cplx(0.5, -2.0)};
        const nlohmann::json j = t;
        CHECK(j["beta"][1].get<double>() == -2.0);
        CHECK(j.get<Target>() == t);
    }
}

TEST_SUITE("dft")
{
    TEST_CASE("round trip to 1e-12")
    {
        for (std::size_t n : {4u, 24u, 64u, 256u}) {
            CAPTURE(n);
            const auto g = testutil::random_complex(n, 1, 100 + n);
            const auto& x = g.values();
            const auto back = idft(dft(x));
            CHECK(testutil::max_abs_diff(back, x) < 1e-12);
        }
    }

    TEST_CASE("radix-2 agrees with the direct transform")
    {
        for (std::size_t n : {2u, 8u, 64u, 256u}) {
            const auto x = testutil::random_complex(n, 1, n).values();
            CHECK(testutil::max_abs_diff(dft_radix2(x, DftDirection::forward), dft_direct(x, DftDirection::forward)) <
                  1e-10);
            CHECK(testutil::max_abs_diff(dft_radix2(x, DftDirection::inverse), dft_direct(x, DftDirection::inverse)) <
                  1e-10);
        }
        const std::vector<cplx> odd(6, cplx{1.0, 0.0});
        CHECK_THROWS(dft_radix2(odd, DftDirection::forward));
    }

    TEST_CASE("known transforms")
    {
        std::vector<cplx> impulse(24, 0.0);
        impulse[0] = 1.0;
        for (const auto& v : dft(impulse)) CHECK(std::abs(v - cplx{1.0, 0.0}) < 1e-15);

        // A single tone at bin 5 lands entirely in bin 5.
        std::vector<cplx> tone(24);
        for (std::size_t n = 0; n < 24; ++n) tone[n] = std::polar(1.0, 2.0 * kPi * 5.0 * n / 24.0);
        const auto spec = dft(tone);
        for (std::size_t k = 0; k < 24; ++k) CHECK(std::abs(spec[k]) == doctest::Approx(k == 5 ? 24.0 : 0.0).epsilon(1e-12));
    }
}
