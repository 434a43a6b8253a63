#include <doctest.h>

#include <algorithm>

#include "helpers.hpp"
#include "tmadfrc/coarse.hpp"
#include "tmadfrc/comms.hpp"
#include "tmadfrc/scene.hpp"

using namespace tmadfrc;

namespace {

struct Row {
    std::size_t angle_bin, range_bin;
    long velocity_bin;
    bool operator<(const Row& o) const
    {
        return std::tie(angle_bin, range_bin, velocity_bin) < std::tie(o.angle_bin, o.range_bin, o.velocity_bin);
    }
    bool operator==(const Row&) const = default;
};

std::vector<Row> rows(const CoarseResult& r)
{
    std::vector<Row> out;
    for (const auto& e : r.estimates) out.push_back({e.angle_bin, e.range_bin, e.velocity_bin});
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

TEST_SUITE("coarse")
{
    TEST_CASE("peak picking")
    {
        const std::vector<double> mag{0.1, 0.2, 5.0, 0.3, 0.1, 4.0, 4.0, 0.2, 0.1, 0.1};
        CHECK(find_peaks(mag, {}) == std::vector<std::size_t>{2, 5});
        std::vector<bool> excluded(mag.size(), false);
        excluded[2] = true;
        CHECK(find_peaks(mag, {}, excluded) == std::vector<std::size_t>{5});
        CHECK(find_peaks(std::vector<double>(8, 0.0), {}).empty());
        // Wrap-around neighbour suppresses the edge.
        const std::vector<double> edge{3.0, 0.1, 0.1, 0.1, 0.1, 4.0};
        CHECK(find_peaks(edge, {}) == std::vector<std::size_t>{5});
    }

    TEST_CASE("reference scene lands in the expected bins")
    {
        const SystemConfig cfg = table2_config();
        const auto p = design_pattern(cfg, cfg.cu_angle_deg);
        const auto d = random_frame(cfg, 1);
        const auto r = coarse_pipeline(radar_returns(d, p, cfg, table2_scene(1)), d, p, cfg);
        CHECK(r.failures.empty());
        CHECK(rows(r) == std::vector<Row>{{6, 6, 9}, {20, 3, -4}, {20, 3, 4}});
        for (const auto& e : r.estimates) {
            if (e.angle_bin == 20) {
                CHECK(std::sin(deg_to_rad(e.angle_deg)) == doctest::Approx(1.0 / 3.0));
                CHECK(e.range_m == doctest::Approx(58.59375));
            } else {
                CHECK(e.angle_deg == doctest::Approx(-30.0));
                CHECK(e.range_m == doctest::Approx(117.1875));
                CHECK(e.velocity_mps == doctest::Approx(21.09375));
            }
        }
    }

    TEST_CASE("on-grid noiseless target is recovered exactly")
    {
        SystemConfig cfg = table2_config();
        const auto p = design_pattern(cfg, cfg.cu_angle_deg);
        const auto d = random_frame(cfg, 2);
        const auto res = derived_resolutions(cfg);
        Scene s;
        s.noiseless = true;
        s.targets.push_back({-30.0, 5 * res.range_res_m, -7 * res.velocity_res_mps, cplx(1.0, 0.0)});
        cfg.narrowband_doppler = true;
        const auto r = coarse_pipeline(radar_returns(d, p, cfg, s), d, p, cfg);
        CHECK(rows(r) == std::vector<Row>{{6, 5, -7}});
    }

    TEST_CASE("detected bins do not depend on reflectivity scale")
    {
        const SystemConfig cfg = table2_config();
        const auto p = design_pattern(cfg, cfg.cu_angle_deg);
        const auto d = random_frame(cfg, 3);
        Scene s = table2_scene(3);
        const auto base = rows(coarse_pipeline(radar_returns(d, p, cfg, s), d, p, cfg));
        for (cplx beta : {cplx(1e-3, 0.0), cplx(0.0, 42.0), cplx(-5.0, 5.0)}) {
            Scene scaled = s;
            for (auto& t : scaled.targets) t.reflectivity = beta;
            CHECK(rows(coarse_pipeline(radar_returns(d, p, cfg, scaled), d, p, cfg)) == base);
        }
    }

    TEST_CASE("empty returns have no occupied bin")
    {
        const SystemConfig cfg = table1_config();
        const auto p = design_pattern(cfg, cfg.cu_angle_deg);
        const auto d = random_frame(cfg, 4);
        const AntennaGrid zero(cfg.num_rx_antennas, cfg.num_subcarriers, cfg.num_ofdm_symbols);
        try {
            coarse_pipeline(zero, d, p, cfg);
            FAIL("expected no_peaks");
        } catch (const EstimationError& e) {
            CHECK(e.kind() == EstimationError::Kind::no_peaks);
        }
    }

    TEST_CASE("descrambling guard")
    {
        SymbolGrid amp(4, 8), scr(4, 8);
        for (auto& v : amp.values()) v = cplx(2.0, 0.0);
        for (auto& v : scr.values()) v = cplx(0.0, 1.0);
        scr(0, 0) = 1e-9;
        const auto out = descramble(amp, scr);
        CHECK(out.guarded_count == 1);
        CHECK(out.values(0, 0) == cplx(0.0, 0.0));
        CHECK(out.values(1, 0) == cplx(0.0, -2.0));
        for (auto& v : scr.values()) v = 0.0;
        try {
            descramble(amp, scr);
            FAIL("expected degenerate_bin");
        } catch (const EstimationError& e) {
            CHECK(e.kind() == EstimationError::Kind::degenerate_bin);
        }
    }

    TEST_CASE("spectrum CSV")
    {
        const std::vector<cplx> s{cplx(1.0, 0.0), cplx(0.0, 2.0)};
        const std::string csv = spectrum_csv(s);
        CHECK(csv.rfind("bin_index,magnitude,phase\n", 0) == 0);
        CHECK(csv.find("1,2,1.5707963267948966") != std::string::npos);
    }
}
