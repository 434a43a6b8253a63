#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "tmadfrc/coarse.hpp"
#include "tmadfrc/comms.hpp"
#include "tmadfrc/dft.hpp"
#include "tmadfrc/refine.hpp"
#include "tmadfrc/rng.hpp"
#include "tmadfrc/scene.hpp"
#include "tmadfrc/tma.hpp"

using namespace tmadfrc;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const char* title, double limit_s, const std::function<Outcome()>& body)
{
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < limit_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failures;
    std::printf("criterion %d [%s]: %s | %s | %.2f s (limit %.0f s)%s\n", id, title, pass ? "PASS" : "FAIL",
                o.detail.c_str(), secs, limit_s, in_time ? "" : " TIMEOUT");
    std::fflush(stdout);
}

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

SymbolGrid random_complex(std::size_t ns, std::size_t np, std::uint64_t seed)
{
    Rng rng(seed);
    SymbolGrid g(ns, np);
    for (auto& v : g.values()) v = rng.complex_gaussian(1.0);
    return g;
}

// ---------------------------------------------------------------- 1

Outcome dm_condition()
{
    std::string detail;
    bool ok = true;
    for (std::size_t nt : {2u, 4u, 8u, 16u}) {
        SystemConfig cfg = table1_config();
        cfg.num_tx_antennas = nt;
        const auto p = design_pattern(cfg, cfg.cu_angle_deg);
        const long mmax = static_cast<long>(cfg.num_subcarriers) - 1;
        const double v0 = std::abs(harmonic_coefficient(p, cfg, 0, cfg.cu_angle_deg));
        double leak = 0.0;
        for (long m = -mmax; m <= mmax; ++m)
            if (m != 0) leak = std::max(leak, std::abs(harmonic_coefficient(p, cfg, m, cfg.cu_angle_deg)));

        Rng rng(derive_seed(1000 + nt, "acceptance-dm"));
        const double s0 = std::sin(deg_to_rad(cfg.cu_angle_deg));
        double weakest = 1e300;
        for (int k = 0; k < 50;) {
            const double theta = -90.0 + 180.0 * rng.uniform();
            if (std::abs(std::sin(deg_to_rad(theta)) - s0) < 1e-6) continue;
            ++k;
            double strongest = 0.0;
            for (long m = -mmax; m <= mmax; ++m)
                if (m != 0) strongest = std::max(strongest, std::abs(harmonic_coefficient(p, cfg, m, theta)));
            weakest = std::min(weakest, strongest);
        }
        const bool this_ok = leak <= 1e-10 * v0 && weakest > 1e-3 * v0;
        ok &= this_ok;
        detail += fmt("N_t=%zu leak/V0=%.1e probe-min/V0=%.3f; ", nt, leak / v0, weakest / v0);
    }
    return {ok, detail};
}

// ---------------------------------------------------------------- 2

Outcome time_frequency()
{
    double worst = 0.0;
    for (std::size_t ns : {4u, 8u, 64u}) {
        SystemConfig cfg = table1_config();
        cfg.num_subcarriers = ns;
        cfg.num_ofdm_symbols = 2;
        const auto p = design_pattern(cfg, cfg.cu_angle_deg);
        const auto d = random_complex(ns, 2, ns);
        Rng rng(derive_seed(ns, "acceptance-tf"));
        for (int k = 0; k < 20; ++k) {
            const double theta = -90.0 + 180.0 * rng.uniform();
            const auto a = scramble_symbols(d, p, cfg, theta);
            const auto b = time_domain_oracle(d, p, cfg, theta, 8);
            for (std::size_t i = 0; i < a.values().size(); ++i)
                worst = std::max(worst, std::abs(a.values()[i] - b.values()[i]));
        }
    }
    return {worst < 1e-9, fmt("max abs error %.2e over N_s in {4,8,64} x 20 directions (bound 1e-9)", worst)};
}

// ---------------------------------------------------------------- 3

// Bin each scene target to the nearest DFT bin of the configured grids.
std::multiset<std::tuple<long, long, long>> oracle_bins(const SystemConfig& cfg, const Scene& scene)
{
    const auto res = derived_resolutions(cfg);
    std::multiset<std::tuple<long, long, long>> out;
    std::set<std::tuple<long, long, long>> seen;
    for (const auto& t : scene.targets) {
        const double omega = -cfg.rx_spacing_wavelengths * std::sin(deg_to_rad(t.angle_deg));
        long k = std::lround(omega * static_cast<double>(cfg.num_rx_antennas));
        k = (k % static_cast<long>(cfg.num_rx_antennas) + static_cast<long>(cfg.num_rx_antennas)) %
            static_cast<long>(cfg.num_rx_antennas);
        const auto row = std::make_tuple(k, std::lround(t.range_m / res.range_res_m),
                                         std::lround(t.velocity_mps / res.velocity_res_mps));
        if (seen.insert(row).second) out.insert(row);
    }
    return out;
}

std::multiset<std::tuple<long, long, long>> coarse_bins(const CoarseResult& r)
{
    std::multiset<std::tuple<long, long, long>> out;
    for (const auto& e : r.estimates)
        out.insert({static_cast<long>(e.angle_bin), static_cast<long>(e.range_bin), e.velocity_bin});
    return out;
}

Outcome table2_coarse()
{
    const SystemConfig cfg = table2_config();
    const auto p = design_pattern(cfg, cfg.cu_angle_deg);
    const auto d = random_frame(cfg, 1);
    const auto r = coarse_pipeline(radar_returns(d, p, cfg, table2_scene(1)), d, p, cfg);

    std::set<double> sines, ranges;
    std::multiset<double> velocities;
    for (const auto& e : r.estimates) {
        sines.insert(std::round(std::sin(deg_to_rad(e.angle_deg)) * 1e12) / 1e12);
        ranges.insert(static_cast<double>(e.range_bin));
        velocities.insert(e.velocity_mps);
    }
    const bool angles_ok = sines == std::set<double>{-0.5, std::round(1e12 / 3.0) / 1e12};
    const bool ranges_ok = ranges == std::set<double>{3.0, 6.0};
    const bool vel_ok = velocities == std::multiset<double>{-9.375, 9.375, 21.09375};

    // Same scene at the tabulated symbol duration: compare with oracle bins.
    SystemConfig t1 = table1_config();
    t1.approx_speed_of_light = true;
    const auto p1 = design_pattern(t1, t1.cu_angle_deg);
    const auto d1 = random_frame(t1, 1);
    const auto r1 = coarse_pipeline(radar_returns(d1, p1, t1, table2_scene(1)), d1, p1, t1);
    const bool oracle_ok = coarse_bins(r1) == oracle_bins(t1, table2_scene(1));
    std::string vb;
    for (const auto& e : r1.estimates) vb += fmt("%ld ", e.velocity_bin);

    std::string rows;
    for (const auto& e : r.estimates) rows += fmt("(%.2f deg, %.2f m, %.3f m/s) ", e.angle_deg, e.range_m, e.velocity_mps);
    return {angles_ok && ranges_ok && vel_ok && oracle_ok && r.failures.empty(),
            fmt("T_p=1/96000: %s| T_p=8.92us velocity bins %s%s", rows.c_str(), vb.c_str(),
                oracle_ok ? "match oracle" : "MISMATCH oracle")};
}

// ---------------------------------------------------------------- 4

struct Expect {
    double angle, range, velocity;
    bool check_angle;
};

bool refined_ok(const EstimateSet& e, double vel_step)
{
    const std::vector<Expect> want{{20.0, 50.00, -10.08, true}, {22.0, 60.16, 10.08, true}, {-30.0, 120.12, 19.92, false}};
    std::vector<bool> used(e.refined.size(), false);
    for (const auto& w : want) {
        bool hit = false;
        for (std::size_t i = 0; i < e.refined.size() && !hit; ++i) {
            const auto& r = e.refined[i];
            if (used[i]) continue;
            const bool a = w.check_angle ? std::abs(r.angle_deg - w.angle) <= 0.1 + 1e-9 : std::abs(r.angle_deg - w.angle) < 2.0;
            if (a && std::abs(r.range_m - w.range) <= 0.2 + 1e-9 && std::abs(r.velocity_mps - w.velocity) <= vel_step + 1e-9)
                used[i] = hit = true;
        }
        if (!hit) return false;
    }
    return true;
}

Outcome table2_refined()
{
    const SystemConfig cfg = table2_config();
    const auto p = design_pattern(cfg, cfg.cu_angle_deg);
    const double vel_step = derived_resolutions(cfg).velocity_res_mps / 10.0;
    int pass_default = 0, pass_full = 0;
    std::string misses;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto d = random_frame(cfg, seed);
        const auto y = radar_returns(d, p, cfg, table2_scene(seed));
        const auto r = algorithm1(y, d, p, cfg);
        if (refined_ok(r.estimates, vel_step)) {
            ++pass_default;
        } else if (misses.size() < 200) {
            misses += fmt("seed %llu:", static_cast<unsigned long long>(seed));
            for (const auto& e : r.estimates.refined) misses += fmt(" %.1f/%.2f/%.2f", e.angle_deg, e.range_m, e.velocity_mps);
            misses += "; ";
        }
        Algorithm1Options full;
        full.music.full_frame = true;
        pass_full += refined_ok(algorithm1(y, d, p, cfg, full).estimates, vel_step);
    }
    return {pass_default >= 18,
            fmt("one-symbol snapshots (default): %d/20 inside tolerance (need 18); full-frame snapshots: %d/20 | %s",
                pass_default, pass_full, misses.c_str())};
}

// ---------------------------------------------------------------- 5

Outcome zero_denominators()
{
    const SystemConfig cfg = table1_config();
    const auto p = design_pattern(cfg, cfg.cu_angle_deg);
    const double theta = 20.0;
    const HarmonicTable table(p, cfg, theta);
    const std::size_t frames = 1000;
    const unsigned n_threads = std::max(1u, std::thread::hardware_concurrency());
    std::vector<std::size_t> below_01(n_threads, 0), below_001(n_threads, 0);
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_threads; ++t) {
        pool.emplace_back([&, t] {
            for (std::size_t f = t; f < frames; f += n_threads) {
                const auto d = random_frame(cfg, derive_seed(5, "acceptance-zero", f));
                for (const auto& v : scramble_symbols(d, table).values()) {
                    const double a = std::abs(v);
                    below_01[t] += a < 0.01;
                    below_001[t] += a < 0.001;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    std::size_t n01 = 0, n001 = 0;
    for (unsigned t = 0; t < n_threads; ++t) n01 += below_01[t], n001 += below_001[t];
    const double total = static_cast<double>(frames * cfg.num_subcarriers * cfg.num_ofdm_symbols);
    const double frac = 100.0 * static_cast<double>(n01) / total;
    return {frac < 0.05 && n001 == 0,
            fmt("theta=20 deg, %.0f symbols: |d'|<0.01 fraction %.4f%% (bound 0.05%%), |d'|<0.001 count %zu (bound 0)",
                total, frac, n001)};
}

// ---------------------------------------------------------------- 6

Outcome properties()
{
    std::vector<std::string> failed;
    auto expect = [&](bool ok, const char* name) {
        if (!ok) failed.push_back(name);
    };

    for (std::size_t n : {4u, 24u, 64u, 256u}) {
        const auto x = random_complex(n, 1, n).values();
        const auto back = idft(dft(x));
        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i) err = std::max(err, std::abs(back[i] - x[i]));
        expect(err < 1e-12, "dft round trip");
    }

    const SystemConfig cfg = table2_config();
    const auto p = design_pattern(cfg, cfg.cu_angle_deg);
    {
        const auto x = random_complex(64, 4, 1), y = random_complex(64, 4, 2);
        const cplx a(0.7, -0.2), b(-1.5, 2.0);
        SymbolGrid mix(64, 4);
        for (std::size_t i = 0; i < mix.values().size(); ++i) mix.values()[i] = a * x.values()[i] + b * y.values()[i];
        SystemConfig short_cfg = cfg;
        short_cfg.num_ofdm_symbols = 4;
        const auto sx = scramble_symbols(x, p, short_cfg, -37.0), sy = scramble_symbols(y, p, short_cfg, -37.0);
        const auto sm = scramble_symbols(mix, p, short_cfg, -37.0);
        double err = 0.0;
        for (std::size_t i = 0; i < mix.values().size(); ++i)
            err = std::max(err, std::abs(sm.values()[i] - a * sx.values()[i] - b * sy.values()[i]));
        expect(err < 1e-12, "scrambling linearity");
    }

    const auto d = random_frame(cfg, 6);
    Scene scene = table2_scene(6);
    {
        const auto base = coarse_bins(coarse_pipeline(radar_returns(d, p, cfg, scene), d, p, cfg));
        for (cplx beta : {cplx(1e-4, 0.0), cplx(0.0, -30.0)}) {
            Scene s = scene;
            for (auto& t : s.targets) t.reflectivity = beta;
            expect(coarse_bins(coarse_pipeline(radar_returns(d, p, cfg, s), d, p, cfg)) == base, "beta scale invariance");
        }
    }
    Scene clean = scene;
    clean.noiseless = true;
    const auto y = radar_returns(d, p, cfg, clean);
    {
        AntennaGrid sum(cfg.num_rx_antennas, cfg.num_subcarriers, cfg.num_ofdm_symbols);
        for (const auto& t : clean.targets) {
            const auto one = single_target_returns(d, p, cfg, t);
            for (std::size_t i = 0; i < sum.values().size(); ++i) sum.values()[i] += one.values()[i];
        }
        double err = 0.0;
        for (std::size_t i = 0; i < sum.values().size(); ++i) err = std::max(err, std::abs(sum.values()[i] - y.values()[i]));
        expect(err < 1e-12, "superposition");
    }
    {
        const auto noisy = radar_returns(d, p, cfg, scene);
        const auto cov = sample_covariance(noisy, {});
        const auto grid = music_grid(cfg, 1.0 / 3.0, {});
        const auto p1 = music_pseudospectrum(cov, 3, cfg, grid);
        const Eigen::MatrixXcd scaled = cov * 1234.5;
        const auto p2 = music_pseudospectrum(scaled, 3, cfg, grid);
        expect(std::max_element(p1.begin(), p1.end()) - p1.begin() == std::max_element(p2.begin(), p2.end()) - p2.begin(),
               "MUSIC scale invariance");
    }
    {
        SystemConfig nb = cfg;
        nb.narrowband_doppler = true;
        const auto yn = radar_returns(d, p, nb, clean);
        std::vector<double> a, r, v;
        for (const auto& t : clean.targets) a.push_back(t.angle_deg), r.push_back(t.range_m), v.push_back(t.velocity_mps);
        expect(range_residual(yn, d, p, nb, 0, a, r) <= 1e-18, "LS range residual at truth");
        expect(velocity_residual(yn, d, p, nb, a, r, v) <= 1e-18, "LS velocity residual at truth");
    }
    {
        Rng rng(77);
        const std::size_t nt = 12, ng = 11;
        std::vector<std::vector<cplx>> yv(nt, std::vector<cplx>(2));
        std::vector<std::vector<std::vector<cplx>>> b(2, yv);
        for (auto& row : yv) for (auto& v : row) v = rng.complex_gaussian(1.0);
        for (auto& q : b) for (auto& row : q) for (auto& v : row) v = rng.complex_gaussian(1.0);
        std::vector<std::vector<std::vector<cplx>>> ph(2, std::vector<std::vector<cplx>>(ng, std::vector<cplx>(nt)));
        for (auto& q : ph) for (auto& g : q) for (auto& v : g) v = std::polar(1.0, 2.0 * kPi * rng.uniform());
        SeparableTerms terms;
        terms.corr.assign(2, std::vector<cplx>(nt));
        terms.gram.assign(2, std::vector<std::vector<cplx>>(2, std::vector<cplx>(nt)));
        for (std::size_t t = 0; t < nt; ++t)
            for (std::size_t m = 0; m < 2; ++m) {
                terms.y_energy += std::norm(yv[t][m]);
                for (std::size_t q = 0; q < 2; ++q) {
                    terms.corr[q][t] += std::conj(yv[t][m]) * b[q][t][m];
                    for (std::size_t s = 0; s < 2; ++s) terms.gram[q][s][t] += std::conj(b[q][t][m]) * b[s][t][m];
                }
            }
        const auto res = separable_grid_search(terms, ph, false, 1000);
        double best = 1e300;
        std::vector<std::size_t> arg;
        for (std::size_t i = 0; i < ng; ++i)
            for (std::size_t j = 0; j < ng; ++j) {
                double r = 0.0;
                for (std::size_t t = 0; t < nt; ++t)
                    for (std::size_t m = 0; m < 2; ++m)
                        r += std::norm(yv[t][m] - b[0][t][m] * ph[0][i][t] - b[1][t][m] * ph[1][j][t]);
                if (r < best) best = r, arg = {i, j};
            }
        expect(res.index == arg, "grid argmin vs enumeration");
    }

    std::string detail = "dft round trip, linearity, beta invariance, superposition, MUSIC scale, LS zero residual, 11x11 argmin";
    if (!failed.empty()) {
        detail = "failed:";
        for (const auto& f : failed) detail += " " + f + ";";
    }
    return {failed.empty(), detail};
}

// ---------------------------------------------------------------- 7

Outcome comms_security()
{
    const SystemConfig cfg = table1_config();
    const auto p = design_pattern(cfg, cfg.cu_angle_deg);
    std::vector<double> angles{cfg.cu_angle_deg};
    for (double a : default_sweep_angles())
        if (std::abs(a - cfg.cu_angle_deg) >= 20.0) angles.push_back(a);
    const auto curve = ber_vs_angle(p, cfg, angles, 30.0, 4, 7);

    const double at_cu = curve[0].ber;
    std::size_t inside = 0;
    double lo = 1.0, hi = 0.0, lo_at = 0.0, hi_at = 0.0;
    for (std::size_t i = 1; i < curve.size(); ++i) {
        const double b = curve[i].ber;
        inside += b >= 0.45 && b <= 0.55;
        if (b < lo) lo = b, lo_at = curve[i].angle_deg;
        if (b > hi) hi = b, hi_at = curve[i].angle_deg;
    }
    const std::size_t probes = curve.size() - 1;
    return {at_cu <= 1e-3 && inside == probes && curve[0].n_bits >= 100000,
            fmt("%zu bits/point; BER at CU %.2e (bound 1e-3); %zu/%zu probes with |theta-theta0|>=20 in [0.45,0.55]; "
                "min %.3f at %.0f deg, max %.3f at %.0f deg",
                curve[0].n_bits, at_cu, inside, probes, lo, lo_at, hi, hi_at)};
}

}  // namespace

int main()
{
    report(1, "DM condition", 1.0, dm_condition);
    report(2, "time/frequency equivalence", 30.0, time_frequency);
    report(3, "reference coarse estimates", 10.0, table2_coarse);
    report(4, "reference refined estimates", 300.0, table2_refined);
    report(5, "zero-denominator statistics", 60.0, zero_denominators);
    report(6, "property suites", 60.0, properties);
    report(7, "comms security", 120.0, comms_security);
    std::printf("%d of 7 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
