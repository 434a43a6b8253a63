#include "tmadfrc/tma.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

namespace tmadfrc {

namespace {

// sin(pi x) with x reduced mod 2 first, so integer x gives an exact zero.
double sin_pi(double x)
{
    double r = std::fmod(x, 2.0);
    if (r == 0.0 || r == 1.0 || r == -1.0) return 0.0;
    return std::sin(kPi * r);
}

// exp(-j pi x) with x reduced mod 2.
cplx exp_minus_j_pi(double x)
{
    const double r = std::fmod(x, 2.0);
    return std::polar(1.0, -kPi * r);
}

// Array phase towards theta times the steering weight, per antenna.
std::vector<cplx> element_gains(const SwitchingPattern& pattern, const SystemConfig& cfg, double theta_deg)
{
    const double sine = std::sin(deg_to_rad(theta_deg));
    std::vector<cplx> g(pattern.size());
    for (std::size_t n = 0; n < pattern.size(); ++n) {
        const double cycles = static_cast<double>(n) * cfg.tx_spacing_wavelengths * sine;
        g[n] = std::polar(1.0, -2.0 * kPi * cycles) * pattern.weights[n];
    }
    return g;
}

cplx switching_coefficient(double tau_on, double duty, long m)
{
    const double md = static_cast<double>(m) * duty;
    return duty * sinc_pi(md) * exp_minus_j_pi(static_cast<double>(m) * (2.0 * tau_on + duty));
}

struct GaussLegendre8 {
    std::array<double, 8> nodes{};
    std::array<double, 8> weights{};

    GaussLegendre8()
    {
        constexpr int n = 8;
        for (int i = 0; i < n; ++i) {
            double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
            double dp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = x;
                for (int k = 2; k <= n; ++k) {
                    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n * (x * p1 - p0) / (x * x - 1.0);
                const double dx = p1 / dp;
                x -= dx;
                if (std::abs(dx) < 1e-16) break;
            }
            nodes[static_cast<std::size_t>(i)] = x;
            weights[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - x * x) * dp * dp);
        }
    }
};

}  // namespace

double sinc_pi(double x)
{
    if (x == 0.0) return 1.0;
    return sin_pi(x) / (kPi * x);
}

void validate_pattern(const SwitchingPattern& p, const SystemConfig& cfg)
{
    const std::size_t nt = cfg.num_tx_antennas;
    if (p.tau_on.size() != nt || p.duty.size() != nt || p.weights.size() != nt) {
        std::ostringstream os;
        os << "switching pattern lengths (" << p.tau_on.size() << ", " << p.duty.size() << ", " << p.weights.size()
           << ") must all equal num_tx_antennas = " << nt;
        throw ConfigError(os.str());
    }
    for (std::size_t n = 0; n < nt; ++n) {
        if (!(p.tau_on[n] >= 0.0 && p.tau_on[n] < 1.0))
            throw ConfigError("tau_on[" + std::to_string(n) + "] outside [0, 1)");
        if (!(p.duty[n] > 0.0 && p.duty[n] <= 1.0))
            throw ConfigError("duty[" + std::to_string(n) + "] outside (0, 1]; an always-off antenna is not allowed");
        if (!std::isfinite(p.weights[n].real()) || !std::isfinite(p.weights[n].imag()))
            throw ConfigError("weights[" + std::to_string(n) + "] is not finite");
    }
}

namespace {

SwitchingPattern pattern_with_duty(const SystemConfig& cfg, double steer_angle_deg, double duty)
{
    const std::size_t nt = cfg.num_tx_antennas;
    const double sine = std::sin(deg_to_rad(steer_angle_deg));
    SwitchingPattern p;
    p.tau_on.resize(nt);
    p.duty.assign(nt, duty);
    p.weights.resize(nt);
    for (std::size_t n = 0; n < nt; ++n) {
        const double tau_off = static_cast<double>(n) / static_cast<double>(nt);
        double on = std::fmod(tau_off - duty, 1.0);
        if (on < 0.0) on += 1.0;
        if (on >= 1.0) on -= 1.0;
        p.tau_on[n] = on;
        p.weights[n] = std::polar(1.0, 2.0 * kPi * static_cast<double>(n) * cfg.tx_spacing_wavelengths * sine);
    }
    return p;
}

}  // namespace

SwitchingPattern design_pattern(const SystemConfig& cfg, double steer_angle_deg)
{
    const std::size_t nt = cfg.num_tx_antennas;
    if (nt < 2) throw ConfigError("design_pattern: num_tx_antennas = 1 gives duty (N_t-1)/N_t = 0");
    return pattern_with_duty(cfg, steer_angle_deg, static_cast<double>(nt - 1) / static_cast<double>(nt));
}

SwitchingPattern always_on_pattern(const SystemConfig& cfg, double steer_angle_deg)
{
    return pattern_with_duty(cfg, steer_angle_deg, 1.0);
}

cplx harmonic_coefficient(const SwitchingPattern& pattern, const SystemConfig& cfg, long m, double theta_deg)
{
    const auto gains = element_gains(pattern, cfg, theta_deg);
    cplx acc{0.0, 0.0};
    for (std::size_t n = 0; n < pattern.size(); ++n)
        acc += gains[n] * switching_coefficient(pattern.tau_on[n], pattern.duty[n], m);
    return acc;
}

HarmonicTable::HarmonicTable(const SwitchingPattern& pattern, const SystemConfig& cfg, double theta_deg)
    : offset_(static_cast<long>(cfg.num_subcarriers) - 1), values_(2 * cfg.num_subcarriers - 1)
{
    validate_pattern(pattern, cfg);
    const auto gains = element_gains(pattern, cfg, theta_deg);
    for (long m = -offset_; m <= offset_; ++m) {
        cplx acc{0.0, 0.0};
        for (std::size_t n = 0; n < pattern.size(); ++n)
            acc += gains[n] * switching_coefficient(pattern.tau_on[n], pattern.duty[n], m);
        values_[static_cast<std::size_t>(m + offset_)] = acc;
    }
}

SymbolGrid scramble_symbols(const SymbolGrid& data, const HarmonicTable& table)
{
    const std::size_t ns = data.num_subcarriers();
    if (static_cast<long>(ns) - 1 != table.max_order())
        throw ConfigError("scramble_symbols: harmonic table does not match the grid's subcarrier count");
    SymbolGrid out(ns, data.num_symbols());
    for (std::size_t mu = 0; mu < data.num_symbols(); ++mu) {
        for (std::size_t s = 0; s < ns; ++s) {
            cplx acc{0.0, 0.0};
            for (std::size_t i = 0; i < ns; ++i)
                acc += data(i, mu) * table(static_cast<long>(s) - static_cast<long>(i));
            out(s, mu) = acc;
        }
    }
    return out;
}

SymbolGrid scramble_symbols(const SymbolGrid& data, const SwitchingPattern& pattern, const SystemConfig& cfg,
                            double theta_deg)
{
    if (data.num_subcarriers() != cfg.num_subcarriers || data.num_symbols() != cfg.num_ofdm_symbols)
        throw ConfigError("scramble_symbols: grid dimensions do not match config");
    return scramble_symbols(data, HarmonicTable(pattern, cfg, theta_deg));
}

std::string DmReport::failure_summary() const
{
    std::ostringstream os;
    if (!fundamental_ok) os << "fundamental vanishes at the steering angle (|V(0)| = " << fundamental_at_steer << "); ";
    if (!harmonics_cancel_ok)
        os << "harmonics survive at the steering angle (max |V(m!=0)| = " << max_harmonic_at_steer << "); ";
    if (!scrambling_ok)
        os << "no scrambling at probe " << weakest_probe_deg << " deg (max |V(m!=0)| = " << min_probe_harmonic
           << "); ";
    std::string s = os.str();
    if (!s.empty()) s.resize(s.size() - 2);
    return s;
}

DmReport check_dm_condition(const SwitchingPattern& pattern, const SystemConfig& cfg, double theta0_deg,
                            const std::vector<double>& probe_angles_deg, double harmonic_tolerance,
                            double scrambling_threshold)
{
    const double sine0 = std::sin(deg_to_rad(theta0_deg));
    for (double p : probe_angles_deg) {
        if (std::abs(std::sin(deg_to_rad(p)) - sine0) < 1e-12)
            throw ConfigError("check_dm_condition: probe angle " + std::to_string(p) +
                              " deg is equivalent to the steering angle");
    }

    auto max_harmonic = [](const HarmonicTable& t) {
        double best = 0.0;
        for (long m = -t.max_order(); m <= t.max_order(); ++m)
            if (m != 0) best = std::max(best, std::abs(t(m)));
        return best;
    };

    DmReport r;
    r.steer_angle_deg = theta0_deg;
    r.harmonic_tolerance = harmonic_tolerance;
    r.scrambling_threshold = scrambling_threshold;

    const HarmonicTable at_steer(pattern, cfg, theta0_deg);
    r.fundamental_at_steer = std::abs(at_steer.fundamental());
    r.max_harmonic_at_steer = max_harmonic(at_steer);
    r.fundamental_ok = r.fundamental_at_steer > 0.0;
    r.harmonics_cancel_ok = r.max_harmonic_at_steer <= harmonic_tolerance * r.fundamental_at_steer;

    r.min_probe_harmonic = std::numeric_limits<double>::infinity();
    for (double p : probe_angles_deg) {
        const double h = max_harmonic(HarmonicTable(pattern, cfg, p));
        if (h < r.min_probe_harmonic) {
            r.min_probe_harmonic = h;
            r.weakest_probe_deg = p;
        }
    }
    if (probe_angles_deg.empty()) r.min_probe_harmonic = 0.0;
    r.scrambling_ok = !probe_angles_deg.empty() && r.min_probe_harmonic > scrambling_threshold * r.fundamental_at_steer;
    return r;
}

SymbolGrid time_domain_oracle(const SymbolGrid& data, const SwitchingPattern& pattern, const SystemConfig& cfg,
                              double theta_deg, std::size_t oversample)
{
    if (oversample < 1) throw ConfigError("time_domain_oracle: oversample must be >= 1");
    if (data.num_subcarriers() != cfg.num_subcarriers)
        throw ConfigError("time_domain_oracle: grid subcarrier count does not match config");
    validate_pattern(pattern, cfg);

    static const GaussLegendre8 gl;
    const std::size_t ns = cfg.num_subcarriers;
    const std::size_t nt = pattern.size();
    const auto gains = element_gains(pattern, cfg, theta_deg);

    // Integration pieces over the normalized useful period u = (t - T_cp) f_s in [0, 1).
    std::vector<double> breaks;
    const std::size_t cells = ns * oversample;
    for (std::size_t k = 0; k <= cells; ++k) breaks.push_back(static_cast<double>(k) / static_cast<double>(cells));
    for (std::size_t n = 0; n < nt; ++n) {
        breaks.push_back(pattern.tau_on[n]);
        breaks.push_back(std::fmod(pattern.tau_on[n] + pattern.duty[n], 1.0));
    }
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end(), [](double a, double b) { return b - a < 1e-15; }),
                 breaks.end());

    struct Piece {
        double lo, hi;
        cplx gain;  // sum of element gains of the antennas switched on
    };
    std::vector<Piece> pieces;
    for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
        const double lo = breaks[k], hi = breaks[k + 1];
        const double mid = 0.5 * (lo + hi);
        cplx g{0.0, 0.0};
        for (std::size_t n = 0; n < nt; ++n) {
            double phase = mid - pattern.tau_on[n];
            if (phase < 0.0) phase += 1.0;
            if (phase < pattern.duty[n]) g += gains[n];
        }
        pieces.push_back({lo, hi, g});
    }

    SymbolGrid out(ns, data.num_symbols());
    std::vector<cplx> powers(ns);
    for (std::size_t mu = 0; mu < data.num_symbols(); ++mu) {
        std::vector<cplx> acc(ns, cplx{0.0, 0.0});
        for (const auto& piece : pieces) {
            if (piece.gain == cplx{0.0, 0.0}) continue;
            const double half = 0.5 * (piece.hi - piece.lo);
            const double centre = 0.5 * (piece.hi + piece.lo);
            for (std::size_t j = 0; j < gl.nodes.size(); ++j) {
                const double u = centre + half * gl.nodes[j];
                const cplx z = std::polar(1.0, 2.0 * kPi * u);
                powers[0] = 1.0;
                for (std::size_t s = 1; s < ns; ++s) powers[s] = powers[s - 1] * z;
                cplx e{0.0, 0.0};
                for (std::size_t s = 0; s < ns; ++s) e += data(s, mu) * powers[s];
                const cplx x = (half * gl.weights[j]) * piece.gain * e;
                for (std::size_t i = 0; i < ns; ++i) acc[i] += x * std::conj(powers[i]);
            }
        }
        for (std::size_t i = 0; i < ns; ++i) out(i, mu) = acc[i];
    }
    return out;
}

void to_json(nlohmann::json& j, const SwitchingPattern& p)
{
    nlohmann::json w = nlohmann::json::array();
    for (const auto& x : p.weights) w.push_back({x.real(), x.imag()});
    j = nlohmann::json{{"tau_on", p.tau_on}, {"duty", p.duty}, {"weights", w}};
}

void from_json(const nlohmann::json& j, SwitchingPattern& p)
{
    if (!j.is_object()) throw ConfigError("pattern must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (key != "tau_on" && key != "duty" && key != "weights")
            throw ConfigError("unknown pattern key '" + key + "'");
    p.tau_on = j.at("tau_on").get<std::vector<double>>();
    p.duty = j.at("duty").get<std::vector<double>>();
    p.weights.clear();
    for (const auto& w : j.at("weights")) {
        if (!w.is_array() || w.size() != 2) throw ConfigError("pattern weight must be [re, im]");
        p.weights.emplace_back(w[0].get<double>(), w[1].get<double>());
    }
}

}  // namespace tmadfrc
