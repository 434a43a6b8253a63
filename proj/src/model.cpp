#include "tmadfrc/model.hpp"

#include <cmath>
#include <set>
#include <sstream>

namespace tmadfrc {

SystemConfig table1_config()
{
    return SystemConfig{};
}

namespace {

[[noreturn]] void fail(const std::string& what)
{
    throw ConfigError("invalid config: " + what);
}

bool positive_finite(double x) { return std::isfinite(x) && x > 0.0; }

}  // namespace

const SystemConfig& validate_config(const SystemConfig& cfg)
{
    if (!positive_finite(cfg.carrier_freq_hz)) fail("carrier_freq_hz must be > 0");
    if (!positive_finite(cfg.subcarrier_spacing_hz)) fail("subcarrier_spacing_hz must be > 0");
    if (cfg.num_subcarriers < 1) fail("num_subcarriers must be >= 1");
    if (cfg.num_ofdm_symbols < 1) fail("num_ofdm_symbols must be >= 1");
    if (cfg.num_tx_antennas < 1) fail("num_tx_antennas must be >= 1");
    if (cfg.num_rx_antennas < 1) fail("num_rx_antennas must be >= 1");
    if (!positive_finite(cfg.tx_spacing_wavelengths)) fail("tx_spacing_wavelengths must be > 0");
    if (!positive_finite(cfg.rx_spacing_wavelengths)) fail("rx_spacing_wavelengths must be > 0");
    if (!std::isfinite(cfg.symbol_duration_s)) fail("symbol_duration_s must be finite");
    // T_p = 1/f_s + T_cp with T_cp >= 0; allow one ulp-scale slack for T_p given as exactly 1/f_s.
    const double useful = 1.0 / cfg.subcarrier_spacing_hz;
    if (cfg.symbol_duration_s < useful * (1.0 - 1e-12)) {
        std::ostringstream os;
        os << "symbol_duration_s (" << cfg.symbol_duration_s << ") must be >= 1/subcarrier_spacing_hz (" << useful
           << ")";
        fail(os.str());
    }
    if (!std::isfinite(cfg.cu_angle_deg) || std::abs(cfg.cu_angle_deg) > 90.0) fail("cu_angle_deg must lie in [-90, 90]");
    if (std::isnan(cfg.snr_db)) fail("snr_db must be a number");
    return cfg;
}

double signed_bin_frequency(std::size_t k, std::size_t n)
{
    const auto kk = static_cast<double>(k % n);
    const auto nn = static_cast<double>(n);
    return (2 * (k % n) >= n) ? (kk - nn) / nn : kk / nn;
}

double angle_bin_sine(const SystemConfig& cfg, std::size_t k)
{
    // omega = -d_r sin(theta) / lambda, with d_r stored in wavelengths.
    return -signed_bin_frequency(k, cfg.num_rx_antennas) / cfg.rx_spacing_wavelengths;
}

DerivedResolutions derived_resolutions(const SystemConfig& cfg)
{
    const double c = cfg.speed_of_light();
    DerivedResolutions out;
    out.range_res_m = c / (2.0 * static_cast<double>(cfg.num_subcarriers) * cfg.subcarrier_spacing_hz);
    out.velocity_res_mps =
        c / (2.0 * cfg.carrier_freq_hz * static_cast<double>(cfg.num_ofdm_symbols) * cfg.symbol_duration_s);
    out.angle_grid_deg.reserve(cfg.num_rx_antennas);
    for (std::size_t k = 0; k < cfg.num_rx_antennas; ++k) {
        const double sine = angle_bin_sine(cfg, k);
        if (std::abs(sine) <= 1.0)
            out.angle_grid_deg.emplace_back(rad_to_deg(std::asin(sine)));
        else
            out.angle_grid_deg.emplace_back(std::nullopt);
    }
    return out;
}

void validate_target(const Target& t, const SystemConfig& cfg)
{
    std::ostringstream os;
    if (!std::isfinite(t.angle_deg) || std::abs(t.angle_deg) > 90.0) {
        os << "target angle " << t.angle_deg << " deg outside [-90, 90]";
    } else if (!(t.range_m > 0.0) || t.range_m >= cfg.max_unambiguous_range_m()) {
        os << "target range " << t.range_m << " m outside (0, " << cfg.max_unambiguous_range_m() << ")";
    } else if (!std::isfinite(t.velocity_mps) || std::abs(t.velocity_mps) >= cfg.max_unambiguous_velocity_mps()) {
        os << "target velocity " << t.velocity_mps << " m/s outside +-" << cfg.max_unambiguous_velocity_mps();
    } else {
        return;
    }
    throw ConfigError(os.str());
}

// ---------------------------------------------------------------- JSON

namespace {

const std::set<std::string>& config_keys()
{
    static const std::set<std::string> keys = {
        "carrier_freq_hz",        "subcarrier_spacing_hz",  "num_subcarriers",   "num_ofdm_symbols",
        "num_tx_antennas",        "num_rx_antennas",        "tx_spacing_wavelengths", "rx_spacing_wavelengths",
        "symbol_duration_s",      "cu_angle_deg",           "snr_db",            "approx_speed_of_light",
        "narrowband_doppler",
    };
    return keys;
}

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& dst)
{
    if (auto it = j.find(key); it != j.end()) {
        try {
            it->get_to(dst);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("config key '") + key + "': " + e.what());
        }
    }
}

}  // namespace

void to_json(nlohmann::json& j, const SystemConfig& cfg)
{
    j = nlohmann::json{
        {"carrier_freq_hz", cfg.carrier_freq_hz},
        {"subcarrier_spacing_hz", cfg.subcarrier_spacing_hz},
        {"num_subcarriers", cfg.num_subcarriers},
        {"num_ofdm_symbols", cfg.num_ofdm_symbols},
        {"num_tx_antennas", cfg.num_tx_antennas},
        {"num_rx_antennas", cfg.num_rx_antennas},
        {"tx_spacing_wavelengths", cfg.tx_spacing_wavelengths},
        {"rx_spacing_wavelengths", cfg.rx_spacing_wavelengths},
        {"symbol_duration_s", cfg.symbol_duration_s},
        {"cu_angle_deg", cfg.cu_angle_deg},
        {"snr_db", cfg.snr_db},
        {"approx_speed_of_light", cfg.approx_speed_of_light},
        {"narrowband_doppler", cfg.narrowband_doppler},
    };
}

void from_json(const nlohmann::json& j, SystemConfig& cfg)
{
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (!config_keys().contains(key)) throw ConfigError("unknown config key '" + key + "'");
    }
    read_opt(j, "carrier_freq_hz", cfg.carrier_freq_hz);
    read_opt(j, "subcarrier_spacing_hz", cfg.subcarrier_spacing_hz);
    read_opt(j, "num_subcarriers", cfg.num_subcarriers);
    read_opt(j, "num_ofdm_symbols", cfg.num_ofdm_symbols);
    read_opt(j, "num_tx_antennas", cfg.num_tx_antennas);
    read_opt(j, "num_rx_antennas", cfg.num_rx_antennas);
    read_opt(j, "tx_spacing_wavelengths", cfg.tx_spacing_wavelengths);
    read_opt(j, "rx_spacing_wavelengths", cfg.rx_spacing_wavelengths);
    read_opt(j, "symbol_duration_s", cfg.symbol_duration_s);
    read_opt(j, "cu_angle_deg", cfg.cu_angle_deg);
    read_opt(j, "snr_db", cfg.snr_db);
    read_opt(j, "approx_speed_of_light", cfg.approx_speed_of_light);
    read_opt(j, "narrowband_doppler", cfg.narrowband_doppler);
}

void to_json(nlohmann::json& j, const Target& t)
{
    j = nlohmann::json{{"angle_deg", t.angle_deg},
                       {"range_m", t.range_m},
                       {"velocity_mps", t.velocity_mps},
                       {"beta", {t.reflectivity.real(), t.reflectivity.imag()}}};
}

void from_json(const nlohmann::json& j, Target& t)
{
    if (!j.is_object()) throw ConfigError("target must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (key != "angle_deg" && key != "range_m" && key != "velocity_mps" && key != "beta")
            throw ConfigError("unknown target key '" + key + "'");
    }
    t.angle_deg = j.at("angle_deg").get<double>();
    t.range_m = j.at("range_m").get<double>();
    t.velocity_mps = j.at("velocity_mps").get<double>();
    if (auto it = j.find("beta"); it != j.end()) {
        if (!it->is_array() || it->size() != 2) throw ConfigError("target beta must be [re, im]");
        t.reflectivity = cplx((*it)[0].get<double>(), (*it)[1].get<double>());
    }
}

void to_json(nlohmann::json& j, const EstimateSet& e)
{
    j = nlohmann::json::object();
    auto& coarse = j["coarse"] = nlohmann::json::array();
    for (const auto& c : e.coarse) {
        coarse.push_back({{"angle_bin", c.angle_bin},
                          {"angle_deg", c.angle_deg},
                          {"range_bin", c.range_bin},
                          {"range_m", c.range_m},
                          {"velocity_bin", c.velocity_bin},
                          {"velocity_mps", c.velocity_mps}});
    }
    auto& refined = j["refined"] = nlohmann::json::array();
    for (const auto& r : e.refined) {
        refined.push_back({{"angle_deg", r.angle_deg},
                           {"range_m", r.range_m},
                           {"velocity_mps", r.velocity_mps},
                           {"source_angle_bin", r.source_angle_bin}});
    }
    auto& failures = j["failures"] = nlohmann::json::array();
    for (const auto& f : e.failures) failures.push_back({{"angle_bin", f.angle_bin}, {"reason", f.reason}});
    j["warnings"] = e.warnings;
}

SystemConfig config_from_json_text(const std::string& text)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    SystemConfig cfg = j.get<SystemConfig>();
    return validate_config(cfg);
}

}  // namespace tmadfrc
