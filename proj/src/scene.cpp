#include "tmadfrc/scene.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "tmadfrc/rng.hpp"

namespace tmadfrc {

namespace {

// e^{j 2 pi cycles} with the integer part of cycles dropped first.
cplx turn(double cycles)
{
    const double frac = cycles - std::floor(cycles);
    return std::polar(1.0, 2.0 * kPi * frac);
}

}  // namespace

Scene table2_scene(std::uint64_t seed)
{
    Scene s;
    s.targets = {
        {20.0, 50.0, -10.0, {1.0, 0.0}},
        {22.0, 60.0, 10.0, {1.0, 0.0}},
        {-30.0, 120.0, 20.0, {1.0, 0.0}},
    };
    s.seed = seed;
    s.snr_db = 10.0;
    return s;
}

SystemConfig table2_config()
{
    SystemConfig cfg = table1_config();
    cfg.approx_speed_of_light = true;
    cfg.symbol_duration_s = 1.0 / 96000.0;
    return cfg;
}

void validate_scene(const Scene& scene, const SystemConfig& cfg)
{
    std::set<double> angles;
    for (const auto& t : scene.targets) {
        if (scene.allow_ambiguous) {
            if (!std::isfinite(t.angle_deg) || std::abs(t.angle_deg) > 90.0)
                throw ConfigError("target angle outside [-90, 90]");
        } else {
            validate_target(t, cfg);
        }
        angles.insert(t.angle_deg);
    }
    if (!angles.empty() && angles.size() >= cfg.num_rx_antennas)
        throw ConfigError("scene has " + std::to_string(angles.size()) + " distinct angles; at most N_r - 1 = " +
                          std::to_string(cfg.num_rx_antennas - 1) + " are identifiable");
}

AntennaGrid single_target_returns(const SymbolGrid& data, const SwitchingPattern& pattern, const SystemConfig& cfg,
                                  const Target& target)
{
    const std::size_t nr = cfg.num_rx_antennas, ns = cfg.num_subcarriers, np = cfg.num_ofdm_symbols;
    const double c = cfg.speed_of_light();
    const SymbolGrid scrambled = scramble_symbols(data, pattern, cfg, target.angle_deg);

    const double sine = std::sin(deg_to_rad(target.angle_deg));
    std::vector<cplx> steer(nr);
    for (std::size_t m = 0; m < nr; ++m) steer[m] = turn(-static_cast<double>(m) * cfg.rx_spacing_wavelengths * sine);
    std::vector<cplx> delay(ns);
    for (std::size_t s = 0; s < ns; ++s)
        delay[s] = turn(-static_cast<double>(s) * cfg.subcarrier_spacing_hz * 2.0 * target.range_m / c);

    AntennaGrid out(nr, ns, np);
    for (std::size_t mu = 0; mu < np; ++mu) {
        for (std::size_t s = 0; s < ns; ++s) {
            const double fd_carrier =
                cfg.narrowband_doppler ? cfg.carrier_freq_hz
                                       : cfg.carrier_freq_hz + static_cast<double>(s) * cfg.subcarrier_spacing_hz;
            const double doppler_cycles =
                static_cast<double>(mu) * cfg.symbol_duration_s * 2.0 * target.velocity_mps * fd_carrier / c;
            const cplx common = target.reflectivity * scrambled(s, mu) * delay[s] * turn(doppler_cycles);
            for (std::size_t m = 0; m < nr; ++m) out(m, s, mu) = common * steer[m];
        }
    }
    return out;
}

double noise_variance_for(const AntennaGrid& noiseless, double snr_db)
{
    if (std::isinf(snr_db) && snr_db > 0) return 0.0;
    double power = 0.0;
    for (const auto& v : noiseless.values()) power += std::norm(v);
    power = noiseless.values().empty() ? 0.0 : power / static_cast<double>(noiseless.values().size());
    if (power == 0.0) power = 1.0;
    return power / std::pow(10.0, snr_db / 10.0);
}

AntennaGrid radar_returns(const SymbolGrid& data, const SwitchingPattern& pattern, const SystemConfig& cfg,
                          const Scene& scene)
{
    validate_config(cfg);
    validate_pattern(pattern, cfg);
    validate_scene(scene, cfg);
    if (data.num_subcarriers() != cfg.num_subcarriers || data.num_symbols() != cfg.num_ofdm_symbols)
        throw ConfigError("radar_returns: data grid dimensions do not match config");

    AntennaGrid out(cfg.num_rx_antennas, cfg.num_subcarriers, cfg.num_ofdm_symbols);
    for (const auto& target : scene.targets) {
        const AntennaGrid one = single_target_returns(data, pattern, cfg, target);
        for (std::size_t i = 0; i < out.values().size(); ++i) out.values()[i] += one.values()[i];
    }
    if (scene.noiseless) return out;

    const double variance = noise_variance_for(out, scene.snr_db.value_or(cfg.snr_db));
    if (variance == 0.0) return out;
    for (std::size_t mu = 0; mu < cfg.num_ofdm_symbols; ++mu) {
        Rng rng(derive_seed(scene.seed, "radar-noise", mu));
        for (std::size_t s = 0; s < cfg.num_subcarriers; ++s)
            for (std::size_t m = 0; m < cfg.num_rx_antennas; ++m) out(m, s, mu) += rng.complex_gaussian(variance);
    }
    return out;
}

SymbolGrid one_way_received(const SymbolGrid& data, const SwitchingPattern& pattern, const SystemConfig& cfg,
                            double theta_deg, double snr_db, std::uint64_t seed)
{
    SymbolGrid out = scramble_symbols(data, pattern, cfg, theta_deg);
    if (std::isinf(snr_db) && snr_db > 0) return out;
    double power = 0.0;
    for (const auto& v : out.values()) power += std::norm(v);
    power /= static_cast<double>(out.values().size());
    const double variance = power / std::pow(10.0, snr_db / 10.0);
    for (std::size_t mu = 0; mu < out.num_symbols(); ++mu) {
        Rng rng(derive_seed(seed, "link-noise", mu));
        for (std::size_t s = 0; s < out.num_subcarriers(); ++s) out(s, mu) += rng.complex_gaussian(variance);
    }
    return out;
}

void to_json(nlohmann::json& j, const Scene& scene)
{
    j = nlohmann::json{{"targets", scene.targets}, {"seed", scene.seed}};
    if (scene.snr_db) j["snr_db"] = *scene.snr_db;
    if (scene.noiseless) j["noiseless"] = true;
    if (scene.allow_ambiguous) j["allow_ambiguous"] = true;
}

void from_json(const nlohmann::json& j, Scene& scene)
{
    scene = Scene{};
    if (j.is_array()) {
        scene.targets = j.get<std::vector<Target>>();
        return;
    }
    if (!j.is_object()) throw ConfigError("scene must be a target list or an object");
    for (const auto& [key, _] : j.items())
        if (key != "targets" && key != "seed" && key != "snr_db" && key != "noiseless" && key != "allow_ambiguous")
            throw ConfigError("unknown scene key '" + key + "'");
    scene.targets = j.at("targets").get<std::vector<Target>>();
    if (auto it = j.find("seed"); it != j.end()) scene.seed = it->get<std::uint64_t>();
    if (auto it = j.find("snr_db"); it != j.end()) scene.snr_db = it->get<double>();
    if (auto it = j.find("noiseless"); it != j.end()) scene.noiseless = it->get<bool>();
    if (auto it = j.find("allow_ambiguous"); it != j.end()) scene.allow_ambiguous = it->get<bool>();
}

// ---------------------------------------------------------------- grid files

namespace {

constexpr char kMagic[12] = {'T', 'M', 'A', 'D', 'F', 'R', 'C', 'G', 'R', 'I', 'D', '1'};
constexpr std::size_t kHeaderBytes = 24;

void put_u32(std::string& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_f64(std::string& out, double v)
{
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

std::uint64_t get_le(const std::string& in, std::size_t offset, int bytes)
{
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[offset + static_cast<std::size_t>(i)])) << (8 * i);
    return v;
}

std::uint32_t checked_u32(std::size_t n, const char* what)
{
    if (n > 0xffffffffu) throw GridFormatError(std::string("grid dimension ") + what + " exceeds u32");
    return static_cast<std::uint32_t>(n);
}

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw GridFormatError("cannot open grid file '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw GridFormatError("cannot write grid file '" + path.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw GridFormatError("short write to grid file '" + path.string() + "'");
}

}  // namespace

std::string encode_grid(const AntennaGrid& grid)
{
    std::string out(kMagic, kMagic + sizeof(kMagic));
    put_u32(out, checked_u32(grid.num_antennas(), "N_r"));
    put_u32(out, checked_u32(grid.num_subcarriers(), "N_s"));
    put_u32(out, checked_u32(grid.num_symbols(), "N_p"));
    out.reserve(kHeaderBytes + 16 * grid.values().size());
    for (const auto& v : grid.values()) {
        put_f64(out, v.real());
        put_f64(out, v.imag());
    }
    return out;
}

AntennaGrid decode_grid(const std::string& bytes, const std::string& origin)
{
    if (bytes.size() < kHeaderBytes) {
        throw GridFormatError(origin + ": truncated header at byte offset " + std::to_string(bytes.size()) +
                              " (need " + std::to_string(kHeaderBytes) + " bytes)");
    }
    if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
        throw GridFormatError(origin + ": bad magic at byte offset 0");
    const auto nr = static_cast<std::size_t>(get_le(bytes, 12, 4));
    const auto ns = static_cast<std::size_t>(get_le(bytes, 16, 4));
    const auto np = static_cast<std::size_t>(get_le(bytes, 20, 4));
    if (nr == 0 || ns == 0 || np == 0) throw GridFormatError(origin + ": zero dimension in header at byte offset 12");
    const std::size_t expected = kHeaderBytes + 16 * nr * ns * np;
    if (bytes.size() != expected) {
        const std::size_t offset = std::min(bytes.size(), expected);
        throw GridFormatError(origin + ": payload size mismatch at byte offset " + std::to_string(offset) +
                              " (file has " + std::to_string(bytes.size()) + " bytes, header implies " +
                              std::to_string(expected) + ")");
    }
    AntennaGrid grid(nr, ns, np);
    std::size_t off = kHeaderBytes;
    for (auto& v : grid.values()) {
        const double re = std::bit_cast<double>(get_le(bytes, off, 8));
        const double im = std::bit_cast<double>(get_le(bytes, off + 8, 8));
        v = {re, im};
        off += 16;
    }
    return grid;
}

void write_grid(const std::filesystem::path& path, const AntennaGrid& grid) { write_file(path, encode_grid(grid)); }

void write_grid(const std::filesystem::path& path, const SymbolGrid& grid)
{
    AntennaGrid g(1, grid.num_subcarriers(), grid.num_symbols());
    g.values() = grid.values();
    write_grid(path, g);
}

AntennaGrid read_antenna_grid(const std::filesystem::path& path)
{
    return decode_grid(read_file(path), path.string());
}

SymbolGrid read_symbol_grid(const std::filesystem::path& path)
{
    AntennaGrid g = read_antenna_grid(path);
    if (g.num_antennas() != 1)
        throw GridFormatError(path.string() + ": expected N_r = 1 symbol grid at byte offset 12, got " +
                              std::to_string(g.num_antennas()));
    SymbolGrid out(g.num_subcarriers(), g.num_symbols());
    out.values() = std::move(g.values());
    return out;
}

}  // namespace tmadfrc
