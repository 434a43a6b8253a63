#pragma once

/**
 * @file scene.hpp
 * @brief Point-target radar returns and one-way link simulation.
 *
 * Received symbol on antenna m, subcarrier s, OFDM symbol mu:
 *
 *   d_r(m,s,mu) = sum_k beta_k d'(s,mu,theta_k) e^{-j2pi m d_r sin(theta_k)/lambda}
 *                 e^{-j2pi s f_s 2R_k/c} e^{+j2pi mu T_p f_d(k,s)} + n
 *
 * with f_d(k,s) = 2 v_k (f_c + s f_s) / c, or 2 v_k f_c / c when the
 * config selects narrowband Doppler. The carrier range phase is folded
 * into beta_k.
 *
 * SNR is the mean noiseless |d_r|^2 over all (m,s,mu) divided by the noise
 * variance. An empty scene uses unit reference power.
 */

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tmadfrc/model.hpp"
#include "tmadfrc/tma.hpp"

namespace tmadfrc {

struct Scene {
    std::vector<Target> targets;
    std::uint64_t seed = 0;
    /// Overrides SystemConfig::snr_db when set.
    std::optional<double> snr_db;
    bool noiseless = false;
    /// Skip the unambiguous range/velocity window checks.
    bool allow_ambiguous = false;
};

/// Reference three-target scene (beta = 1).
Scene table2_scene(std::uint64_t seed = 1);

/// Config of the reference reproduction: default parameters, c = 3e8 and a symbol
/// duration chosen so the velocity bin width is 2.34375 m/s.
SystemConfig table2_config();

void validate_scene(const Scene& scene, const SystemConfig& cfg);

/// Noiseless received grid of a single target (beta included).
AntennaGrid single_target_returns(const SymbolGrid& data, const SwitchingPattern& pattern, const SystemConfig& cfg,
                                  const Target& target);

AntennaGrid radar_returns(const SymbolGrid& data, const SwitchingPattern& pattern, const SystemConfig& cfg,
                          const Scene& scene);

/// Noise variance radar_returns uses for the given noiseless grid; 0 when noiseless.
double noise_variance_for(const AntennaGrid& noiseless, double snr_db);

/// Scrambled symbols seen by a single-antenna unit-gain receiver at theta, plus AWGN whose
/// variance is the mean |d'|^2 at that direction over 10^(snr_db/10). snr_db = +inf disables noise.
SymbolGrid one_way_received(const SymbolGrid& data, const SwitchingPattern& pattern, const SystemConfig& cfg,
                            double theta_deg, double snr_db, std::uint64_t seed);

void to_json(nlohmann::json& j, const Scene& scene);
/// Accepts either a bare target list or an object with a "targets" array.
void from_json(const nlohmann::json& j, Scene& scene);

// Binary grid files: 24-byte header then little-endian f64 (re, im) pairs with the
// antenna index fastest, then subcarrier, then OFDM symbol.
//   bytes  0..11  magic "TMADFRCGRID1"
//   bytes 12..15  N_r  (u32 LE)
//   bytes 16..19  N_s  (u32 LE)
//   bytes 20..23  N_p  (u32 LE)

class GridFormatError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

void write_grid(const std::filesystem::path& path, const AntennaGrid& grid);
void write_grid(const std::filesystem::path& path, const SymbolGrid& grid);
AntennaGrid read_antenna_grid(const std::filesystem::path& path);
/// Reads a file written from a SymbolGrid (N_r = 1).
SymbolGrid read_symbol_grid(const std::filesystem::path& path);

std::string encode_grid(const AntennaGrid& grid);
AntennaGrid decode_grid(const std::string& bytes, const std::string& origin = "<memory>");

}  // namespace tmadfrc
