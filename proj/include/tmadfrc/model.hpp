#pragma once

/**
 * @file model.hpp
 * @brief Core domain types shared by the TMA-OFDM DFRC toolkit.
 *
 * Angles cross the public API in degrees; everything internal works in
 * radians. Antenna spacings are stored in carrier wavelengths and turned
 * into metres only when a caller asks for them.
 */

#include <complex>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace tmadfrc {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSpeedOfLight = 299792458.0;
// Rounded value used by the reference range/velocity bins.
inline constexpr double kSpeedOfLightApprox = 3.0e8;

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

/// Raised for any violated configuration or input invariant.
class ConfigError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

struct SystemConfig {
    double carrier_freq_hz = 24.0e9;
    double subcarrier_spacing_hz = 120.0e3;
    std::size_t num_subcarriers = 64;
    std::size_t num_ofdm_symbols = 256;
    std::size_t num_tx_antennas = 8;
    std::size_t num_rx_antennas = 24;
    double tx_spacing_wavelengths = 0.5;
    double rx_spacing_wavelengths = 0.5;
    double symbol_duration_s = 8.92e-6;
    double cu_angle_deg = 60.0;
    double snr_db = 10.0;
    /// Use c = 3e8 m/s instead of the exact value.
    bool approx_speed_of_light = false;
    /// Doppler phase uses f_c only instead of f_c + s*f_s.
    bool narrowband_doppler = false;

    double speed_of_light() const { return approx_speed_of_light ? kSpeedOfLightApprox : kSpeedOfLight; }
    double wavelength_m() const { return speed_of_light() / carrier_freq_hz; }
    double tx_spacing_m() const { return tx_spacing_wavelengths * wavelength_m(); }
    double rx_spacing_m() const { return rx_spacing_wavelengths * wavelength_m(); }
    double cyclic_prefix_s() const { return symbol_duration_s - 1.0 / subcarrier_spacing_hz; }
    /// Largest range representable by the subcarrier IDFT, c / (2 f_s).
    double max_unambiguous_range_m() const { return speed_of_light() / (2.0 * subcarrier_spacing_hz); }
    /// Largest |v| before the symbol-domain DFT aliases, c / (4 f_c T_p).
    double max_unambiguous_velocity_mps() const
    {
        return speed_of_light() / (4.0 * carrier_freq_hz * symbol_duration_s);
    }

    bool operator==(const SystemConfig&) const = default;
};

/// Default system parameters.
SystemConfig table1_config();

/// Returns cfg unchanged when every invariant holds; throws ConfigError naming the first violation.
const SystemConfig& validate_config(const SystemConfig& cfg);

struct DerivedResolutions {
    double range_res_m = 0.0;
    double velocity_res_mps = 0.0;
    /// Angle per receive-DFT bin k = 0..N_r-1; empty when the bin maps outside |sin| <= 1.
    std::vector<std::optional<double>> angle_grid_deg;

    bool operator==(const DerivedResolutions&) const = default;
};

DerivedResolutions derived_resolutions(const SystemConfig& cfg);

/// Signed frequency of DFT bin k in cycles per sample, wrapped to [-1/2, 1/2).
double signed_bin_frequency(std::size_t k, std::size_t n);

/// sin(theta) of receive-DFT bin k; may fall outside [-1, 1] for wide spacings.
double angle_bin_sine(const SystemConfig& cfg, std::size_t k);

/// Complex matrix indexed (subcarrier s, OFDM symbol mu), one column per symbol.
class SymbolGrid {
  public:
    SymbolGrid() = default;
    SymbolGrid(std::size_t num_subcarriers, std::size_t num_symbols)
        : ns_(num_subcarriers), np_(num_symbols), values_(num_subcarriers * num_symbols)
    {}

    std::size_t num_subcarriers() const { return ns_; }
    std::size_t num_symbols() const { return np_; }

    cplx& operator()(std::size_t s, std::size_t mu) { return values_[mu * ns_ + s]; }
    const cplx& operator()(std::size_t s, std::size_t mu) const { return values_[mu * ns_ + s]; }

    std::vector<cplx>& values() { return values_; }
    const std::vector<cplx>& values() const { return values_; }

    bool operator==(const SymbolGrid&) const = default;

  private:
    std::size_t ns_ = 0;
    std::size_t np_ = 0;
    std::vector<cplx> values_;
};

/// Per-antenna received grid indexed (antenna m, subcarrier s, symbol mu).
/// The antenna index is innermost so one snapshot across the array is contiguous.
class AntennaGrid {
  public:
    AntennaGrid() = default;
    AntennaGrid(std::size_t num_antennas, std::size_t num_subcarriers, std::size_t num_symbols)
        : nr_(num_antennas), ns_(num_subcarriers), np_(num_symbols),
          values_(num_antennas * num_subcarriers * num_symbols)
    {}

    std::size_t num_antennas() const { return nr_; }
    std::size_t num_subcarriers() const { return ns_; }
    std::size_t num_symbols() const { return np_; }

    cplx& operator()(std::size_t m, std::size_t s, std::size_t mu) { return values_[(mu * ns_ + s) * nr_ + m]; }
    const cplx& operator()(std::size_t m, std::size_t s, std::size_t mu) const
    {
        return values_[(mu * ns_ + s) * nr_ + m];
    }

    /// Pointer to the N_r contiguous antenna samples of snapshot (s, mu).
    const cplx* snapshot(std::size_t s, std::size_t mu) const { return values_.data() + (mu * ns_ + s) * nr_; }

    std::vector<cplx>& values() { return values_; }
    const std::vector<cplx>& values() const { return values_; }

    bool operator==(const AntennaGrid&) const = default;

  private:
    std::size_t nr_ = 0;
    std::size_t ns_ = 0;
    std::size_t np_ = 0;
    std::vector<cplx> values_;
};

struct Target {
    double angle_deg = 0.0;
    double range_m = 0.0;
    double velocity_mps = 0.0;
    cplx reflectivity{1.0, 0.0};

    bool operator==(const Target&) const = default;
};

/// Throws ConfigError when a target violates the unambiguous windows of cfg.
void validate_target(const Target& t, const SystemConfig& cfg);

struct CoarseEstimate {
    std::size_t angle_bin = 0;
    double angle_deg = 0.0;
    std::size_t range_bin = 0;
    double range_m = 0.0;
    long velocity_bin = 0;  // signed, in [-N_p/2, N_p/2)
    double velocity_mps = 0.0;
};

struct RefinedEstimate {
    double angle_deg = 0.0;
    double range_m = 0.0;
    double velocity_mps = 0.0;
    /// Coarse angle bin the estimate was refined from.
    std::size_t source_angle_bin = 0;
};

struct BinFailure {
    std::size_t angle_bin = 0;
    std::string reason;
};

struct EstimateSet {
    std::vector<CoarseEstimate> coarse;
    std::vector<RefinedEstimate> refined;
    std::vector<BinFailure> failures;
    std::vector<std::string> warnings;
};

// JSON mapping. Config parsing rejects unknown keys.
void to_json(nlohmann::json& j, const SystemConfig& cfg);
void from_json(const nlohmann::json& j, SystemConfig& cfg);
void to_json(nlohmann::json& j, const Target& t);
void from_json(const nlohmann::json& j, Target& t);
void to_json(nlohmann::json& j, const EstimateSet& e);

SystemConfig config_from_json_text(const std::string& text);

}  // namespace tmadfrc
