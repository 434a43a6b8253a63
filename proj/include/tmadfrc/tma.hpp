#pragma once

/**
 * @file tma.hpp
 * @brief Time-modulated array engine.
 *
 * Each transmit antenna n is connected to the RF chain for the normalized
 * interval [tau_on_n, tau_on_n + duty_n) (mod 1) of every useful OFDM period
 * 1/f_s. The switching waveform has Fourier coefficients
 *
 *     c_n(m) = duty_n * sinc(m pi duty_n) * exp(-j m pi (2 tau_on_n + duty_n)),
 *
 * and the array factor towards theta combines them into
 *
 *     V(m, theta) = sum_n exp(-j 2 pi n d_t sin(theta) / lambda) * w_n * c_n(m).
 *
 * Subcarrier i then carries sum_s d(s) V(i - s, theta): the symbols are
 * mixed across subcarriers everywhere except where V(m != 0) vanishes.
 */

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "tmadfrc/model.hpp"

namespace tmadfrc {

struct SwitchingPattern {
    std::vector<double> tau_on;  // normalized turn-on instant, [0, 1)
    std::vector<double> duty;    // normalized on-duration, (0, 1]
    std::vector<cplx> weights;   // steering weight per antenna

    std::size_t size() const { return weights.size(); }
    bool operator==(const SwitchingPattern&) const = default;
};

/// Throws ConfigError if the pattern does not fit cfg or has out-of-range entries.
void validate_pattern(const SwitchingPattern& pattern, const SystemConfig& cfg);

/// Closed-form DM pattern: turn-off at n/N_t, duty (N_t-1)/N_t, weights steering to steer_angle_deg.
/// N_t = 1 has zero duty and is rejected.
SwitchingPattern design_pattern(const SystemConfig& cfg, double steer_angle_deg);

/// Same timing with every antenna always on (duty 1): no time modulation.
SwitchingPattern always_on_pattern(const SystemConfig& cfg, double steer_angle_deg);

/// sin(pi x) / (pi x) with the removable singularity handled explicitly.
double sinc_pi(double x);

cplx harmonic_coefficient(const SwitchingPattern& pattern, const SystemConfig& cfg, long m, double theta_deg);

/// V(m, theta) for m = -(N_s-1) .. N_s-1, stored at index m + N_s - 1.
class HarmonicTable {
  public:
    HarmonicTable(const SwitchingPattern& pattern, const SystemConfig& cfg, double theta_deg);

    cplx operator()(long m) const { return values_[static_cast<std::size_t>(m + offset_)]; }
    cplx fundamental() const { return (*this)(0); }
    long max_order() const { return offset_; }

  private:
    long offset_;
    std::vector<cplx> values_;
};

/// d'(s, mu) = sum_i d(i, mu) V(s - i, theta).
SymbolGrid scramble_symbols(const SymbolGrid& data, const SwitchingPattern& pattern, const SystemConfig& cfg,
                            double theta_deg);

/// Same as scramble_symbols with a precomputed table.
SymbolGrid scramble_symbols(const SymbolGrid& data, const HarmonicTable& table);

struct DmReport {
    double steer_angle_deg = 0.0;
    double fundamental_at_steer = 0.0;    // |V(0, theta_0)|
    double max_harmonic_at_steer = 0.0;   // max_{m != 0} |V(m, theta_0)|
    double min_probe_harmonic = 0.0;      // min over probes of max_{m != 0} |V(m, theta)|
    double weakest_probe_deg = 0.0;
    double harmonic_tolerance = 0.0;      // relative to |V(0, theta_0)|
    double scrambling_threshold = 0.0;    // relative to |V(0, theta_0)|
    bool fundamental_ok = false;          // V(0, theta_0) != 0
    bool harmonics_cancel_ok = false;     // V(m != 0, theta_0) = 0
    bool scrambling_ok = false;           // V(m != 0, theta != theta_0) != 0

    bool passed() const { return fundamental_ok && harmonics_cancel_ok && scrambling_ok; }
    /// Human-readable list of failed clauses; empty when passed().
    std::string failure_summary() const;
};

/// Checks the three directional-modulation clauses over harmonics |m| <= N_s - 1.
/// Probe angles sharing sin(theta_0) are a precondition violation (ConfigError).
DmReport check_dm_condition(const SwitchingPattern& pattern, const SystemConfig& cfg, double theta0_deg,
                            const std::vector<double>& probe_angles_deg, double harmonic_tolerance = 1e-10,
                            double scrambling_threshold = 1e-3);

/// Synthesizes the transmitted waveform towards theta sample by sample over one useful
/// period per OFDM symbol and projects it onto each subcarrier. The period is cut into
/// N_s * oversample cells, further split at every switching instant, and each piece is
/// integrated with an 8-point Gauss-Legendre rule.
SymbolGrid time_domain_oracle(const SymbolGrid& data, const SwitchingPattern& pattern, const SystemConfig& cfg,
                              double theta_deg, std::size_t oversample = 8);

void to_json(nlohmann::json& j, const SwitchingPattern& p);
void from_json(const nlohmann::json& j, SwitchingPattern& p);

}  // namespace tmadfrc
