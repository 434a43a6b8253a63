#pragma once

// Gray-coded QPSK / square-QAM mapping and BER-versus-direction sweeps for a naive
// eavesdropper that knows the constellation and the CU gain convention only.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tmadfrc/model.hpp"
#include "tmadfrc/tma.hpp"

namespace tmadfrc {

struct Constellation {
    std::size_t order = 4;
    std::size_t bits_per_symbol = 2;
    std::vector<cplx> points;  // points[label], unit average power
};

/// Square Gray QAM of order 4 (QPSK), 16 or 64. Throws std::invalid_argument otherwise.
Constellation make_constellation(std::size_t order = 4);

/// Bits are consumed in grid storage order (subcarrier fastest), MSB of each label first.
SymbolGrid modulate(std::span<const std::uint8_t> bits, const Constellation& c, std::size_t num_subcarriers,
                    std::size_t num_symbols);

/// Nearest-point decision on grid / gain_reference.
std::vector<std::uint8_t> demodulate(const SymbolGrid& grid, const Constellation& c, cplx gain_reference);

/// The gain a receiver at the CU angle sees: V(0, theta_0).
cplx cu_gain_reference(const SwitchingPattern& pattern, const SystemConfig& cfg);

std::vector<std::uint8_t> random_bits(std::size_t count, std::uint64_t seed);

/// One frame of random symbols for cfg, bits drawn from derive_seed(seed, "data-bits").
SymbolGrid random_frame(const SystemConfig& cfg, std::uint64_t seed, std::size_t order = 4);

struct BerPoint {
    double angle_deg = 0.0;
    double ber = 0.0;
    std::size_t n_bits = 0;
    std::size_t n_errors = 0;
};

struct BerSweepOptions {
    std::size_t order = 4;
    std::size_t threads = 0;  // 0: hardware concurrency
};

/// Monte-Carlo BER per angle. Each frame is one full N_s x N_p grid; every (angle, frame) pair
/// draws bits and noise from seeds derived from `seed`, so results do not depend on threading.
std::vector<BerPoint> ber_vs_angle(const SwitchingPattern& pattern, const SystemConfig& cfg,
                                   const std::vector<double>& angles_deg, double snr_db, std::size_t n_frames,
                                   std::uint64_t seed, const BerSweepOptions& opts = {});

/// -90 to 90 degrees in 1-degree steps.
std::vector<double> default_sweep_angles();

/// CSV "angle_deg,ber,n_bits".
std::string ber_csv(const std::vector<BerPoint>& curve);

}  // namespace tmadfrc
