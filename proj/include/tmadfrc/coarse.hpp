#pragma once

// Coarse DFT estimator: receive-array DFT per (s, mu) for angle bins, element-wise
// division by the scrambled symbols expected at each bin angle, subcarrier IDFT for
// range and symbol-domain DFT for velocity. All bins are spectral argmaxes; no
// interpolation happens here.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tmadfrc/model.hpp"
#include "tmadfrc/tma.hpp"

namespace tmadfrc {

class EstimationError : public std::runtime_error {
  public:
    enum class Kind { no_peaks, degenerate_bin, subspace_degenerate, grid_too_large, bad_input };

    EstimationError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

  private:
    Kind kind_;
};

struct PeakOptions {
    double noise_factor = 3.0;     // threshold >= noise_factor * median magnitude
    double relative_floor = 0.5;   // threshold >= relative_floor * max magnitude
    bool circular = true;          // neighbours wrap around (DFT bins)
};

/// Local maxima of mag above max(noise_factor * median, relative_floor * max), ascending index.
/// Entries flagged in `excluded` are never reported and do not enter the median.
std::vector<std::size_t> find_peaks(std::span<const double> mag, const PeakOptions& opts,
                                    const std::vector<bool>& excluded = {});

struct AngleBin {
    std::size_t bin = 0;
    double sine = 0.0;
    double angle_deg = 0.0;
    SymbolGrid amplitude;  // A(k, s, mu): receive-DFT output at this bin
};

struct AngleBinSet {
    std::vector<double> spectrum;  // sum over (s, mu) of |receive DFT|, per bin
    std::vector<AngleBin> bins;
};

/// Throws EstimationError(no_peaks) if nothing clears the threshold.
AngleBinSet angle_spectrum(const AntennaGrid& returns, const SystemConfig& cfg, const PeakOptions& opts = {});

struct Descrambled {
    SymbolGrid values;             // A'(k, s, mu), guarded entries set to 0
    std::vector<bool> guarded;     // same layout as values.values()
    std::size_t guarded_count = 0;
    double epsilon = 0.0;
};

struct DescrambleOptions {
    double epsilon_factor = 1e-3;       // eps = factor * median |d'|
    double max_guarded_fraction = 0.1;  // above this the bin is degenerate
};

Descrambled descramble(const SymbolGrid& amplitude, const SymbolGrid& scrambled, const DescrambleOptions& opts = {});

/// Convenience overload that scrambles `data` at theta_hat_deg first.
Descrambled descramble(const SymbolGrid& amplitude, const SymbolGrid& data, const SwitchingPattern& pattern,
                       const SystemConfig& cfg, double theta_hat_deg, const DescrambleOptions& opts = {});

struct RangeProfile {
    SymbolGrid profile;            // r(k, l, mu), l along the subcarrier axis
    std::vector<double> mean_magnitude;
    std::vector<std::size_t> peaks;
    std::vector<double> ranges_m;
};

RangeProfile range_profile(const Descrambled& descrambled, const SystemConfig& cfg, const PeakOptions& opts = {});

struct VelocityProfile {
    std::vector<cplx> spectrum;    // N_p-point DFT along mu
    std::vector<long> peaks;       // signed bins in [-N_p/2, N_p/2)
    std::vector<double> velocities_mps;
};

/// series is r(k, l_peak, mu) for mu = 0..N_p-1.
VelocityProfile velocity_spectrum(std::span<const cplx> series, const SystemConfig& cfg, const PeakOptions& opts = {});

struct CoarseOptions {
    PeakOptions angle_peaks{};
    PeakOptions range_peaks{};
    PeakOptions velocity_peaks{};
    DescrambleOptions descramble{};
};

struct CoarseBinResult {
    AngleBin angle;
    Descrambled descrambled;
    RangeProfile range;
    std::vector<VelocityProfile> velocity;  // one per range peak
};

struct CoarseResult {
    AngleBinSet angles;
    std::vector<CoarseBinResult> bins;
    std::vector<CoarseEstimate> estimates;
    std::vector<BinFailure> failures;
};

/// Angle -> descramble -> range -> velocity, with range and velocity paired to their angle bin.
/// A degenerate bin is recorded in failures; no occupied bin at all throws.
CoarseResult coarse_pipeline(const AntennaGrid& returns, const SymbolGrid& data, const SwitchingPattern& pattern,
                             const SystemConfig& cfg, const CoarseOptions& opts = {});

/// CSV with header "bin_index,magnitude,phase".
std::string spectrum_csv(std::span<const cplx> spectrum);
std::string spectrum_csv(std::span<const double> magnitude);

}  // namespace tmadfrc
