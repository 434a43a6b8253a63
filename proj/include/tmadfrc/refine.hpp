#pragma once

/**
 * @file refine.hpp
 * @brief Super-resolution refinement of coarse estimates.
 *
 * Per occupied angle bin:
 *   1. MUSIC over a fine angle grid around the bin resolves the N_q sources inside it.
 *   2. Ranges are refined by least squares on one OFDM symbol, scanning every
 *      combination of per-target range candidates around the coarse ranges.
 *   3. Velocities are refined the same way over the whole frame with the paired
 *      (angle, range) estimates held fixed.
 *
 * The least-squares residual is separable: every reconstruction term is a fixed
 * vector b_q times a unit phase that depends on one index t (subcarrier for range,
 * OFDM symbol for velocity) and on the grid value. Expanding |y - sum_q b_q p_q|^2
 * into correlations sum conj(y) b_q and Gram terms sum conj(b_q) b_q' per t makes
 * each grid combination cost O(T N_q^2) instead of a full pass over the data.
 */

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tmadfrc/coarse.hpp"
#include "tmadfrc/model.hpp"
#include "tmadfrc/tma.hpp"

namespace tmadfrc {

// ---------------------------------------------------------------- MUSIC

struct MusicOptions {
    double step_deg = 0.1;
    double span_bins = 1.0;          // search sin(theta) within +-span_bins receive-DFT bins
    std::size_t symbol_index = 0;    // snapshots are all subcarriers of this OFDM symbol
    bool full_frame = false;         // use every (s, mu) instead
    double min_eigen_ratio = 1.5;    // lambda_D / lambda_{D+1} must exceed this
};

/// Sample covariance (1/N) sum x x^H over antenna snapshots.
Eigen::MatrixXcd sample_covariance(const AntennaGrid& returns, const MusicOptions& opts);

/// Receive steering vector a_m(theta) = exp(-j 2 pi m d_r sin(theta) / lambda).
Eigen::VectorXcd rx_steering(const SystemConfig& cfg, double theta_deg);

/// Angles i * step inside the sine window of `bin_sine` +- span_bins bins, clipped to [-90, 90].
std::vector<double> music_grid(const SystemConfig& cfg, double bin_sine, const MusicOptions& opts);

/// 1 / ||E_n^H a(theta)||^2 with E_n the eigenvectors beyond the signal_dim largest eigenvalues.
std::vector<double> music_pseudospectrum(const Eigen::MatrixXcd& covariance, std::size_t signal_dim,
                                         const SystemConfig& cfg, const std::vector<double>& grid_deg);

/// Number of sources from the largest ratio between consecutive descending eigenvalues.
std::size_t estimate_source_count(const std::vector<double>& eigenvalues_desc);

struct MusicResult {
    std::vector<double> grid_deg;
    std::vector<double> pseudospectrum;
    std::vector<double> eigenvalues;  // descending
    std::vector<double> angles_deg;   // up to n_sources peaks, ascending angle
};

/// signal_dim counts every source in the scene (all bins); n_sources the peaks wanted in this bin.
MusicResult music_angles(const AntennaGrid& returns, const SystemConfig& cfg, double bin_sine, std::size_t n_sources,
                         std::size_t signal_dim, const MusicOptions& opts = {});

// ---------------------------------------------------------------- least squares

/// Odd-count grid of `points` values spanning one `span` centred on `centre`.
std::vector<double> centred_grid(double centre, double span, std::size_t points);

struct SeparableTerms {
    double y_energy = 0.0;
    std::vector<std::vector<cplx>> corr;                  // [q][t]  sum conj(y) b_q
    std::vector<std::vector<std::vector<cplx>>> gram;     // [q][q'][t]  sum conj(b_q) b_q'
};

struct GridSearchResult {
    std::vector<std::size_t> index;  // argmin grid index per target
    double residual = 0.0;
    std::vector<cplx> gains;         // fitted gains (all 1 when not fitted)
    std::size_t combinations = 0;
    std::vector<double> surface;     // residual per combination, enumeration order, when recorded
};

/// Exhaustive search over the Cartesian product of per-target candidate phase tables.
/// phases[q][g][t] is the unit phase of candidate g of target q at index t. Exact ties keep the
/// lexicographically smallest index. Throws EstimationError(grid_too_large) above max_combinations.
GridSearchResult separable_grid_search(const SeparableTerms& terms,
                                       const std::vector<std::vector<std::vector<cplx>>>& phases, bool fit_gains,
                                       std::size_t max_combinations, bool record_surface = false);

struct LsOptions {
    std::size_t grid_points = 101;
    double span_bins = 1.0;              // grid spans this many coarse bins around each coarse value
    bool fit_gains = false;
    std::size_t max_combinations = 1'000'000;
    std::size_t antenna_stride = 1;      // use every k-th receive antenna
    std::size_t subcarrier_stride = 1;   // use every k-th subcarrier
    std::size_t symbol_index = 0;        // range refinement only
    bool record_surface = false;
};

inline LsOptions default_velocity_ls_options()
{
    LsOptions o;
    o.grid_points = 11;
    return o;
}

struct RangeLsResult {
    std::vector<double> angles_deg;
    std::vector<double> ranges_m;
    std::vector<double> candidates_m;
    double residual = 0.0;
    std::vector<cplx> gains;
    std::vector<std::string> warnings;
    std::vector<double> surface;
};

/// Each target's candidates are the union of grids around every coarse range of the bin.
RangeLsResult ls_range_refine(const AntennaGrid& returns, const SymbolGrid& data, const SwitchingPattern& pattern,
                              const SystemConfig& cfg, const std::vector<double>& angles_deg,
                              const std::vector<double>& coarse_ranges_m, const LsOptions& opts = {});

struct VelocityLsResult {
    std::vector<double> velocities_mps;
    std::vector<double> candidates_mps;
    double residual = 0.0;
    std::vector<cplx> gains;
    std::vector<std::string> warnings;
    std::vector<double> surface;
};

VelocityLsResult ls_velocity_refine(const AntennaGrid& returns, const SymbolGrid& data,
                                    const SwitchingPattern& pattern, const SystemConfig& cfg,
                                    const std::vector<double>& angles_deg, const std::vector<double>& ranges_m,
                                    const std::vector<double>& coarse_velocities_mps,
                                    const LsOptions& opts = default_velocity_ls_options());

/// Direct sum over (m, s) of symbol `mu` of |y - sum_q gain_q d'(s,mu,theta_q) a_m(theta_q) e^{-j2pi s f_s 2R_q/c}|^2.
double range_residual(const AntennaGrid& returns, const SymbolGrid& data, const SwitchingPattern& pattern,
                      const SystemConfig& cfg, std::size_t mu, const std::vector<double>& angles_deg,
                      const std::vector<double>& ranges_m, const std::vector<cplx>& gains = {});

/// Direct residual over the whole frame including the narrowband Doppler phase e^{+j2pi mu T_p 2 v f_c / c}.
double velocity_residual(const AntennaGrid& returns, const SymbolGrid& data, const SwitchingPattern& pattern,
                         const SystemConfig& cfg, const std::vector<double>& angles_deg,
                         const std::vector<double>& ranges_m, const std::vector<double>& velocities_mps,
                         const std::vector<cplx>& gains = {});

// ---------------------------------------------------------------- full estimator

struct Algorithm1Options {
    CoarseOptions coarse{};
    MusicOptions music{};
    LsOptions range_ls{};
    LsOptions velocity_ls = default_velocity_ls_options();
    /// Sources per angle bin; bins not listed use the number of coarse detections in the bin.
    std::map<std::size_t, std::size_t> sources_per_bin;
    /// Use the eigenvalue-gap estimate for the total signal dimension instead of the per-bin sum.
    bool estimate_signal_dim = false;
    bool refine_velocity = true;
};

struct BinRefinement {
    std::size_t angle_bin = 0;
    MusicResult music;
    RangeLsResult range;
    VelocityLsResult velocity;
};

struct Algorithm1Result {
    EstimateSet estimates;
    std::optional<CoarseResult> coarse;  // empty when no bin was occupied
    std::vector<BinRefinement> bins;
};

/// Coarse angles -> coarse ranges/velocities -> MUSIC -> LS range -> LS velocity, per occupied bin.
/// A failing bin is recorded in estimates.failures and the remaining bins still run.
Algorithm1Result algorithm1(const AntennaGrid& returns, const SymbolGrid& data, const SwitchingPattern& pattern,
                            const SystemConfig& cfg, const Algorithm1Options& opts = {});

/// CSV "angle_deg,pseudospectrum".
std::string pseudospectrum_csv(const MusicResult& music);

/// CSV "value_0,...,value_{n-1},residual" of a recorded surface; every target shares `candidates`.
std::string residual_surface_csv(const std::vector<double>& candidates, std::size_t n_targets,
                                 const std::vector<double>& surface);

}  // namespace tmadfrc
