#include "tmadfrc/refine.hpp"

#include <algorithm>
#include <cmath>
#include <locale>
#include <numeric>
#include <set>
#include <sstream>

namespace tmadfrc {

namespace {

cplx turn(double cycles)
{
    const double frac = cycles - std::floor(cycles);
    return std::polar(1.0, 2.0 * kPi * frac);
}

std::vector<std::size_t> strided(std::size_t n, std::size_t stride)
{
    if (stride == 0) throw EstimationError(EstimationError::Kind::bad_input, "subset stride must be >= 1");
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < n; i += stride) idx.push_back(i);
    return idx;
}

std::vector<cplx> steering(const SystemConfig& cfg, double theta_deg)
{
    const double sine = std::sin(deg_to_rad(theta_deg));
    std::vector<cplx> a(cfg.num_rx_antennas);
    for (std::size_t m = 0; m < a.size(); ++m) a[m] = turn(-static_cast<double>(m) * cfg.rx_spacing_wavelengths * sine);
    return a;
}

double range_cycles(const SystemConfig& cfg, std::size_t s, double range_m)
{
    return -static_cast<double>(s) * cfg.subcarrier_spacing_hz * 2.0 * range_m / cfg.speed_of_light();
}

double doppler_cycles(const SystemConfig& cfg, std::size_t mu, double velocity_mps)
{
    return static_cast<double>(mu) * cfg.symbol_duration_s * 2.0 * velocity_mps * cfg.carrier_freq_hz /
           cfg.speed_of_light();
}

// Union of centred grids around every coarse value, sorted and deduplicated; negatives dropped
// when `non_negative`.
std::vector<double> candidate_union(const std::vector<double>& coarse, double span, std::size_t points,
                                    bool non_negative)
{
    std::vector<double> all;
    for (double c : coarse) {
        for (double v : centred_grid(c, span, points))
            if (!non_negative || v >= 0.0) all.push_back(v);
    }
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end(),
                          [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)); }),
              all.end());
    return all;
}

void check_dims(const AntennaGrid& returns, const SymbolGrid& data, const SystemConfig& cfg)
{
    if (returns.num_antennas() != cfg.num_rx_antennas || returns.num_subcarriers() != cfg.num_subcarriers ||
        returns.num_symbols() != cfg.num_ofdm_symbols)
        throw EstimationError(EstimationError::Kind::bad_input, "received grid does not match config");
    if (data.num_subcarriers() != cfg.num_subcarriers || data.num_symbols() != cfg.num_ofdm_symbols)
        throw EstimationError(EstimationError::Kind::bad_input, "data grid does not match config");
}

std::string boundary_warning(const char* what, std::size_t q, double value)
{
    std::ostringstream os;
    os << what << " grid exhausted: target " << q << " argmin " << value << " lies on the candidate boundary";
    return os.str();
}

}  // namespace

// ---------------------------------------------------------------- MUSIC

Eigen::MatrixXcd sample_covariance(const AntennaGrid& returns, const MusicOptions& opts)
{
    const std::size_t nr = returns.num_antennas();
    if (!opts.full_frame && opts.symbol_index >= returns.num_symbols())
        throw EstimationError(EstimationError::Kind::bad_input, "MUSIC symbol_index outside the frame");
    const std::size_t mu_lo = opts.full_frame ? 0 : opts.symbol_index;
    const std::size_t mu_hi = opts.full_frame ? returns.num_symbols() : opts.symbol_index + 1;

    Eigen::MatrixXcd cov = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(nr), static_cast<Eigen::Index>(nr));
    std::size_t count = 0;
    for (std::size_t mu = mu_lo; mu < mu_hi; ++mu) {
        for (std::size_t s = 0; s < returns.num_subcarriers(); ++s) {
            const Eigen::Map<const Eigen::VectorXcd> x(returns.snapshot(s, mu), static_cast<Eigen::Index>(nr));
            cov.noalias() += x * x.adjoint();
            ++count;
        }
    }
    if (count < nr) {
        throw EstimationError(EstimationError::Kind::bad_input, "MUSIC needs at least N_r snapshots, got " +
                                                                     std::to_string(count));
    }
    return cov / static_cast<double>(count);
}

Eigen::VectorXcd rx_steering(const SystemConfig& cfg, double theta_deg)
{
    const auto a = steering(cfg, theta_deg);
    Eigen::VectorXcd v(static_cast<Eigen::Index>(a.size()));
    for (std::size_t m = 0; m < a.size(); ++m) v(static_cast<Eigen::Index>(m)) = a[m];
    return v;
}

std::vector<double> music_grid(const SystemConfig& cfg, double bin_sine, const MusicOptions& opts)
{
    if (!(opts.step_deg > 0.0)) throw EstimationError(EstimationError::Kind::bad_input, "MUSIC step must be > 0");
    const double bin_width = 1.0 / (static_cast<double>(cfg.num_rx_antennas) * cfg.rx_spacing_wavelengths);
    const double lo = std::max(-1.0, bin_sine - opts.span_bins * bin_width);
    const double hi = std::min(1.0, bin_sine + opts.span_bins * bin_width);
    const double theta_lo = rad_to_deg(std::asin(lo));
    const double theta_hi = rad_to_deg(std::asin(hi));

    // Divide by an integral reciprocal when possible so 0.1-degree grids hit 20.0 exactly.
    const double inv = std::round(1.0 / opts.step_deg);
    const bool integral = inv > 0.0 && std::abs(inv * opts.step_deg - 1.0) < 1e-12;
    auto at = [&](long i) { return integral ? static_cast<double>(i) / inv : static_cast<double>(i) * opts.step_deg; };

    const auto first = static_cast<long>(std::ceil(theta_lo / opts.step_deg - 1e-9));
    const auto last = static_cast<long>(std::floor(theta_hi / opts.step_deg + 1e-9));
    std::vector<double> grid;
    for (long i = first; i <= last; ++i) grid.push_back(at(i));
    return grid;
}

std::vector<double> music_pseudospectrum(const Eigen::MatrixXcd& covariance, std::size_t signal_dim,
                                         const SystemConfig& cfg, const std::vector<double>& grid_deg)
{
    const auto nr = static_cast<std::size_t>(covariance.rows());
    if (signal_dim == 0 || signal_dim >= nr)
        throw EstimationError(EstimationError::Kind::bad_input, "MUSIC signal dimension must be in [1, N_r - 1]");
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(covariance);
    if (eig.info() != Eigen::Success)
        throw EstimationError(EstimationError::Kind::subspace_degenerate, "covariance eigendecomposition failed");
    // Eigenvalues ascend: the first N_r - D eigenvectors span the noise subspace.
    const Eigen::MatrixXcd noise = eig.eigenvectors().leftCols(static_cast<Eigen::Index>(nr - signal_dim));

    std::vector<double> p;
    p.reserve(grid_deg.size());
    for (double theta : grid_deg) {
        const Eigen::VectorXcd proj = noise.adjoint() * rx_steering(cfg, theta);
        p.push_back(1.0 / std::max(proj.squaredNorm(), 1e-300));
    }
    return p;
}

std::size_t estimate_source_count(const std::vector<double>& ev)
{
    std::size_t best = 1;
    double best_ratio = 0.0;
    for (std::size_t i = 0; i + 1 < ev.size(); ++i) {
        const double denom = std::max(ev[i + 1], 1e-300);
        const double ratio = ev[i] / denom;
        if (ratio > best_ratio) {
            best_ratio = ratio;
            best = i + 1;
        }
    }
    return std::min(best, ev.empty() ? std::size_t{1} : ev.size() - 1);
}

MusicResult music_angles(const AntennaGrid& returns, const SystemConfig& cfg, double bin_sine, std::size_t n_sources,
                         std::size_t signal_dim, const MusicOptions& opts)
{
    const std::size_t nr = returns.num_antennas();
    if (n_sources == 0 || n_sources > signal_dim || signal_dim >= nr)
        throw EstimationError(EstimationError::Kind::bad_input,
                              "MUSIC requires 1 <= n_sources <= signal_dim < N_r");

    const Eigen::MatrixXcd cov = sample_covariance(returns, opts);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(cov, Eigen::EigenvaluesOnly);

    MusicResult out;
    for (Eigen::Index i = eig.eigenvalues().size() - 1; i >= 0; --i) out.eigenvalues.push_back(eig.eigenvalues()(i));
    const double signal_edge = out.eigenvalues[signal_dim - 1];
    const double noise_top = out.eigenvalues[signal_dim];
    if (noise_top > 0.0 && signal_edge / noise_top < opts.min_eigen_ratio) {
        std::ostringstream os;
        os << "MUSIC subspace degenerate: eigenvalue ratio " << signal_edge / noise_top << " at dimension "
           << signal_dim << " is below " << opts.min_eigen_ratio;
        throw EstimationError(EstimationError::Kind::subspace_degenerate, os.str());
    }

    out.grid_deg = music_grid(cfg, bin_sine, opts);
    out.pseudospectrum = music_pseudospectrum(cov, signal_dim, cfg, out.grid_deg);

    const auto& p = out.pseudospectrum;
    std::vector<std::size_t> peaks;
    for (std::size_t i = 1; i + 1 < p.size(); ++i)
        if (p[i] > p[i - 1] && p[i] >= p[i + 1]) peaks.push_back(i);
    std::stable_sort(peaks.begin(), peaks.end(), [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
    if (peaks.size() > n_sources) peaks.resize(n_sources);
    for (std::size_t i : peaks) out.angles_deg.push_back(out.grid_deg[i]);
    std::sort(out.angles_deg.begin(), out.angles_deg.end());
    return out;
}

// ---------------------------------------------------------------- least squares

std::vector<double> centred_grid(double centre, double span, std::size_t points)
{
    if (points == 0) throw EstimationError(EstimationError::Kind::bad_input, "grid needs at least one point");
    if (points == 1) return {centre};
    std::vector<double> g;
    const double half = 0.5 * static_cast<double>(points - 1);
    const double step = span / static_cast<double>(points - 1);
    for (std::size_t i = 0; i < points; ++i) g.push_back(centre + (static_cast<double>(i) - half) * step);
    if (points % 2 == 0) g.insert(std::upper_bound(g.begin(), g.end(), centre), centre);
    return g;
}

GridSearchResult separable_grid_search(const SeparableTerms& terms,
                                       const std::vector<std::vector<std::vector<cplx>>>& phases, bool fit_gains,
                                       std::size_t max_combinations, bool record_surface)
{
    const std::size_t nq = phases.size();
    if (nq == 0) throw EstimationError(EstimationError::Kind::bad_input, "grid search needs at least one target");
    if (terms.corr.size() != nq || terms.gram.size() != nq)
        throw EstimationError(EstimationError::Kind::bad_input, "grid search: term/phase target counts differ");

    std::size_t total = 1;
    for (const auto& cand : phases) {
        if (cand.empty()) throw EstimationError(EstimationError::Kind::bad_input, "grid search: empty candidate grid");
        if (total > max_combinations / cand.size()) {
            throw EstimationError(EstimationError::Kind::grid_too_large,
                                  "grid search: combination count exceeds limit of " + std::to_string(max_combinations));
        }
        total *= cand.size();
    }

    const std::size_t nt = terms.corr[0].size();
    // lin[q][g] = sum_t phase * corr; self[q][g] = sum_t |phase|^2 gram_qq
    std::vector<std::vector<cplx>> lin(nq);
    std::vector<std::vector<double>> self(nq);
    for (std::size_t q = 0; q < nq; ++q) {
        for (const auto& ph : phases[q]) {
            cplx l{0.0, 0.0};
            double e = 0.0;
            for (std::size_t t = 0; t < nt; ++t) {
                l += ph[t] * terms.corr[q][t];
                e += std::norm(ph[t]) * terms.gram[q][q][t].real();
            }
            lin[q].push_back(l);
            self[q].push_back(e);
        }
    }
    // cross[(q, q')][g * G_q' + g'] = sum_t conj(phase_q,g) phase_q',g' gram_qq'
    struct Pair {
        std::size_t q, r;
        std::vector<cplx> values;
    };
    std::vector<Pair> pairs;
    for (std::size_t q = 0; q < nq; ++q) {
        for (std::size_t r = q + 1; r < nq; ++r) {
            Pair pr{q, r, {}};
            pr.values.reserve(phases[q].size() * phases[r].size());
            for (const auto& pq : phases[q]) {
                for (const auto& prr : phases[r]) {
                    cplx acc{0.0, 0.0};
                    for (std::size_t t = 0; t < nt; ++t) acc += std::conj(pq[t]) * prr[t] * terms.gram[q][r][t];
                    pr.values.push_back(acc);
                }
            }
            pairs.push_back(std::move(pr));
        }
    }

    GridSearchResult best;
    best.residual = std::numeric_limits<double>::infinity();
    best.combinations = total;
    if (record_surface) best.surface.reserve(total);

    std::vector<std::size_t> idx(nq, 0);
    Eigen::MatrixXcd gram(static_cast<Eigen::Index>(nq), static_cast<Eigen::Index>(nq));
    Eigen::VectorXcd rhs(static_cast<Eigen::Index>(nq));
    for (std::size_t combo = 0; combo < total; ++combo) {
        double residual = 0.0;
        std::vector<cplx> gains(nq, cplx{1.0, 0.0});
        if (!fit_gains) {
            double acc = terms.y_energy;
            for (std::size_t q = 0; q < nq; ++q) acc += self[q][idx[q]] - 2.0 * lin[q][idx[q]].real();
            for (const auto& pr : pairs) acc += 2.0 * pr.values[idx[pr.q] * phases[pr.r].size() + idx[pr.r]].real();
            residual = acc;
        } else {
            for (std::size_t q = 0; q < nq; ++q) {
                const auto qi = static_cast<Eigen::Index>(q);
                gram(qi, qi) = self[q][idx[q]];
                rhs(qi) = std::conj(lin[q][idx[q]]);
            }
            for (const auto& pr : pairs) {
                const cplx v = pr.values[idx[pr.q] * phases[pr.r].size() + idx[pr.r]];
                gram(static_cast<Eigen::Index>(pr.q), static_cast<Eigen::Index>(pr.r)) = v;
                gram(static_cast<Eigen::Index>(pr.r), static_cast<Eigen::Index>(pr.q)) = std::conj(v);
            }
            const Eigen::VectorXcd beta = gram.completeOrthogonalDecomposition().solve(rhs);
            residual = terms.y_energy - (rhs.adjoint() * beta)(0).real();
            for (std::size_t q = 0; q < nq; ++q) gains[q] = beta(static_cast<Eigen::Index>(q));
        }
        if (record_surface) best.surface.push_back(residual);
        if (residual < best.residual) {
            best.residual = residual;
            best.index = idx;
            best.gains = gains;
        }
        // odometer, last target fastest
        for (std::size_t q = nq; q-- > 0;) {
            if (++idx[q] < phases[q].size()) break;
            idx[q] = 0;
        }
    }
    return best;
}

RangeLsResult ls_range_refine(const AntennaGrid& returns, const SymbolGrid& data, const SwitchingPattern& pattern,
                              const SystemConfig& cfg, const std::vector<double>& angles_deg,
                              const std::vector<double>& coarse_ranges_m, const LsOptions& opts)
{
    check_dims(returns, data, cfg);
    if (angles_deg.empty()) throw EstimationError(EstimationError::Kind::bad_input, "range LS needs angle estimates");
    if (coarse_ranges_m.empty())
        throw EstimationError(EstimationError::Kind::bad_input, "range LS needs coarse range estimates");
    if (opts.symbol_index >= cfg.num_ofdm_symbols)
        throw EstimationError(EstimationError::Kind::bad_input, "range LS symbol_index outside the frame");

    const std::size_t nq = angles_deg.size();
    const std::size_t mu = opts.symbol_index;
    const auto ants = strided(cfg.num_rx_antennas, opts.antenna_stride);
    const auto subs = strided(cfg.num_subcarriers, opts.subcarrier_stride);

    std::vector<std::vector<cplx>> scrambled(nq), steer(nq);
    for (std::size_t q = 0; q < nq; ++q) {
        const SymbolGrid d = scramble_symbols(data, pattern, cfg, angles_deg[q]);
        scrambled[q].resize(subs.size());
        for (std::size_t t = 0; t < subs.size(); ++t) scrambled[q][t] = d(subs[t], mu);
        steer[q] = steering(cfg, angles_deg[q]);
    }

    SeparableTerms terms;
    terms.corr.assign(nq, std::vector<cplx>(subs.size()));
    terms.gram.assign(nq, std::vector<std::vector<cplx>>(nq, std::vector<cplx>(subs.size())));
    for (std::size_t t = 0; t < subs.size(); ++t) {
        const std::size_t s = subs[t];
        for (std::size_t m : ants) terms.y_energy += std::norm(returns(m, s, mu));
        for (std::size_t q = 0; q < nq; ++q) {
            cplx c{0.0, 0.0};
            for (std::size_t m : ants) c += std::conj(returns(m, s, mu)) * steer[q][m];
            terms.corr[q][t] = c * scrambled[q][t];
            for (std::size_t r = 0; r < nq; ++r) {
                cplx g{0.0, 0.0};
                for (std::size_t m : ants) g += std::conj(steer[q][m]) * steer[r][m];
                terms.gram[q][r][t] = std::conj(scrambled[q][t]) * scrambled[r][t] * g;
            }
        }
    }

    RangeLsResult out;
    out.angles_deg = angles_deg;
    const double span = opts.span_bins * derived_resolutions(cfg).range_res_m;
    out.candidates_m = candidate_union(coarse_ranges_m, span, opts.grid_points, true);
    if (out.candidates_m.empty()) throw EstimationError(EstimationError::Kind::bad_input, "range LS: no candidates");

    std::vector<std::vector<cplx>> table;
    for (double r : out.candidates_m) {
        std::vector<cplx> ph(subs.size());
        for (std::size_t t = 0; t < subs.size(); ++t) ph[t] = turn(range_cycles(cfg, subs[t], r));
        table.push_back(std::move(ph));
    }
    const std::vector<std::vector<std::vector<cplx>>> phases(nq, table);
    auto best = separable_grid_search(terms, phases, opts.fit_gains, opts.max_combinations, opts.record_surface);

    for (std::size_t q = 0; q < nq; ++q) {
        const std::size_t i = best.index[q];
        out.ranges_m.push_back(out.candidates_m[i]);
        if (out.candidates_m.size() > 1 && (i == 0 || i + 1 == out.candidates_m.size()))
            out.warnings.push_back(boundary_warning("range", q, out.candidates_m[i]));
    }
    out.residual = best.residual;
    out.gains = best.gains;
    out.surface = std::move(best.surface);
    return out;
}

VelocityLsResult ls_velocity_refine(const AntennaGrid& returns, const SymbolGrid& data,
                                    const SwitchingPattern& pattern, const SystemConfig& cfg,
                                    const std::vector<double>& angles_deg, const std::vector<double>& ranges_m,
                                    const std::vector<double>& coarse_velocities_mps, const LsOptions& opts)
{
    check_dims(returns, data, cfg);
    if (angles_deg.empty() || angles_deg.size() != ranges_m.size())
        throw EstimationError(EstimationError::Kind::bad_input, "velocity LS needs paired angle/range estimates");
    if (coarse_velocities_mps.empty())
        throw EstimationError(EstimationError::Kind::bad_input, "velocity LS needs coarse velocity estimates");

    const std::size_t nq = angles_deg.size();
    const std::size_t np = cfg.num_ofdm_symbols;
    const auto ants = strided(cfg.num_rx_antennas, opts.antenna_stride);
    const auto subs = strided(cfg.num_subcarriers, opts.subcarrier_stride);

    std::vector<SymbolGrid> scrambled;
    std::vector<std::vector<cplx>> steer(nq), delay(nq);
    for (std::size_t q = 0; q < nq; ++q) {
        scrambled.push_back(scramble_symbols(data, pattern, cfg, angles_deg[q]));
        steer[q] = steering(cfg, angles_deg[q]);
        delay[q].resize(cfg.num_subcarriers);
        for (std::size_t s = 0; s < cfg.num_subcarriers; ++s) delay[q][s] = turn(range_cycles(cfg, s, ranges_m[q]));
    }

    SeparableTerms terms;
    terms.corr.assign(nq, std::vector<cplx>(np));
    terms.gram.assign(nq, std::vector<std::vector<cplx>>(nq, std::vector<cplx>(np)));
    // Antenna sums do not depend on (s, mu): precompute them.
    std::vector<std::vector<cplx>> steer_gram(nq, std::vector<cplx>(nq));
    for (std::size_t q = 0; q < nq; ++q)
        for (std::size_t r = 0; r < nq; ++r)
            for (std::size_t m : ants) steer_gram[q][r] += std::conj(steer[q][m]) * steer[r][m];

    std::vector<cplx> base(nq);
    for (std::size_t mu = 0; mu < np; ++mu) {
        for (std::size_t s : subs) {
            for (std::size_t q = 0; q < nq; ++q) base[q] = scrambled[q](s, mu) * delay[q][s];
            for (std::size_t m : ants) terms.y_energy += std::norm(returns(m, s, mu));
            for (std::size_t q = 0; q < nq; ++q) {
                cplx c{0.0, 0.0};
                for (std::size_t m : ants) c += std::conj(returns(m, s, mu)) * steer[q][m];
                terms.corr[q][mu] += c * base[q];
                for (std::size_t r = 0; r < nq; ++r)
                    terms.gram[q][r][mu] += std::conj(base[q]) * base[r] * steer_gram[q][r];
            }
        }
    }

    VelocityLsResult out;
    const double span = opts.span_bins * derived_resolutions(cfg).velocity_res_mps;
    out.candidates_mps = candidate_union(coarse_velocities_mps, span, opts.grid_points, false);

    std::vector<std::vector<cplx>> table;
    for (double v : out.candidates_mps) {
        std::vector<cplx> ph(np);
        for (std::size_t mu = 0; mu < np; ++mu) ph[mu] = turn(doppler_cycles(cfg, mu, v));
        table.push_back(std::move(ph));
    }
    const std::vector<std::vector<std::vector<cplx>>> phases(nq, table);
    auto best = separable_grid_search(terms, phases, opts.fit_gains, opts.max_combinations, opts.record_surface);

    for (std::size_t q = 0; q < nq; ++q) {
        const std::size_t i = best.index[q];
        out.velocities_mps.push_back(out.candidates_mps[i]);
        if (out.candidates_mps.size() > 1 && (i == 0 || i + 1 == out.candidates_mps.size()))
            out.warnings.push_back(boundary_warning("velocity", q, out.candidates_mps[i]));
    }
    out.residual = best.residual;
    out.gains = best.gains;
    out.surface = std::move(best.surface);
    return out;
}

double range_residual(const AntennaGrid& returns, const SymbolGrid& data, const SwitchingPattern& pattern,
                      const SystemConfig& cfg, std::size_t mu, const std::vector<double>& angles_deg,
                      const std::vector<double>& ranges_m, const std::vector<cplx>& gains)
{
    check_dims(returns, data, cfg);
    const std::size_t nq = angles_deg.size();
    std::vector<SymbolGrid> d;
    std::vector<std::vector<cplx>> a;
    for (std::size_t q = 0; q < nq; ++q) {
        d.push_back(scramble_symbols(data, pattern, cfg, angles_deg[q]));
        a.push_back(steering(cfg, angles_deg[q]));
    }
    double total = 0.0;
    for (std::size_t s = 0; s < cfg.num_subcarriers; ++s) {
        for (std::size_t m = 0; m < cfg.num_rx_antennas; ++m) {
            cplx rec{0.0, 0.0};
            for (std::size_t q = 0; q < nq; ++q) {
                const cplx g = gains.empty() ? cplx{1.0, 0.0} : gains[q];
                rec += g * d[q](s, mu) * turn(range_cycles(cfg, s, ranges_m[q])) * a[q][m];
            }
            total += std::norm(returns(m, s, mu) - rec);
        }
    }
    return total;
}

double velocity_residual(const AntennaGrid& returns, const SymbolGrid& data, const SwitchingPattern& pattern,
                         const SystemConfig& cfg, const std::vector<double>& angles_deg,
                         const std::vector<double>& ranges_m, const std::vector<double>& velocities_mps,
                         const std::vector<cplx>& gains)
{
    check_dims(returns, data, cfg);
    const std::size_t nq = angles_deg.size();
    std::vector<SymbolGrid> d;
    std::vector<std::vector<cplx>> a;
    for (std::size_t q = 0; q < nq; ++q) {
        d.push_back(scramble_symbols(data, pattern, cfg, angles_deg[q]));
        a.push_back(steering(cfg, angles_deg[q]));
    }
    double total = 0.0;
    for (std::size_t mu = 0; mu < cfg.num_ofdm_symbols; ++mu) {
        for (std::size_t s = 0; s < cfg.num_subcarriers; ++s) {
            for (std::size_t m = 0; m < cfg.num_rx_antennas; ++m) {
                cplx rec{0.0, 0.0};
                for (std::size_t q = 0; q < nq; ++q) {
                    const cplx g = gains.empty() ? cplx{1.0, 0.0} : gains[q];
                    rec += g * d[q](s, mu) * turn(range_cycles(cfg, s, ranges_m[q])) *
                           turn(doppler_cycles(cfg, mu, velocities_mps[q])) * a[q][m];
                }
                total += std::norm(returns(m, s, mu) - rec);
            }
        }
    }
    return total;
}

// ---------------------------------------------------------------- full estimator

Algorithm1Result algorithm1(const AntennaGrid& returns, const SymbolGrid& data, const SwitchingPattern& pattern,
                            const SystemConfig& cfg, const Algorithm1Options& opts)
{
    Algorithm1Result result;
    try {
        result.coarse = coarse_pipeline(returns, data, pattern, cfg, opts.coarse);
    } catch (const EstimationError& e) {
        if (e.kind() == EstimationError::Kind::no_peaks) return result;
        throw;
    }
    const CoarseResult& coarse = *result.coarse;
    result.estimates.coarse = coarse.estimates;
    result.estimates.failures = coarse.failures;

    struct BinPlan {
        const CoarseBinResult* bin;
        std::size_t n_sources;
        std::vector<double> ranges, velocities;
    };
    std::vector<BinPlan> plans;
    std::size_t signal_dim = 0;
    for (const auto& b : coarse.bins) {
        BinPlan plan{&b, 0, {}, {}};
        std::size_t detections = 0;
        std::set<double> ranges, velocities;
        for (const auto& e : coarse.estimates) {
            if (e.angle_bin != b.angle.bin) continue;
            ++detections;
            ranges.insert(e.range_m);
            velocities.insert(e.velocity_mps);
        }
        if (detections == 0) {
            result.estimates.failures.push_back({b.angle.bin, "no range/velocity peak in occupied angle bin"});
            continue;
        }
        const auto it = opts.sources_per_bin.find(b.angle.bin);
        plan.n_sources = it != opts.sources_per_bin.end() ? it->second : detections;
        plan.ranges.assign(ranges.begin(), ranges.end());
        plan.velocities.assign(velocities.begin(), velocities.end());
        signal_dim += plan.n_sources;
        plans.push_back(std::move(plan));
    }
    if (plans.empty()) return result;

    if (opts.estimate_signal_dim) {
        const Eigen::MatrixXcd cov = sample_covariance(returns, opts.music);
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(cov, Eigen::EigenvaluesOnly);
        std::vector<double> ev;
        for (Eigen::Index i = eig.eigenvalues().size() - 1; i >= 0; --i) ev.push_back(eig.eigenvalues()(i));
        signal_dim = estimate_source_count(ev);
    }
    signal_dim = std::min(signal_dim, cfg.num_rx_antennas - 1);

    for (const auto& plan : plans) {
        const std::size_t k = plan.bin->angle.bin;
        BinRefinement ref;
        ref.angle_bin = k;
        try {
            const std::size_t n_src = std::min(plan.n_sources, signal_dim);
            ref.music = music_angles(returns, cfg, plan.bin->angle.sine, n_src, std::max(signal_dim, n_src), opts.music);
            if (ref.music.angles_deg.empty())
                throw EstimationError(EstimationError::Kind::no_peaks, "MUSIC found no peak inside the bin");
            if (ref.music.angles_deg.size() < plan.n_sources) {
                result.estimates.warnings.push_back("bin " + std::to_string(k) + ": MUSIC resolved " +
                                                    std::to_string(ref.music.angles_deg.size()) + " of " +
                                                    std::to_string(plan.n_sources) + " sources");
            }
            ref.range = ls_range_refine(returns, data, pattern, cfg, ref.music.angles_deg, plan.ranges, opts.range_ls);
            for (const auto& w : ref.range.warnings) result.estimates.warnings.push_back("bin " + std::to_string(k) + ": " + w);

            std::vector<double> velocities(ref.range.ranges_m.size(), plan.velocities.front());
            if (opts.refine_velocity) {
                ref.velocity = ls_velocity_refine(returns, data, pattern, cfg, ref.music.angles_deg,
                                                  ref.range.ranges_m, plan.velocities, opts.velocity_ls);
                for (const auto& w : ref.velocity.warnings)
                    result.estimates.warnings.push_back("bin " + std::to_string(k) + ": " + w);
                velocities = ref.velocity.velocities_mps;
            }
            for (std::size_t q = 0; q < ref.music.angles_deg.size(); ++q)
                result.estimates.refined.push_back({ref.music.angles_deg[q], ref.range.ranges_m[q], velocities[q], k});
        } catch (const EstimationError& e) {
            result.estimates.failures.push_back({k, e.what()});
        }
        result.bins.push_back(std::move(ref));
    }
    return result;
}

std::string pseudospectrum_csv(const MusicResult& music)
{
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os.precision(17);
    os << "angle_deg,pseudospectrum\n";
    for (std::size_t i = 0; i < music.grid_deg.size(); ++i) os << music.grid_deg[i] << ',' << music.pseudospectrum[i] << '\n';
    return os.str();
}

std::string residual_surface_csv(const std::vector<double>& candidates, std::size_t n_targets,
                                 const std::vector<double>& surface)
{
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os.precision(17);
    for (std::size_t q = 0; q < n_targets; ++q) os << "value_" << q << ',';
    os << "residual\n";
    std::vector<std::size_t> idx(n_targets, 0);
    for (double r : surface) {
        for (std::size_t q = 0; q < n_targets; ++q) os << candidates[idx[q]] << ',';
        os << r << '\n';
        for (std::size_t q = n_targets; q-- > 0;) {
            if (++idx[q] < candidates.size()) break;
            idx[q] = 0;
        }
    }
    return os.str();
}

}  // namespace tmadfrc
