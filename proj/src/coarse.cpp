#include "tmadfrc/coarse.hpp"

#include <algorithm>
#include <cmath>
#include <locale>
#include <sstream>

#include "tmadfrc/dft.hpp"

namespace tmadfrc {

namespace {

double median_of(std::vector<double> v)
{
    if (v.empty()) return 0.0;
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2 == 1) return *mid;
    const double upper = *mid;
    const double lower = *std::max_element(v.begin(), mid);
    return 0.5 * (lower + upper);
}

long signed_bin(std::size_t k, std::size_t n)
{
    const auto kk = static_cast<long>(k % n);
    const auto nn = static_cast<long>(n);
    return 2 * kk >= nn ? kk - nn : kk;
}

}  // namespace

std::vector<std::size_t> find_peaks(std::span<const double> mag, const PeakOptions& opts,
                                    const std::vector<bool>& excluded)
{
    const std::size_t n = mag.size();
    std::vector<std::size_t> out;
    if (n == 0) return out;
    auto is_excluded = [&](std::size_t i) { return !excluded.empty() && excluded[i]; };

    std::vector<double> usable;
    double peak = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (is_excluded(i)) continue;
        usable.push_back(mag[i]);
        peak = std::max(peak, mag[i]);
    }
    if (usable.empty() || peak <= 0.0) return out;
    const double threshold = std::max(opts.noise_factor * median_of(usable), opts.relative_floor * peak);

    for (std::size_t i = 0; i < n; ++i) {
        if (is_excluded(i) || mag[i] < threshold || mag[i] <= 0.0) continue;
        bool local_max = true;
        // Strictly greater than the left neighbour, >= the right one, so a flat pair yields one peak.
        if (i > 0 || opts.circular) {
            const std::size_t left = i > 0 ? i - 1 : n - 1;
            if (left != i && !is_excluded(left) && mag[left] >= mag[i]) local_max = false;
        }
        if (i + 1 < n || opts.circular) {
            const std::size_t right = i + 1 < n ? i + 1 : 0;
            if (right != i && !is_excluded(right) && mag[right] > mag[i]) local_max = false;
        }
        if (local_max) out.push_back(i);
    }
    return out;
}

AngleBinSet angle_spectrum(const AntennaGrid& returns, const SystemConfig& cfg, const PeakOptions& opts)
{
    const std::size_t nr = returns.num_antennas(), ns = returns.num_subcarriers(), np = returns.num_symbols();
    if (nr < 2) throw EstimationError(EstimationError::Kind::bad_input, "angle_spectrum needs N_r > 1");
    if (nr != cfg.num_rx_antennas || ns != cfg.num_subcarriers || np != cfg.num_ofdm_symbols)
        throw EstimationError(EstimationError::Kind::bad_input, "angle_spectrum: grid does not match config");

    AngleBinSet result;
    result.spectrum.assign(nr, 0.0);
    std::vector<cplx> transformed(nr * ns * np);
    for (std::size_t mu = 0; mu < np; ++mu) {
        for (std::size_t s = 0; s < ns; ++s) {
            const std::span<const cplx> snap(returns.snapshot(s, mu), nr);
            const auto spec = dft(snap);
            for (std::size_t k = 0; k < nr; ++k) {
                transformed[(mu * ns + s) * nr + k] = spec[k];
                result.spectrum[k] += std::abs(spec[k]);
            }
        }
    }

    std::vector<bool> invalid(nr);
    for (std::size_t k = 0; k < nr; ++k) invalid[k] = std::abs(angle_bin_sine(cfg, k)) > 1.0;
    const auto peaks = find_peaks(result.spectrum, opts, invalid);
    if (peaks.empty()) throw EstimationError(EstimationError::Kind::no_peaks, "angle spectrum: no occupied bins found");

    for (std::size_t k : peaks) {
        AngleBin bin;
        bin.bin = k;
        bin.sine = angle_bin_sine(cfg, k);
        bin.angle_deg = rad_to_deg(std::asin(bin.sine));
        bin.amplitude = SymbolGrid(ns, np);
        for (std::size_t mu = 0; mu < np; ++mu)
            for (std::size_t s = 0; s < ns; ++s) bin.amplitude(s, mu) = transformed[(mu * ns + s) * nr + k];
        result.bins.push_back(std::move(bin));
    }
    return result;
}

Descrambled descramble(const SymbolGrid& amplitude, const SymbolGrid& scrambled, const DescrambleOptions& opts)
{
    if (amplitude.num_subcarriers() != scrambled.num_subcarriers() ||
        amplitude.num_symbols() != scrambled.num_symbols())
        throw EstimationError(EstimationError::Kind::bad_input, "descramble: grid dimensions differ");

    const auto& d = scrambled.values();
    std::vector<double> mags(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) mags[i] = std::abs(d[i]);

    Descrambled out;
    out.epsilon = opts.epsilon_factor * median_of(mags);
    out.values = SymbolGrid(amplitude.num_subcarriers(), amplitude.num_symbols());
    out.guarded.assign(d.size(), false);
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (mags[i] < out.epsilon || mags[i] == 0.0) {
            out.guarded[i] = true;
            ++out.guarded_count;
            out.values.values()[i] = 0.0;
        } else {
            out.values.values()[i] = amplitude.values()[i] / d[i];
        }
    }
    if (static_cast<double>(out.guarded_count) > opts.max_guarded_fraction * static_cast<double>(d.size())) {
        throw EstimationError(EstimationError::Kind::degenerate_bin,
                              "descramble: " + std::to_string(out.guarded_count) + " of " + std::to_string(d.size()) +
                                  " scrambled symbols fall below the division guard");
    }
    return out;
}

Descrambled descramble(const SymbolGrid& amplitude, const SymbolGrid& data, const SwitchingPattern& pattern,
                       const SystemConfig& cfg, double theta_hat_deg, const DescrambleOptions& opts)
{
    return descramble(amplitude, scramble_symbols(data, pattern, cfg, theta_hat_deg), opts);
}

RangeProfile range_profile(const Descrambled& descrambled, const SystemConfig& cfg, const PeakOptions& opts)
{
    const std::size_t ns = descrambled.values.num_subcarriers(), np = descrambled.values.num_symbols();
    RangeProfile out;
    out.profile = SymbolGrid(ns, np);
    out.mean_magnitude.assign(ns, 0.0);
    for (std::size_t mu = 0; mu < np; ++mu) {
        const std::span<const cplx> col(&descrambled.values(0, mu), ns);
        const auto r = idft(col);
        for (std::size_t l = 0; l < ns; ++l) {
            out.profile(l, mu) = r[l];
            out.mean_magnitude[l] += std::abs(r[l]);
        }
    }
    for (auto& v : out.mean_magnitude) v /= static_cast<double>(np);

    out.peaks = find_peaks(out.mean_magnitude, opts);
    const double res = derived_resolutions(cfg).range_res_m;
    for (std::size_t l : out.peaks) out.ranges_m.push_back(static_cast<double>(l) * res);
    return out;
}

VelocityProfile velocity_spectrum(std::span<const cplx> series, const SystemConfig& cfg, const PeakOptions& opts)
{
    const std::size_t np = series.size();
    VelocityProfile out;
    out.spectrum = dft(series);
    std::vector<double> mag(np);
    for (std::size_t p = 0; p < np; ++p) mag[p] = std::abs(out.spectrum[p]);
    const double res = derived_resolutions(cfg).velocity_res_mps;
    for (std::size_t p : find_peaks(mag, opts)) {
        const long sp = signed_bin(p, np);
        out.peaks.push_back(sp);
        out.velocities_mps.push_back(static_cast<double>(sp) * res);
    }
    return out;
}

CoarseResult coarse_pipeline(const AntennaGrid& returns, const SymbolGrid& data, const SwitchingPattern& pattern,
                             const SystemConfig& cfg, const CoarseOptions& opts)
{
    CoarseResult result;
    result.angles = angle_spectrum(returns, cfg, opts.angle_peaks);
    for (const auto& bin : result.angles.bins) {
        CoarseBinResult br;
        br.angle = bin;
        try {
            br.descrambled = descramble(bin.amplitude, data, pattern, cfg, bin.angle_deg, opts.descramble);
        } catch (const EstimationError& e) {
            result.failures.push_back({bin.bin, e.what()});
            continue;
        }
        br.range = range_profile(br.descrambled, cfg, opts.range_peaks);
        for (std::size_t i = 0; i < br.range.peaks.size(); ++i) {
            const std::size_t l = br.range.peaks[i];
            std::vector<cplx> series(cfg.num_ofdm_symbols);
            for (std::size_t mu = 0; mu < cfg.num_ofdm_symbols; ++mu) series[mu] = br.range.profile(l, mu);
            auto vel = velocity_spectrum(series, cfg, opts.velocity_peaks);
            for (std::size_t j = 0; j < vel.peaks.size(); ++j) {
                result.estimates.push_back(
                    {bin.bin, bin.angle_deg, l, br.range.ranges_m[i], vel.peaks[j], vel.velocities_mps[j]});
            }
            br.velocity.push_back(std::move(vel));
        }
        result.bins.push_back(std::move(br));
    }
    return result;
}

std::string spectrum_csv(std::span<const cplx> spectrum)
{
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os.precision(17);
    os << "bin_index,magnitude,phase\n";
    for (std::size_t k = 0; k < spectrum.size(); ++k)
        os << k << ',' << std::abs(spectrum[k]) << ',' << std::arg(spectrum[k]) << '\n';
    return os.str();
}

std::string spectrum_csv(std::span<const double> magnitude)
{
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os.precision(17);
    os << "bin_index,magnitude,phase\n";
    for (std::size_t k = 0; k < magnitude.size(); ++k) os << k << ',' << magnitude[k] << ",0\n";
    return os.str();
}

}  // namespace tmadfrc
