#include "tmadfrc/comms.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <locale>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "tmadfrc/rng.hpp"
#include "tmadfrc/scene.hpp"

namespace tmadfrc {

namespace {

// Gray-labelled PAM levels for `bits` bits; label 0 sits at the largest positive level.
std::vector<double> gray_pam(std::size_t bits)
{
    const std::size_t levels = std::size_t{1} << bits;
    std::vector<double> by_label(levels);
    for (std::size_t i = 0; i < levels; ++i) {
        const std::size_t gray = i ^ (i >> 1);
        by_label[gray] = static_cast<double>(levels - 1) - 2.0 * static_cast<double>(i);
    }
    return by_label;
}

}  // namespace

Constellation make_constellation(std::size_t order)
{
    if (order != 4 && order != 16 && order != 64)
        throw std::invalid_argument("constellation order must be 4, 16 or 64, got " + std::to_string(order));
    Constellation c;
    c.order = order;
    c.bits_per_symbol = static_cast<std::size_t>(std::lround(std::log2(static_cast<double>(order))));
    const std::size_t half = c.bits_per_symbol / 2;
    const auto pam = gray_pam(half);
    const std::size_t levels = pam.size();
    // Mean |level|^2 per axis is (L^2 - 1) / 3.
    const double scale = 1.0 / std::sqrt(2.0 * (static_cast<double>(levels * levels) - 1.0) / 3.0);
    c.points.resize(order);
    for (std::size_t label = 0; label < order; ++label) {
        const std::size_t i_bits = label >> half;
        const std::size_t q_bits = label & (levels - 1);
        c.points[label] = cplx(pam[i_bits], pam[q_bits]) * scale;
    }
    return c;
}

SymbolGrid modulate(std::span<const std::uint8_t> bits, const Constellation& c, std::size_t num_subcarriers,
                    std::size_t num_symbols)
{
    const std::size_t needed = c.bits_per_symbol * num_subcarriers * num_symbols;
    if (bits.size() != needed) {
        throw std::invalid_argument("modulate: expected " + std::to_string(needed) + " bits, got " +
                                    std::to_string(bits.size()));
    }
    SymbolGrid grid(num_subcarriers, num_symbols);
    auto& v = grid.values();
    for (std::size_t k = 0; k < v.size(); ++k) {
        std::size_t label = 0;
        for (std::size_t b = 0; b < c.bits_per_symbol; ++b) label = (label << 1) | (bits[k * c.bits_per_symbol + b] & 1u);
        v[k] = c.points[label];
    }
    return grid;
}

std::vector<std::uint8_t> demodulate(const SymbolGrid& grid, const Constellation& c, cplx gain_reference)
{
    if (gain_reference == cplx{0.0, 0.0}) throw std::invalid_argument("demodulate: zero gain reference");
    const auto& v = grid.values();
    std::vector<std::uint8_t> bits(v.size() * c.bits_per_symbol);
    for (std::size_t k = 0; k < v.size(); ++k) {
        const cplx z = v[k] / gain_reference;
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t label = 0; label < c.points.size(); ++label) {
            const double d = std::norm(z - c.points[label]);
            if (d < best_d) {
                best_d = d;
                best = label;
            }
        }
        for (std::size_t b = 0; b < c.bits_per_symbol; ++b)
            bits[k * c.bits_per_symbol + b] = static_cast<std::uint8_t>((best >> (c.bits_per_symbol - 1 - b)) & 1u);
    }
    return bits;
}

cplx cu_gain_reference(const SwitchingPattern& pattern, const SystemConfig& cfg)
{
    return HarmonicTable(pattern, cfg, cfg.cu_angle_deg).fundamental();
}

std::vector<std::uint8_t> random_bits(std::size_t count, std::uint64_t seed)
{
    Rng rng(seed);
    std::vector<std::uint8_t> bits(count);
    for (auto& b : bits) b = rng.bit() ? 1 : 0;
    return bits;
}

SymbolGrid random_frame(const SystemConfig& cfg, std::uint64_t seed, std::size_t order)
{
    const Constellation c = make_constellation(order);
    const auto bits = random_bits(c.bits_per_symbol * cfg.num_subcarriers * cfg.num_ofdm_symbols,
                                  derive_seed(seed, "data-bits"));
    return modulate(bits, c, cfg.num_subcarriers, cfg.num_ofdm_symbols);
}

std::vector<BerPoint> ber_vs_angle(const SwitchingPattern& pattern, const SystemConfig& cfg,
                                   const std::vector<double>& angles_deg, double snr_db, std::size_t n_frames,
                                   std::uint64_t seed, const BerSweepOptions& opts)
{
    validate_config(cfg);
    for (double a : angles_deg)
        if (!(std::abs(a) <= 90.0)) throw std::invalid_argument("ber_vs_angle: angle outside [-90, 90]");

    const Constellation c = make_constellation(opts.order);
    const cplx gain = cu_gain_reference(pattern, cfg);
    const std::size_t bits_per_frame = c.bits_per_symbol * cfg.num_subcarriers * cfg.num_ofdm_symbols;

    std::vector<BerPoint> curve(angles_deg.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < angles_deg.size(); i = next++) {
            BerPoint pt;
            pt.angle_deg = angles_deg[i];
            for (std::size_t f = 0; f < n_frames; ++f) {
                const std::uint64_t frame_index = i * n_frames + f;
                const auto bits = random_bits(bits_per_frame, derive_seed(seed, "comms-bits", frame_index));
                const SymbolGrid data = modulate(bits, c, cfg.num_subcarriers, cfg.num_ofdm_symbols);
                const SymbolGrid rx = one_way_received(data, pattern, cfg, angles_deg[i], snr_db,
                                                       derive_seed(seed, "comms-noise", frame_index));
                const auto decided = demodulate(rx, c, gain);
                for (std::size_t b = 0; b < bits.size(); ++b) pt.n_errors += decided[b] != bits[b];
                pt.n_bits += bits.size();
            }
            pt.ber = pt.n_bits ? static_cast<double>(pt.n_errors) / static_cast<double>(pt.n_bits) : 0.0;
            curve[i] = pt;
        }
    };

    std::size_t n_threads = opts.threads ? opts.threads : std::max(1u, std::thread::hardware_concurrency());
    n_threads = std::min(n_threads, std::max<std::size_t>(angles_deg.size(), 1));
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    return curve;
}

std::vector<double> default_sweep_angles()
{
    std::vector<double> a;
    for (int d = -90; d <= 90; ++d) a.push_back(d);
    return a;
}

std::string ber_csv(const std::vector<BerPoint>& curve)
{
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os.precision(17);
    os << "angle_deg,ber,n_bits\n";
    for (const auto& p : curve) os << p.angle_deg << ',' << p.ber << ',' << p.n_bits << '\n';
    return os.str();
}

}  // namespace tmadfrc
