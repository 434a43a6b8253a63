#include "tmadfrc/dft.hpp"

#include <cmath>
#include <stdexcept>

namespace tmadfrc {

namespace {

// e^{sign j 2 pi k / n} for k already reduced to [0, n).
cplx unit_root(std::size_t k, std::size_t n, double sign)
{
    const double phi = sign * 2.0 * kPi * static_cast<double>(k) / static_cast<double>(n);
    return {std::cos(phi), std::sin(phi)};
}

}  // namespace

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::vector<cplx> dft_direct(std::span<const cplx> x, DftDirection dir)
{
    const std::size_t n = x.size();
    const double sign = dir == DftDirection::forward ? -1.0 : 1.0;
    std::vector<cplx> roots(n);
    for (std::size_t k = 0; k < n; ++k) roots[k] = unit_root(k, n, sign);

    std::vector<cplx> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        cplx acc{0.0, 0.0};
        std::size_t idx = 0;  // (k * i) mod n, updated incrementally
        for (std::size_t i = 0; i < n; ++i) {
            acc += x[i] * roots[idx];
            idx += k;
            if (idx >= n) idx -= n;
        }
        out[k] = acc;
    }
    if (dir == DftDirection::inverse) {
        const double scale = 1.0 / static_cast<double>(n);
        for (auto& v : out) v *= scale;
    }
    return out;
}

std::vector<cplx> dft_radix2(std::span<const cplx> x, DftDirection dir)
{
    const std::size_t n = x.size();
    if (!is_power_of_two(n)) throw std::invalid_argument("dft_radix2: length must be a power of two");
    std::vector<cplx> a(x.begin(), x.end());

    // bit reversal
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }

    const double sign = dir == DftDirection::forward ? -1.0 : 1.0;
    std::vector<cplx> roots(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k) roots[k] = unit_root(k, n, sign);

    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t half = len / 2;
        const std::size_t stride = n / len;
        for (std::size_t start = 0; start < n; start += len) {
            for (std::size_t k = 0; k < half; ++k) {
                const cplx t = roots[k * stride] * a[start + k + half];
                const cplx u = a[start + k];
                a[start + k] = u + t;
                a[start + k + half] = u - t;
            }
        }
    }
    if (dir == DftDirection::inverse) {
        const double scale = 1.0 / static_cast<double>(n);
        for (auto& v : a) v *= scale;
    }
    return a;
}

std::vector<cplx> dft(std::span<const cplx> x)
{
    return is_power_of_two(x.size()) ? dft_radix2(x, DftDirection::forward) : dft_direct(x, DftDirection::forward);
}

std::vector<cplx> idft(std::span<const cplx> x)
{
    return is_power_of_two(x.size()) ? dft_radix2(x, DftDirection::inverse) : dft_direct(x, DftDirection::inverse);
}

}  // namespace tmadfrc
