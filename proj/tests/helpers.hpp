#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "tmadfrc/model.hpp"
#include "tmadfrc/rng.hpp"

namespace testutil {

using tmadfrc::cplx;

inline tmadfrc::SymbolGrid random_qpsk(std::size_t ns, std::size_t np, std::uint64_t seed)
{
    tmadfrc::Rng rng(seed);
    tmadfrc::SymbolGrid g(ns, np);
    const double a = 1.0 / std::sqrt(2.0);
    for (auto& v : g.values()) v = cplx(rng.bit() ? -a : a, rng.bit() ? -a : a);
    return g;
}

inline tmadfrc::SymbolGrid random_complex(std::size_t ns, std::size_t np, std::uint64_t seed)
{
    tmadfrc::Rng rng(seed);
    tmadfrc::SymbolGrid g(ns, np);
    for (auto& v : g.values()) v = rng.complex_gaussian(1.0);
    return g;
}

inline double max_abs_diff(const std::vector<cplx>& a, const std::vector<cplx>& b)
{
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

// Gaussian tail probability.
inline double qfunc(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

}  // namespace testutil
