#pragma once

// Discrete Fourier transforms used by the coarse estimator.
//
// Forward:  X[k] = sum_n x[n] e^{-j 2 pi k n / N}
// Inverse:  x[n] = (1/N) sum_k X[k] e^{+j 2 pi k n / N}
//
// dft()/idft() pick the radix-2 path for power-of-two lengths and the direct
// O(N^2) sum otherwise; both paths are exposed so they can be cross-checked.

#include <cstddef>
#include <span>
#include <vector>

#include "tmadfrc/model.hpp"

namespace tmadfrc {

enum class DftDirection { forward, inverse };

bool is_power_of_two(std::size_t n);

/// Direct summation. Twiddle indices are reduced mod N before the sin/cos.
std::vector<cplx> dft_direct(std::span<const cplx> x, DftDirection dir);

/// Iterative radix-2 Cooley-Tukey; throws std::invalid_argument unless x.size() is a power of two.
std::vector<cplx> dft_radix2(std::span<const cplx> x, DftDirection dir);

std::vector<cplx> dft(std::span<const cplx> x);
std::vector<cplx> idft(std::span<const cplx> x);

}  // namespace tmadfrc
