#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "holoforge/optics/field.hpp"

namespace holoforge::optics {

namespace detail {

// In-place iterative radix-2 Cooley-Tukey on a strided sequence.
// sign = -1 forward, +1 inverse; no normalization.
inline void fft1d(complex* data, std::size_t n, std::size_t stride, int sign, std::vector<complex>& scratch) {
  scratch.resize(n);
  for (std::size_t i = 0; i < n; ++i) scratch[i] = data[i * stride];

  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(scratch[i], scratch[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = sign * 2.0 * std::numbers::pi / static_cast<double>(len);
    const std::size_t half = len / 2;
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        // Twiddles from the exact angle rather than a running product keeps
        // the error independent of len.
        const complex w = std::polar(1.0, ang * static_cast<double>(k));
        const complex u = scratch[start + k];
        const complex v = scratch[start + k + half] * w;
        scratch[start + k] = u + v;
        scratch[start + k + half] = u - v;
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) data[i * stride] = scratch[i];
}

inline void fft2_inplace(ComplexField& f, int sign) {
  if (!is_power_of_two(f.height) || !is_power_of_two(f.width)) {
    throw std::invalid_argument("fft2: dimensions " + std::to_string(f.height) + "x" + std::to_string(f.width) +
                                " must be powers of two");
  }
  std::vector<complex> scratch;
  for (std::size_t y = 0; y < f.height; ++y) fft1d(f.values.data() + y * f.width, f.width, 1, sign, scratch);
  for (std::size_t x = 0; x < f.width; ++x) fft1d(f.values.data() + x, f.height, f.width, sign, scratch);
  const double norm = 1.0 / std::sqrt(static_cast<double>(f.height * f.width));
  for (auto& v : f.values) v *= norm;
}

}  // namespace detail

/// Unitary 2-D DFT (1/sqrt(N) scaling).
inline ComplexField fft2(ComplexField f) {
  detail::fft2_inplace(f, -1);
  return f;
}

inline ComplexField ifft2(ComplexField f) {
  detail::fft2_inplace(f, +1);
  return f;
}

}  // namespace holoforge::optics
