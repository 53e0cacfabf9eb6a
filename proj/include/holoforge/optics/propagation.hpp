#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "holoforge/optics/fft.hpp"

namespace holoforge::optics {

struct PropagationParams {
  double z = 0.0;
  double wavelength = 520e-9;
  double pitch = 8e-6;
  std::size_t n_layers = 8;
  double z_min = 0.0;
  double z_max = 1.5e-3;

  void validate() const {
    if (!(wavelength > 0)) throw std::invalid_argument("wavelength must be positive");
    if (!(pitch > 0)) throw std::invalid_argument("pitch must be positive");
    if (n_layers < 1) throw std::invalid_argument("n_layers must be >= 1");
    if (!(z_min < z_max)) throw std::invalid_argument("z_min must be smaller than z_max");
  }

  /// Distance of layer i; layers are spaced linearly from z_min to z_max.
  double layer_z(std::size_t i) const {
    if (n_layers == 1) return z_min;
    return z_min + (z_max - z_min) * static_cast<double>(i) / static_cast<double>(n_layers - 1);
  }

  /// Nearest layer for a normalized depth (0 = z_min, 1 = z_max).
  std::size_t layer_of(double depth) const {
    if (n_layers == 1) return 0;
    const double scaled = std::clamp(depth, 0.0, 1.0) * static_cast<double>(n_layers - 1);
    return static_cast<std::size_t>(std::lround(scaled));
  }

  double depth_z(double depth) const { return layer_z(layer_of(depth)); }
};

/// Spatial frequency (cycles/m) of DFT bin k on an n-point grid.
inline double bin_frequency(std::size_t k, std::size_t n, double pitch) {
  const double kk = k < (n + 1) / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(n);
  return kk / (static_cast<double>(n) * pitch);
}

/// Band-limited angular spectrum propagation over distance z (meters, signed).
/// Frequencies with lambda^2 (fx^2 + fy^2) > 1 are evanescent and dropped.
inline ComplexField angular_spectrum_propagate(const ComplexField& field, double z) {
  field.validate();
  ComplexField spectrum = fft2(field);
  const double inv_l2 = 1.0 / (field.wavelength * field.wavelength);
  for (std::size_t v = 0; v < field.height; ++v) {
    const double fy = bin_frequency(v, field.height, field.pitch);
    for (std::size_t u = 0; u < field.width; ++u) {
      const double fx = bin_frequency(u, field.width, field.pitch);
      const double arg = inv_l2 - fx * fx - fy * fy;
      complex& s = spectrum(v, u);
      if (arg < 0) {
        s = 0.0;
      } else {
        s *= std::polar(1.0, 2.0 * std::numbers::pi * z * std::sqrt(arg));
      }
    }
  }
  return ifft2(std::move(spectrum));
}

}  // namespace holoforge::optics
