#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace holoforge::optics {

using complex = std::complex<double>;

inline bool is_power_of_two(std::size_t v) { return v != 0 && (v & (v - 1)) == 0; }

/// Sampled scalar wavefield on a regular grid.
struct ComplexField {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<complex> values;
  double pitch = 8e-6;         // meters per pixel
  double wavelength = 520e-9;  // meters

  ComplexField() = default;
  ComplexField(std::size_t h, std::size_t w, double pitch_ = 8e-6, double wavelength_ = 520e-9)
      : height(h), width(w), values(h * w), pitch(pitch_), wavelength(wavelength_) {}

  complex& operator()(std::size_t y, std::size_t x) { return values[y * width + x]; }
  const complex& operator()(std::size_t y, std::size_t x) const { return values[y * width + x]; }

  std::size_t size() const { return values.size(); }

  void validate() const {
    if (values.size() != height * width)
      throw std::invalid_argument("field: value count does not match " + std::to_string(height) + "x" +
                                  std::to_string(width));
    if (!(pitch > 0)) throw std::invalid_argument("field: pitch must be positive");
    if (!(wavelength > 0)) throw std::invalid_argument("field: wavelength must be positive");
    for (const auto& v : values)
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) throw std::invalid_argument("field: non-finite value");
  }
};

/// Sum of squared magnitudes.
inline double field_energy(const ComplexField& f) {
  double e = 0;
  for (const auto& v : f.values) e += std::norm(v);
  return e;
}

}  // namespace holoforge::optics
