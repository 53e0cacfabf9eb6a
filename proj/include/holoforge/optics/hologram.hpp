#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "holoforge/core/image.hpp"
#include "holoforge/core/parallel.hpp"
#include "holoforge/metrics/metrics.hpp"
#include "holoforge/optics/propagation.hpp"

namespace holoforge::optics {

/// Amplitude normalized by `scale` (the peak field magnitude) and phase
/// mapped from [-pi, pi] onto [0, 1].
struct Hologram {
  Image amplitude;
  Image phase;
  double scale = 0.0;
};

inline double phase_to_unit(double radians) { return (radians + std::numbers::pi) / (2.0 * std::numbers::pi); }
inline double unit_to_phase(double unit) { return 2.0 * std::numbers::pi * unit - std::numbers::pi; }

namespace detail {

inline void require_plane(const Image& img, const char* what) {
  if (img.channels != 1) throw std::invalid_argument(std::string(what) + ": expected one channel, got " + img.shape_str());
  if (!is_power_of_two(img.height) || !is_power_of_two(img.width))
    throw std::invalid_argument(std::string(what) + ": size " + std::to_string(img.height) + "x" +
                                std::to_string(img.width) + " is not a power of two");
}

inline void require_unit_range(const Image& img, const char* what) {
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    const float v = img.data[i];
    if (!(v >= 0.0f && v <= 1.0f))
      throw std::invalid_argument(std::string(what) + ": value " + std::to_string(v) + " at index " +
                                  std::to_string(i) + " outside [0, 1]");
  }
}

}  // namespace detail

/// Layer index of every pixel of a normalized depth map.
inline std::vector<std::size_t> depth_layers(const Image& depth, const PropagationParams& params) {
  std::vector<std::size_t> layers(depth.data.size());
  for (std::size_t i = 0; i < layers.size(); ++i) layers[i] = params.layer_of(depth.data[i]);
  return layers;
}

/// Layer-based hologram: each depth layer's masked luminance (zero phase) is
/// propagated by -z_layer to the hologram plane and the fields are summed in
/// layer order.
inline Hologram synthesize_hologram(const Image& lum, const Image& depth, const PropagationParams& params) {
  params.validate();
  detail::require_plane(lum, "synthesize_hologram luminance");
  detail::require_plane(depth, "synthesize_hologram depth");
  require_same_shape(lum, depth, "synthesize_hologram");
  detail::require_unit_range(lum, "synthesize_hologram luminance");
  detail::require_unit_range(depth, "synthesize_hologram depth");

  const std::size_t h = lum.height, w = lum.width;
  const auto layers = depth_layers(depth, params);
  std::vector<ComplexField> contributions(params.n_layers);
  std::vector<char> occupied(params.n_layers, 0);
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (lum.data[i] > 0.0f) occupied[layers[i]] = 1;

  parallel_for(params.n_layers, [&](std::size_t layer) {
    if (!occupied[layer]) return;
    ComplexField f(h, w, params.pitch, params.wavelength);
    for (std::size_t i = 0; i < layers.size(); ++i)
      if (layers[i] == layer) f.values[i] = lum.data[i];
    contributions[layer] = angular_spectrum_propagate(f, -params.layer_z(layer));
  });

  ComplexField total(h, w, params.pitch, params.wavelength);
  for (std::size_t layer = 0; layer < params.n_layers; ++layer) {
    if (!occupied[layer]) continue;
    for (std::size_t i = 0; i < total.values.size(); ++i) total.values[i] += contributions[layer].values[i];
  }

  Hologram out{Image(1, h, w), Image(1, h, w), 0.0};
  double peak = 0;
  for (const auto& v : total.values) peak = std::max(peak, std::abs(v));
  out.scale = peak;
  for (std::size_t i = 0; i < total.values.size(); ++i) {
    const complex v = total.values[i];
    const double mag = std::abs(v);
    out.amplitude.data[i] = peak > 0 ? static_cast<float>(std::min(1.0, mag / peak)) : 0.0f;
    out.phase.data[i] = mag > 0 ? static_cast<float>(std::clamp(phase_to_unit(std::arg(v)), 0.0, 1.0)) : 0.5f;
  }
  return out;
}

/// Complex field A * scale * exp(i(2 pi p - pi)) at the hologram plane.
inline ComplexField hologram_field(const Image& amplitude, const Image& phase, double scale,
                                   const PropagationParams& params) {
  require_same_shape(amplitude, phase, "hologram_field");
  detail::require_plane(amplitude, "hologram_field amplitude");
  ComplexField f(amplitude.height, amplitude.width, params.pitch, params.wavelength);
  for (std::size_t i = 0; i < f.values.size(); ++i)
    f.values[i] = std::polar(static_cast<double>(amplitude.data[i]) * scale, unit_to_phase(phase.data[i]));
  return f;
}

/// Unnormalized intensity |U|^2 at distance z. Since synthesis uses the
/// luminance as field amplitude, an in-focus layer reads back as luminance^2.
inline std::vector<double> physical_intensity(const Image& amplitude, const Image& phase, double scale, double z,
                                              const PropagationParams& params) {
  const ComplexField u = angular_spectrum_propagate(hologram_field(amplitude, phase, scale, params), z);
  std::vector<double> out(u.values.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::norm(u.values[i]);
  return out;
}

/// Intensity at distance z normalized to [0, 1] by its maximum (all zero if dark).
inline Image reconstruct(const Image& amplitude, const Image& phase, double scale, double z,
                         const PropagationParams& params) {
  const auto intensity = physical_intensity(amplitude, phase, scale, z, params);
  Image out(1, amplitude.height, amplitude.width);
  const double peak = intensity.empty() ? 0.0 : *std::max_element(intensity.begin(), intensity.end());
  if (peak > 0)
    for (std::size_t i = 0; i < intensity.size(); ++i) out.data[i] = static_cast<float>(intensity[i] / peak);
  return out;
}

/// Normalized intensity the scene contributes at one layer: the squared
/// luminance of the pixels assigned to that layer, divided by its maximum.
inline Image layer_intensity(const Image& lum, const Image& depth, std::size_t layer,
                             const PropagationParams& params) {
  require_same_shape(lum, depth, "layer_intensity");
  Image out(1, lum.height, lum.width);
  float peak = 0;
  for (std::size_t i = 0; i < lum.data.size(); ++i) {
    if (params.layer_of(depth.data[i]) == layer) out.data[i] = lum.data[i] * lum.data[i];
    peak = std::max(peak, out.data[i]);
  }
  if (peak > 0)
    for (auto& v : out.data) v /= peak;
  return out;
}

struct FocusCheck {
  std::size_t layer = 0;
  std::size_t pixels = 0;
  double in_focus_db = 0;
  double defocused_db = 0;
  double contrast_db() const { return in_focus_db - defocused_db; }
};

/// Scores how sharply a hologram renders one depth layer. The target is the
/// layer's squared luminance on the pixels assigned to it; PSNR is taken over
/// that support only, against the physical intensity at the layer distance
/// and at that distance plus `defocus`. Light from the other layers lands
/// outside the support and is ignored.
inline FocusCheck focus_check(const Hologram& holo, const Image& lum, const Image& depth, std::size_t layer,
                              double defocus, const PropagationParams& params) {
  require_same_shape(lum, depth, "focus_check");
  require_same_shape(lum, holo.amplitude, "focus_check");
  std::vector<float> target, near, far;
  const double z = params.layer_z(layer);
  const auto in_focus = physical_intensity(holo.amplitude, holo.phase, holo.scale, z, params);
  const auto blurred = physical_intensity(holo.amplitude, holo.phase, holo.scale, z + defocus, params);
  for (std::size_t i = 0; i < lum.data.size(); ++i) {
    if (lum.data[i] <= 0.0f || params.layer_of(depth.data[i]) != layer) continue;
    target.push_back(lum.data[i] * lum.data[i]);
    near.push_back(static_cast<float>(in_focus[i]));
    far.push_back(static_cast<float>(blurred[i]));
  }
  if (target.empty()) throw std::invalid_argument("focus_check: layer " + std::to_string(layer) + " has no lit pixels");
  FocusCheck r;
  r.layer = layer;
  r.pixels = target.size();
  r.in_focus_db = metrics::psnr(near, target);
  r.defocused_db = metrics::psnr(far, target);
  return r;
}

}  // namespace holoforge::optics
