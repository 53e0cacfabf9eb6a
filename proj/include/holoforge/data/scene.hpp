#pragma once

#include <cmath>
#include <cstdint>
#include <algorithm>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "holoforge/core/image.hpp"
#include "holoforge/core/random.hpp"
#include "holoforge/optics/hologram.hpp"

namespace holoforge::data {

/// One training sample; every image is normalized to [0, 1].
struct ImageSet {
  std::string id;
  Image rgb;        // 3 x S x S
  Image depth;      // 1 x S x S, 0 nearest, 1 farthest
  Image amplitude;  // 1 x S x S
  Image phase;      // 1 x S x S
  double scale = 0.0;
  std::uint64_t seed = 0;

  std::size_t size() const { return rgb.height; }

  void validate() const {
    const std::size_t s = rgb.height;
    if (rgb.channels != 3 || rgb.width != s) throw std::invalid_argument(id + ": rgb must be 3xSxS, got " + rgb.shape_str());
    for (const Image* img : {&depth, &amplitude, &phase})
      if (img->channels != 1 || img->height != s || img->width != s)
        throw std::invalid_argument(id + ": expected 1x" + std::to_string(s) + "x" + std::to_string(s) + ", got " +
                                    img->shape_str());
    for (const Image* img : {&rgb, &depth, &amplitude, &phase})
      if (!img->in_unit_range()) throw std::invalid_argument(id + ": values outside [0, 1]");
    if (!(scale >= 0.0) || !std::isfinite(scale)) throw std::invalid_argument(id + ": scale must be finite and >= 0");
  }
};

inline float quantize8(double v) { return static_cast<float>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)) / 255.0f; }

struct Shape {
  bool ellipse = false;
  float color[3] = {0, 0, 0};
  float depth = 0;
  double cx = 0, cy = 0, rx = 0, ry = 0;

  bool contains(double px, double py) const {
    if (ellipse) {
      const double ex = (px - cx) / rx, ey = (py - cy) / ry;
      return ex * ex + ey * ey <= 1.0;
    }
    return std::abs(px - cx) <= rx && std::abs(py - cy) <= ry;
  }
};

/// Random scene of 2-6 axis-aligned rectangles and ellipses on a black,
/// farthest-depth background. Each shape sits exactly on one of the nearer
/// n_layers - 1 depth layers. Shapes are painted far to near (ties keep draw
/// order) so later shapes overwrite earlier ones and the visible surface is
/// always the nearest. Colors are 8-bit quantized so the stored PNG
/// round-trips exactly.
inline ImageSet synth_scene(std::uint64_t seed, std::size_t size, const optics::PropagationParams& params) {
  params.validate();
  if (!optics::is_power_of_two(size)) throw std::invalid_argument("synth_scene: size " + std::to_string(size) + " is not a power of two");
  Rng rng(seed);
  ImageSet s;
  s.seed = seed;
  s.rgb = Image(3, size, size, 0.0f);
  s.depth = Image(1, size, size, 1.0f);

  const auto count = rng.uniform_int(2, 6);
  const double sz = static_cast<double>(size);
  const std::int64_t far_layers = params.n_layers > 1 ? static_cast<std::int64_t>(params.n_layers) - 1 : 1;
  std::vector<Shape> shapes(static_cast<std::size_t>(count));
  for (auto& sh : shapes) {
    sh.ellipse = rng.uniform_int(0, 1) == 1;
    for (auto& c : sh.color) c = quantize8(rng.uniform(0.25, 1.0));
    const auto layer = rng.uniform_int(0, far_layers - 1);
    sh.depth = params.n_layers > 1 ? static_cast<float>(static_cast<double>(layer) / static_cast<double>(params.n_layers - 1)) : 0.0f;
    sh.cx = rng.uniform(0.15, 0.85) * sz;
    sh.cy = rng.uniform(0.15, 0.85) * sz;
    sh.rx = rng.uniform(sz / 16, sz / 4);
    sh.ry = rng.uniform(sz / 16, sz / 4);
  }
  std::stable_sort(shapes.begin(), shapes.end(), [](const Shape& a, const Shape& b) { return a.depth > b.depth; });

  for (const auto& sh : shapes) {
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        if (!sh.contains(static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5)) continue;
        for (std::size_t c = 0; c < 3; ++c) s.rgb(c, y, x) = sh.color[c];
        s.depth(0, y, x) = sh.depth;
      }
    }
  }

  const Image lum = luminance(s.rgb);
  auto holo = optics::synthesize_hologram(lum, s.depth, params);
  s.amplitude = std::move(holo.amplitude);
  s.phase = std::move(holo.phase);
  s.scale = holo.scale;
  return s;
}

/// Nearest depth layer with any lit pixel, if the scene is not empty.
inline std::optional<std::size_t> nearest_visible_layer(const ImageSet& s, const optics::PropagationParams& params) {
  const Image lum = luminance(s.rgb);
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < lum.data.size(); ++i) {
    if (lum.data[i] <= 0.0f) continue;
    const std::size_t layer = params.layer_of(s.depth.data[i]);
    if (!best || layer < *best) best = layer;
  }
  return best;
}

/// Focus check for the nearest visible layer of a stored sample.
inline optics::FocusCheck sample_focus_check(const ImageSet& s, const optics::PropagationParams& params,
                                             double defocus = 3e-3) {
  const auto layer = nearest_visible_layer(s, params);
  if (!layer) throw std::invalid_argument(s.id + ": scene has no visible shape");
  return optics::focus_check({s.amplitude, s.phase, s.scale}, luminance(s.rgb), s.depth, *layer, defocus, params);
}

}  // namespace holoforge::data
