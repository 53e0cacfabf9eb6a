#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace holoforge {

/// Planar (channel, row, column) float raster.
struct Image {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> data;

  Image() = default;
  Image(std::size_t c, std::size_t h, std::size_t w, float fill = 0.0f)
      : channels(c), height(h), width(w), data(c * h * w, fill) {}

  std::size_t plane() const { return height * width; }
  std::size_t size() const { return data.size(); }

  float& operator()(std::size_t c, std::size_t y, std::size_t x) { return data[(c * height + y) * width + x]; }
  float operator()(std::size_t c, std::size_t y, std::size_t x) const { return data[(c * height + y) * width + x]; }

  bool same_shape(const Image& o) const { return channels == o.channels && height == o.height && width == o.width; }

  std::string shape_str() const {
    return std::to_string(channels) + "x" + std::to_string(height) + "x" + std::to_string(width);
  }

  bool in_unit_range() const {
    return std::all_of(data.begin(), data.end(), [](float v) { return v >= 0.0f && v <= 1.0f; });
  }

  bool operator==(const Image&) const = default;
};

inline void require_same_shape(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b))
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

/// ITU-R BT.601 luma of a 3-channel image.
inline Image luminance(const Image& rgb) {
  if (rgb.channels != 3) throw std::invalid_argument("luminance: expected 3 channels, got " + rgb.shape_str());
  Image out(1, rgb.height, rgb.width);
  const std::size_t p = rgb.plane();
  for (std::size_t i = 0; i < p; ++i)
    out.data[i] = 0.299f * rgb.data[i] + 0.587f * rgb.data[p + i] + 0.114f * rgb.data[2 * p + i];
  return out;
}

}  // namespace holoforge
