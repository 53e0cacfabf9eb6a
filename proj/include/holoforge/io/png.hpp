#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "holoforge/core/image.hpp"

namespace holoforge::io {

inline std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(static_cast<double>(v), 0.0, 1.0) * 255.0));
}

/// 8-bit gray (1 channel) or RGB (3 channels) PNG; values are clamped to [0, 1].
inline void save_png(const Image& img, const std::string& path) {
  if (img.channels != 1 && img.channels != 3)
    throw std::invalid_argument("save_png: expected 1 or 3 channels, got " + img.shape_str());
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width);
  png.height = static_cast<png_uint_32>(img.height);
  png.format = img.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  std::vector<std::uint8_t> pixels(img.data.size());
  const std::size_t plane = img.plane();
  for (std::size_t i = 0; i < plane; ++i)
    for (std::size_t c = 0; c < img.channels; ++c) pixels[i * img.channels + c] = to_byte(img.data[c * plane + i]);
  if (!png_image_write_to_file(&png, path.c_str(), 0, pixels.data(), 0, nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    throw std::runtime_error(path + ": " + msg);
  }
}

/// Loads any PNG as gray or RGB (alpha is composited away by libpng) with
/// values k / 255.
inline Image load_png(const std::string& path, std::size_t channels = 3) {
  if (channels != 1 && channels != 3) throw std::invalid_argument("load_png: channels must be 1 or 3");
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    const std::string msg = png.message;
    png_image_free(&png);
    throw std::runtime_error(path + ": " + msg);
  }
  png.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, pixels.data(), 0, nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    throw std::runtime_error(path + ": " + msg);
  }
  Image img(channels, png.height, png.width);
  const std::size_t plane = img.plane();
  for (std::size_t i = 0; i < plane; ++i)
    for (std::size_t c = 0; c < channels; ++c)
      img.data[c * plane + i] = static_cast<float>(pixels[i * channels + c]) / 255.0f;
  return img;
}

}  // namespace holoforge::io
