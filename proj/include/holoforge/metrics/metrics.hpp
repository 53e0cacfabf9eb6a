#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "holoforge/core/image.hpp"

namespace holoforge::metrics {

inline constexpr double kPsnrCap = 99.0;

/// Mean squared error accumulated in double, sequential order.
inline double mse(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size())
    throw std::invalid_argument("mse: size mismatch " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  if (a.empty()) throw std::invalid_argument("mse: empty input");
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

/// 10 log10(1 / MSE) for images normalized to [0, 1]; 99 dB when MSE < 1e-10.
inline double psnr(std::span<const float> a, std::span<const float> b) {
  const double e = mse(a, b);
  if (e < 1e-10) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / e));
}

inline double psnr(const Image& a, const Image& b) {
  require_same_shape(a, b, "psnr");
  return psnr(std::span<const float>(a.data), std::span<const float>(b.data));
}

struct SsimParams {
  std::size_t window = 11;
  double sigma = 1.5;
  double data_range = 1.0;
};

/// Mean SSIM over all valid 2-D Gaussian windows of a single plane; the
/// window moments are computed directly at each position.
inline double ssim_eval(std::span<const float> a, std::span<const float> b, std::size_t height, std::size_t width,
                        const SsimParams& p = {}) {
  if (a.size() != b.size() || a.size() != height * width)
    throw std::invalid_argument("ssim_eval: size mismatch");
  if (p.window % 2 == 0 || p.window > height || p.window > width)
    throw std::invalid_argument("ssim_eval: window " + std::to_string(p.window) + " invalid for " +
                                std::to_string(height) + "x" + std::to_string(width));
  const std::size_t k = p.window;
  std::vector<double> g1(k);
  double total = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double d = static_cast<double>(i) - static_cast<double>(k / 2);
    g1[i] = std::exp(-d * d / (2 * p.sigma * p.sigma));
    total += g1[i];
  }
  for (auto& v : g1) v /= total;

  const double c1 = std::pow(0.01 * p.data_range, 2), c2 = std::pow(0.03 * p.data_range, 2);
  double acc = 0;
  std::size_t count = 0;
  for (std::size_t y = 0; y + k <= height; ++y) {
    for (std::size_t x = 0; x + k <= width; ++x) {
      double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) {
          const double wgt = g1[i] * g1[j];
          const double va = a[(y + i) * width + x + j], vb = b[(y + i) * width + x + j];
          ma += wgt * va;
          mb += wgt * vb;
          saa += wgt * va * va;
          sbb += wgt * vb * vb;
          sab += wgt * va * vb;
        }
      const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
      acc += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  }
  return acc / static_cast<double>(count);
}

inline double ssim_eval(const Image& a, const Image& b, const SsimParams& p = {}) {
  require_same_shape(a, b, "ssim_eval");
  if (a.channels != 1) throw std::invalid_argument("ssim_eval: expected single-channel images, got " + a.shape_str());
  return ssim_eval(a.data, b.data, a.height, a.width, p);
}

}  // namespace holoforge::metrics
