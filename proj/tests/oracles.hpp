#pragma once

// Brute-force reference implementations used only by the test suites. They
// deliberately avoid the library's code paths (no im2col, no separable
// filters, no FFT).

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

namespace oracle {

// out[n][co][y][x] = bias[co] + sum_{ci,ky,kx} in[n][ci][y*s-p+ky][x*s-p+kx] * w[co][ci][ky][kx]
inline std::vector<double> conv2d(const std::vector<double>& in, std::size_t n, std::size_t ci, std::size_t h,
                                  std::size_t w, const std::vector<double>& wt, std::size_t co, std::size_t kh,
                                  std::size_t kw, const std::vector<double>& bias, std::size_t stride, std::size_t pad,
                                  std::size_t& oh, std::size_t& ow) {
  oh = (h + 2 * pad - kh) / stride + 1;
  ow = (w + 2 * pad - kw) / stride + 1;
  std::vector<double> out(n * co * oh * ow, 0.0);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t o = 0; o < co; ++o)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
          double s = bias.empty() ? 0.0 : bias[o];
          for (std::size_t c = 0; c < ci; ++c)
            for (std::size_t ky = 0; ky < kh; ++ky)
              for (std::size_t kx = 0; kx < kw; ++kx) {
                const long iy = static_cast<long>(y * stride + ky) - static_cast<long>(pad);
                const long ix = static_cast<long>(x * stride + kx) - static_cast<long>(pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w)) continue;
                s += in[((b * ci + c) * h + iy) * w + ix] * wt[((o * ci + c) * kh + ky) * kw + kx];
              }
          out[((b * co + o) * oh + y) * ow + x] = s;
        }
  return out;
}

// Bilinear value at output pixel (i, j) of a corner-aligned 2x upsample of
// an h x w plane, written from the interpolation formula.
inline double bilinear_pixel(const std::vector<double>& plane, std::size_t h, std::size_t w, std::size_t i,
                             std::size_t j) {
  const double sy = h == 1 ? 0.0 : static_cast<double>(i) * (h - 1) / (2.0 * h - 1);
  const double sx = w == 1 ? 0.0 : static_cast<double>(j) * (w - 1) / (2.0 * w - 1);
  const auto y0 = static_cast<std::size_t>(std::floor(sy));
  const auto x0 = static_cast<std::size_t>(std::floor(sx));
  const std::size_t y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
  const double fy = sy - y0, fx = sx - x0;
  return plane[y0 * w + x0] * (1 - fy) * (1 - fx) + plane[y0 * w + x1] * (1 - fy) * fx +
         plane[y1 * w + x0] * fy * (1 - fx) + plane[y1 * w + x1] * fy * fx;
}

// Two-pass per-channel batch normalization over (n, h, w).
inline std::vector<double> batchnorm(const std::vector<double>& in, std::size_t n, std::size_t c, std::size_t hw,
                                     const std::vector<double>& gamma, const std::vector<double>& beta, double eps) {
  std::vector<double> out(in.size());
  for (std::size_t ch = 0; ch < c; ++ch) {
    double mean = 0;
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t i = 0; i < hw; ++i) mean += in[(b * c + ch) * hw + i];
    mean /= static_cast<double>(n * hw);
    double var = 0;
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t i = 0; i < hw; ++i) var += std::pow(in[(b * c + ch) * hw + i] - mean, 2);
    var /= static_cast<double>(n * hw);
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t i = 0; i < hw; ++i)
        out[(b * c + ch) * hw + i] = gamma[ch] * (in[(b * c + ch) * hw + i] - mean) / std::sqrt(var + eps) + beta[ch];
  }
  return out;
}

// SSIM with statistics taken directly over each 2-D Gaussian window.
inline double ssim(const std::vector<double>& a, const std::vector<double>& b, std::size_t h, std::size_t w,
                   std::size_t win = 11, double sigma = 1.5, double range = 1.0) {
  std::vector<double> g2(win * win);
  double total = 0;
  const double c = static_cast<double>(win / 2);
  for (std::size_t y = 0; y < win; ++y)
    for (std::size_t x = 0; x < win; ++x) {
      g2[y * win + x] = std::exp(-((y - c) * (y - c) + (x - c) * (x - c)) / (2 * sigma * sigma));
      total += g2[y * win + x];
    }
  for (auto& v : g2) v /= total;
  const double c1 = std::pow(0.01 * range, 2), c2 = std::pow(0.03 * range, 2);
  double acc = 0;
  std::size_t count = 0;
  for (std::size_t y = 0; y + win <= h; ++y)
    for (std::size_t x = 0; x + win <= w; ++x) {
      double ma = 0, mb = 0;
      for (std::size_t i = 0; i < win; ++i)
        for (std::size_t j = 0; j < win; ++j) {
          ma += g2[i * win + j] * a[(y + i) * w + x + j];
          mb += g2[i * win + j] * b[(y + i) * w + x + j];
        }
      double va = 0, vb = 0, cov = 0;
      for (std::size_t i = 0; i < win; ++i)
        for (std::size_t j = 0; j < win; ++j) {
          const double da = a[(y + i) * w + x + j] - ma, db = b[(y + i) * w + x + j] - mb;
          va += g2[i * win + j] * da * da;
          vb += g2[i * win + j] * db * db;
          cov += g2[i * win + j] * da * db;
        }
      acc += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  return acc / static_cast<double>(count);
}

// Unitary O(N^2) 2-D DFT; sign = -1 forward, +1 inverse.
inline std::vector<std::complex<double>> dft2(const std::vector<std::complex<double>>& x, std::size_t h,
                                              std::size_t w, int sign) {
  std::vector<std::complex<double>> out(h * w);
  const double norm = 1.0 / std::sqrt(static_cast<double>(h * w));
  for (std::size_t u = 0; u < h; ++u)
    for (std::size_t v = 0; v < w; ++v) {
      std::complex<double> s = 0;
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t xx = 0; xx < w; ++xx) {
          const double ang = sign * 2 * std::numbers::pi *
                             (static_cast<double>(u * y) / h + static_cast<double>(v * xx) / w);
          s += x[y * w + xx] * std::polar(1.0, ang);
        }
      out[u * w + v] = s * norm;
    }
  return out;
}

}  // namespace oracle
