#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "holoforge/core/parallel.hpp"
#include "holoforge/tensor/tensor.hpp"

namespace holoforge {

namespace detail {

template <class T>
using RowMajorMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatrixMap = Eigen::Map<RowMajorMatrix<T>>;
template <class T>
using ConstMatrixMap = Eigen::Map<const RowMajorMatrix<T>>;

inline void require(bool ok, const std::string& message) {
  if (!ok) throw ShapeError(message);
}

inline std::string dims(const Shape& s) { return "(" + s.str() + ")"; }

inline void require_same_shape(const char* op, const Shape& a, const Shape& b) {
  const char* names[] = {"n", "c", "h", "w"};
  const std::size_t da[] = {a.n, a.c, a.h, a.w};
  const std::size_t db[] = {b.n, b.c, b.h, b.w};
  for (int i = 0; i < 4; ++i) {
    require(da[i] == db[i], std::string(op) + ": dimension " + names[i] + " differs (" + std::to_string(da[i]) +
                                " vs " + std::to_string(db[i]) + "), shapes " + dims(a) + " and " + dims(b));
  }
}

struct ConvGeometry {
  std::size_t c_in, h, w, kh, kw, stride, pad, oh, ow;
  std::size_t k() const { return c_in * kh * kw; }
  std::size_t p() const { return oh * ow; }
  bool pointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
};

template <class T>
void im2col(const T* x, const ConvGeometry& g, T* col) {
  const auto ih = static_cast<std::ptrdiff_t>(g.h), iw = static_cast<std::ptrdiff_t>(g.w);
  for (std::size_t ci = 0; ci < g.c_in; ++ci) {
    const T* plane = x + ci * g.h * g.w;
    for (std::size_t ky = 0; ky < g.kh; ++ky) {
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        T* row = col + ((ci * g.kh + ky) * g.kw + kx) * g.p();
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
          T* dst = row + oy * g.ow;
          if (iy < 0 || iy >= ih) {
            std::fill(dst, dst + g.ow, T(0));
            continue;
          }
          const T* src = plane + iy * iw;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
            dst[ox] = (ix < 0 || ix >= iw) ? T(0) : src[ix];
          }
        }
      }
    }
  }
}

template <class T>
void col2im_add(const T* col, const ConvGeometry& g, T* dx) {
  const auto ih = static_cast<std::ptrdiff_t>(g.h), iw = static_cast<std::ptrdiff_t>(g.w);
  for (std::size_t ci = 0; ci < g.c_in; ++ci) {
    T* plane = dx + ci * g.h * g.w;
    for (std::size_t ky = 0; ky < g.kh; ++ky) {
      for (std::size_t kx = 0; kx < g.kw; ++kx) {
        const T* row = col + ((ci * g.kh + ky) * g.kw + kx) * g.p();
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= ih) continue;
          const T* src = row + oy * g.ow;
          T* dst = plane + iy * iw;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
            if (ix >= 0 && ix < iw) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

// Corner-aligned source coordinate for output index i of a 2x upsample.
struct LerpTap {
  std::size_t i0, i1;
  double frac;
};

inline std::vector<LerpTap> upsample_taps(std::size_t in) {
  const std::size_t out = 2 * in;
  std::vector<LerpTap> taps(out);
  const std::size_t den = out - 1;
  for (std::size_t i = 0; i < out; ++i) {
    const std::size_t num = i * (in - 1);
    const std::size_t i0 = num / den;
    taps[i] = {i0, std::min(i0 + 1, in - 1), static_cast<double>(num % den) / static_cast<double>(den)};
  }
  return taps;
}

}  // namespace detail

enum class Mode { train, eval };

/// Direct 2-D cross-correlation (no kernel flip) with zero padding.
/// weight is (c_out, c_in, kh, kw); bias, when given, is (1, c_out, 1, 1).
template <class T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight,
                 const std::optional<std::type_identity_t<Tensor<T>>>& bias,
                 std::size_t stride, std::size_t pad) {
  using detail::require;
  const Shape& xs = input.shape();
  const Shape& ws = weight.shape();
  require(stride >= 1, "conv2d: stride must be >= 1");
  require(xs.c == ws.c, "conv2d: input channels (" + std::to_string(xs.c) + ") do not match weight c_in (" +
                            std::to_string(ws.c) + ")");
  require(ws.h % 2 == 1, "conv2d: kernel height " + std::to_string(ws.h) + " must be odd");
  require(ws.w % 2 == 1, "conv2d: kernel width " + std::to_string(ws.w) + " must be odd");
  require(xs.h + 2 * pad >= ws.h, "conv2d: padded input height " + std::to_string(xs.h + 2 * pad) +
                                      " smaller than kernel height " + std::to_string(ws.h));
  require(xs.w + 2 * pad >= ws.w, "conv2d: padded input width " + std::to_string(xs.w + 2 * pad) +
                                      " smaller than kernel width " + std::to_string(ws.w));
  if (bias) {
    require(bias->size() == ws.n, "conv2d: bias length (" + std::to_string(bias->size()) +
                                      ") does not match c_out (" + std::to_string(ws.n) + ")");
  }

  detail::ConvGeometry g{xs.c, xs.h, xs.w, ws.h, ws.w, stride, pad, (xs.h + 2 * pad - ws.h) / stride + 1,
                         (xs.w + 2 * pad - ws.w) / stride + 1};
  const std::size_t c_out = ws.n, K = g.k(), P = g.p();
  Shape os{xs.n, c_out, g.oh, g.ow};
  Tensor<T> out(os);

  const T* x = input.data().data();
  const T* wt = weight.data().data();
  T* y = out.mutable_data().data();
  const T* b = bias ? bias->data().data() : nullptr;

  parallel_for(xs.n, [&](std::size_t n) {
    const T* xn = x + n * xs.c * xs.h * xs.w;
    std::vector<T> col;
    const T* colp = xn;
    if (!g.pointwise()) {
      col.resize(K * P);
      detail::im2col(xn, g, col.data());
      colp = col.data();
    }
    detail::MatrixMap<T> yn(y + n * c_out * P, c_out, P);
    yn.noalias() = detail::ConstMatrixMap<T>(wt, c_out, K) * detail::ConstMatrixMap<T>(colp, K, P);
    if (b) {
      for (std::size_t co = 0; co < c_out; ++co) yn.row(co).array() += b[co];
    }
  });

  std::vector<Tensor<T>> inputs{input, weight};
  if (bias) inputs.push_back(*bias);
  auto xin = input.node();
  auto win = weight.node();
  auto bin = bias ? bias->node() : nullptr;
  detail::record(out, "conv2d", inputs, [g, c_out, xs, xin, win, bin](const std::vector<T>& gy) {
    const std::size_t K = g.k(), P = g.p();
    const T* x = xin->value.data();
    const T* wt = win->value.data();
    const std::size_t in_stride = xs.c * xs.h * xs.w;

    if (xin->requires_grad) {
      T* dx = xin->grad_buffer().data();
      parallel_for(xs.n, [&](std::size_t n) {
        detail::ConstMatrixMap<T> gyn(gy.data() + n * c_out * P, c_out, P);
        if (g.pointwise()) {
          detail::MatrixMap<T> dxn(dx + n * in_stride, K, P);
          dxn.noalias() += detail::ConstMatrixMap<T>(wt, c_out, K).transpose() * gyn;
        } else {
          std::vector<T> dcol(K * P);
          detail::MatrixMap<T> dc(dcol.data(), K, P);
          dc.noalias() = detail::ConstMatrixMap<T>(wt, c_out, K).transpose() * gyn;
          detail::col2im_add(dcol.data(), g, dx + n * in_stride);
        }
      });
    }
    if (win->requires_grad) {
      detail::MatrixMap<T> dw(win->grad_buffer().data(), c_out, K);
      std::vector<T> col;
      for (std::size_t n = 0; n < xs.n; ++n) {
        const T* xn = x + n * in_stride;
        const T* colp = xn;
        if (!g.pointwise()) {
          col.resize(K * P);
          detail::im2col(xn, g, col.data());
          colp = col.data();
        }
        dw.noalias() += detail::ConstMatrixMap<T>(gy.data() + n * c_out * P, c_out, P) *
                        detail::ConstMatrixMap<T>(colp, K, P).transpose();
      }
    }
    if (bin && bin->requires_grad) {
      T* db = bin->grad_buffer().data();
      for (std::size_t co = 0; co < c_out; ++co) {
        double s = 0;
        for (std::size_t n = 0; n < xs.n; ++n) {
          const T* row = gy.data() + (n * c_out + co) * P;
          for (std::size_t p = 0; p < P; ++p) s += row[p];
        }
        db[co] += static_cast<T>(s);
      }
    }
  });
  return out;
}

/// Per-channel batch normalization over (n, h, w). In train mode the running
/// statistics are updated in place by exponential moving average.
template <class T>
Tensor<T> batchnorm2d(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                      std::span<T> running_mean, std::span<T> running_var, Mode mode, double momentum = 0.1,
                      double eps = 1e-5) {
  using detail::require;
  const Shape& s = input.shape();
  require(s.size() > 0, "batchnorm2d: zero-size batch " + s.str());
  require(gamma.size() == s.c, "batchnorm2d: gamma length (" + std::to_string(gamma.size()) +
                                   ") does not match channels (" + std::to_string(s.c) + ")");
  require(beta.size() == s.c, "batchnorm2d: beta length (" + std::to_string(beta.size()) +
                                  ") does not match channels (" + std::to_string(s.c) + ")");
  require(running_mean.size() == s.c && running_var.size() == s.c,
          "batchnorm2d: running statistics length does not match channels (" + std::to_string(s.c) + ")");
  require(eps > 0, "batchnorm2d: eps must be positive");

  const std::size_t M = s.n * s.plane();
  std::vector<double> mean(s.c), invstd(s.c);
  const T* x = input.data().data();
  for (std::size_t c = 0; c < s.c; ++c) {
    if (mode == Mode::train) {
      double sum = 0;
      for (std::size_t n = 0; n < s.n; ++n) {
        const T* p = x + (n * s.c + c) * s.plane();
        for (std::size_t i = 0; i < s.plane(); ++i) sum += p[i];
      }
      const double m = sum / static_cast<double>(M);
      double sq = 0;
      for (std::size_t n = 0; n < s.n; ++n) {
        const T* p = x + (n * s.c + c) * s.plane();
        for (std::size_t i = 0; i < s.plane(); ++i) {
          const double d = p[i] - m;
          sq += d * d;
        }
      }
      const double var = sq / static_cast<double>(M);
      mean[c] = m;
      invstd[c] = 1.0 / std::sqrt(var + eps);
      const double unbiased = M > 1 ? sq / static_cast<double>(M - 1) : var;
      running_mean[c] = static_cast<T>((1.0 - momentum) * running_mean[c] + momentum * m);
      running_var[c] = static_cast<T>((1.0 - momentum) * running_var[c] + momentum * unbiased);
    } else {
      mean[c] = running_mean[c];
      invstd[c] = 1.0 / std::sqrt(static_cast<double>(running_var[c]) + eps);
    }
  }

  Tensor<T> out(s);
  T* y = out.mutable_data().data();
  const T* gm = gamma.data().data();
  const T* bt = beta.data().data();
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const std::size_t off = (n * s.c + c) * s.plane();
      const double scale = gm[c] * invstd[c];
      for (std::size_t i = 0; i < s.plane(); ++i)
        y[off + i] = static_cast<T>((x[off + i] - mean[c]) * scale + bt[c]);
    }
  }

  auto xin = input.node(), gin = gamma.node(), bin = beta.node();
  detail::record(out, "batchnorm2d", {input, gamma, beta},
                 [s, M, mode, mean, invstd, xin, gin, bin](const std::vector<T>& gy) {
                   const T* x = xin->value.data();
                   const T* gm = gin->value.data();
                   const std::size_t plane = s.plane();
                   for (std::size_t c = 0; c < s.c; ++c) {
                     double sdy = 0, sdyx = 0;
                     for (std::size_t n = 0; n < s.n; ++n) {
                       const std::size_t off = (n * s.c + c) * plane;
                       for (std::size_t i = 0; i < plane; ++i) {
                         const double xhat = (x[off + i] - mean[c]) * invstd[c];
                         sdy += gy[off + i];
                         sdyx += gy[off + i] * xhat;
                       }
                     }
                     if (gin->requires_grad) gin->grad_buffer()[c] += static_cast<T>(sdyx);
                     if (bin->requires_grad) bin->grad_buffer()[c] += static_cast<T>(sdy);
                     if (!xin->requires_grad) continue;
                     T* dx = xin->grad_buffer().data();
                     const double k = gm[c] * invstd[c];
                     const double inv_m = 1.0 / static_cast<double>(M);
                     for (std::size_t n = 0; n < s.n; ++n) {
                       const std::size_t off = (n * s.c + c) * plane;
                       for (std::size_t i = 0; i < plane; ++i) {
                         if (mode == Mode::train) {
                           const double xhat = (x[off + i] - mean[c]) * invstd[c];
                           dx[off + i] += static_cast<T>(k * (gy[off + i] - sdy * inv_m - xhat * sdyx * inv_m));
                         } else {
                           dx[off + i] += static_cast<T>(k * gy[off + i]);
                         }
                       }
                     }
                   }
                 });
  return out;
}

/// 2x bilinear upsampling with corner-aligned sampling: output index i reads
/// source coordinate i*(h-1)/(2h-1).
template <class T>
Tensor<T> bilinear_upsample2x(const Tensor<T>& input) {
  const Shape& s = input.shape();
  detail::require(s.h >= 1 && s.w >= 1, "bilinear_upsample2x: empty spatial extent " + s.str());
  const auto ty = detail::upsample_taps(s.h);
  const auto tx = detail::upsample_taps(s.w);
  Shape os{s.n, s.c, 2 * s.h, 2 * s.w};
  Tensor<T> out(os);
  const T* x = input.data().data();
  T* y = out.mutable_data().data();
  for (std::size_t p = 0; p < s.n * s.c; ++p) {
    const T* src = x + p * s.plane();
    T* dst = y + p * os.plane();
    for (std::size_t oy = 0; oy < os.h; ++oy) {
      const auto& a = ty[oy];
      for (std::size_t ox = 0; ox < os.w; ++ox) {
        const auto& b = tx[ox];
        const double top = (1 - b.frac) * src[a.i0 * s.w + b.i0] + b.frac * src[a.i0 * s.w + b.i1];
        const double bot = (1 - b.frac) * src[a.i1 * s.w + b.i0] + b.frac * src[a.i1 * s.w + b.i1];
        dst[oy * os.w + ox] = static_cast<T>((1 - a.frac) * top + a.frac * bot);
      }
    }
  }
  auto xin = input.node();
  detail::record(out, "bilinear_upsample2x", {input}, [s, os, ty, tx, xin](const std::vector<T>& gy) {
    T* dx = xin->grad_buffer().data();
    for (std::size_t p = 0; p < s.n * s.c; ++p) {
      const T* g = gy.data() + p * os.plane();
      T* d = dx + p * s.plane();
      for (std::size_t oy = 0; oy < os.h; ++oy) {
        const auto& a = ty[oy];
        for (std::size_t ox = 0; ox < os.w; ++ox) {
          const auto& b = tx[ox];
          const double v = g[oy * os.w + ox];
          d[a.i0 * s.w + b.i0] += static_cast<T>(v * (1 - a.frac) * (1 - b.frac));
          d[a.i0 * s.w + b.i1] += static_cast<T>(v * (1 - a.frac) * b.frac);
          d[a.i1 * s.w + b.i0] += static_cast<T>(v * a.frac * (1 - b.frac));
          d[a.i1 * s.w + b.i1] += static_cast<T>(v * a.frac * b.frac);
        }
      }
    }
  });
  return out;
}

/// x for x >= 0, slope*x otherwise. The derivative at 0 is taken as 1.
template <class T>
Tensor<T> leaky_relu(const Tensor<T>& input, T slope = T(0.01)) {
  if (!(slope > T(0) && slope < T(1))) throw std::invalid_argument("leaky_relu: slope must lie in (0, 1)");
  Tensor<T> out(input.shape());
  const auto x = input.data();
  auto y = out.mutable_data();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] >= T(0) ? x[i] : slope * x[i];
  auto xin = input.node();
  detail::record(out, "leaky_relu", {input}, [xin, slope](const std::vector<T>& gy) {
    const auto& x = xin->value;
    auto& dx = xin->grad_buffer();
    for (std::size_t i = 0; i < x.size(); ++i) dx[i] += x[i] >= T(0) ? gy[i] : slope * gy[i];
  });
  return out;
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& input) {
  Tensor<T> out(input.shape());
  const auto x = input.data();
  auto y = out.mutable_data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] >= T(0)) {
      y[i] = T(1) / (T(1) + std::exp(-x[i]));
    } else {
      const T e = std::exp(x[i]);
      y[i] = e / (T(1) + e);
    }
  }
  auto xin = input.node();
  // Copy of the outputs; the closure must not hold its own node.
  std::vector<T> sv(y.begin(), y.end());
  detail::record(out, "sigmoid", {input}, [xin, sv = std::move(sv)](const std::vector<T>& gy) {
    auto& dx = xin->grad_buffer();
    for (std::size_t i = 0; i < sv.size(); ++i) dx[i] += gy[i] * sv[i] * (T(1) - sv[i]);
  });
  return out;
}

template <class T>
Tensor<T> elementwise_mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape("elementwise_mul", a.shape(), b.shape());
  Tensor<T> out(a.shape());
  const auto x = a.data(), z = b.data();
  auto y = out.mutable_data();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * z[i];
  auto an = a.node(), bn = b.node();
  detail::record(out, "elementwise_mul", {a, b}, [an, bn](const std::vector<T>& gy) {
    if (an->requires_grad) {
      auto& d = an->grad_buffer();
      for (std::size_t i = 0; i < gy.size(); ++i) d[i] += gy[i] * bn->value[i];
    }
    if (bn->requires_grad) {
      auto& d = bn->grad_buffer();
      for (std::size_t i = 0; i < gy.size(); ++i) d[i] += gy[i] * an->value[i];
    }
  });
  return out;
}

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::require_same_shape("add", a.shape(), b.shape());
  Tensor<T> out(a.shape());
  const auto x = a.data(), z = b.data();
  auto y = out.mutable_data();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + z[i];
  auto an = a.node(), bn = b.node();
  detail::record(out, "add", {a, b}, [an, bn](const std::vector<T>& gy) {
    for (auto* node : {an.get(), bn.get()}) {
      if (!node->requires_grad) continue;
      auto& d = node->grad_buffer();
      for (std::size_t i = 0; i < gy.size(); ++i) d[i] += gy[i];
    }
  });
  return out;
}

/// Stacks channels of a then b.
template <class T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  detail::require(sa.n == sb.n, "concat_channels: batch size differs (" + std::to_string(sa.n) + " vs " +
                                    std::to_string(sb.n) + ")");
  detail::require(sa.h == sb.h, "concat_channels: height differs (" + std::to_string(sa.h) + " vs " +
                                    std::to_string(sb.h) + ")");
  detail::require(sa.w == sb.w, "concat_channels: width differs (" + std::to_string(sa.w) + " vs " +
                                    std::to_string(sb.w) + ")");
  Shape os{sa.n, sa.c + sb.c, sa.h, sa.w};
  Tensor<T> out(os);
  const std::size_t la = sa.c * sa.plane(), lb = sb.c * sb.plane();
  auto y = out.mutable_data();
  for (std::size_t n = 0; n < sa.n; ++n) {
    std::copy_n(a.data().data() + n * la, la, y.data() + n * (la + lb));
    std::copy_n(b.data().data() + n * lb, lb, y.data() + n * (la + lb) + la);
  }
  auto an = a.node(), bn = b.node();
  detail::record(out, "concat_channels", {a, b}, [an, bn, la, lb, batch = sa.n](const std::vector<T>& gy) {
    for (std::size_t n = 0; n < batch; ++n) {
      const T* g = gy.data() + n * (la + lb);
      if (an->requires_grad) {
        T* d = an->grad_buffer().data() + n * la;
        for (std::size_t i = 0; i < la; ++i) d[i] += g[i];
      }
      if (bn->requires_grad) {
        T* d = bn->grad_buffer().data() + n * lb;
        for (std::size_t i = 0; i < lb; ++i) d[i] += g[la + i];
      }
    }
  });
  return out;
}

/// scale * x + shift, elementwise.
template <class T>
Tensor<T> affine(const Tensor<T>& input, T scale, T shift) {
  Tensor<T> out(input.shape());
  const auto x = input.data();
  auto y = out.mutable_data();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = scale * x[i] + shift;
  auto xin = input.node();
  detail::record(out, "affine", {input}, [xin, scale](const std::vector<T>& gy) {
    auto& d = xin->grad_buffer();
    for (std::size_t i = 0; i < gy.size(); ++i) d[i] += scale * gy[i];
  });
  return out;
}

/// Sum of all elements as a 1x1x1x1 tensor.
template <class T>
Tensor<T> sum(const Tensor<T>& input) {
  double s = 0;
  for (T v : input.data()) s += v;
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(s));
  auto xin = input.node();
  detail::record(out, "sum", {input}, [xin](const std::vector<T>& gy) {
    for (auto& d : xin->grad_buffer()) d += gy[0];
  });
  return out;
}

template <class T>
Tensor<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  detail::require_same_shape("mse_loss", pred.shape(), target.shape());
  const auto p = pred.data(), t = target.data();
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = static_cast<double>(p[i]) - t[i];
    s += d * d;
  }
  const double count = static_cast<double>(p.size());
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(s / count));
  auto pn = pred.node(), tn = target.node();
  detail::record(out, "mse_loss", {pred, target}, [pn, tn, count](const std::vector<T>& gy) {
    const double k = 2.0 * gy[0] / count;
    for (auto [node, sign] : {std::pair{pn.get(), 1.0}, std::pair{tn.get(), -1.0}}) {
      if (!node->requires_grad) continue;
      auto& d = node->grad_buffer();
      for (std::size_t i = 0; i < d.size(); ++i)
        d[i] += static_cast<T>(sign * k * (static_cast<double>(pn->value[i]) - tn->value[i]));
    }
  });
  return out;
}

/// Mean absolute difference; the subgradient at a zero difference is 0.
template <class T>
Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  detail::require_same_shape("l1_loss", pred.shape(), target.shape());
  const auto p = pred.data(), t = target.data();
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(static_cast<double>(p[i]) - t[i]);
  const double count = static_cast<double>(p.size());
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(s / count));
  auto pn = pred.node(), tn = target.node();
  detail::record(out, "l1_loss", {pred, target}, [pn, tn, count](const std::vector<T>& gy) {
    const double k = gy[0] / count;
    for (auto [node, sign] : {std::pair{pn.get(), 1.0}, std::pair{tn.get(), -1.0}}) {
      if (!node->requires_grad) continue;
      auto& d = node->grad_buffer();
      for (std::size_t i = 0; i < d.size(); ++i) {
        const double diff = static_cast<double>(pn->value[i]) - tn->value[i];
        const double sgn = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
        d[i] += static_cast<T>(sign * k * sgn);
      }
    }
  });
  return out;
}

struct SsimOptions {
  std::size_t window = 11;
  double sigma = 1.5;
  double data_range = 1.0;
};

/// Normalized 1-D Gaussian taps.
inline std::vector<double> gaussian_taps(std::size_t window, double sigma) {
  std::vector<double> g(window);
  const double center = static_cast<double>(window / 2);
  double total = 0;
  for (std::size_t i = 0; i < window; ++i) {
    const double d = static_cast<double>(i) - center;
    g[i] = std::exp(-d * d / (2 * sigma * sigma));
    total += g[i];
  }
  for (auto& v : g) v /= total;
  return g;
}

namespace detail {

// Separable Gaussian filter, "valid" extent: (h-win+1) x (w-win+1).
inline void gaussian_valid(const double* src, std::size_t h, std::size_t w, const std::vector<double>& g,
                           double* dst) {
  const std::size_t k = g.size(), oh = h - k + 1, ow = w - k + 1;
  std::vector<double> rows(h * ow);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0;
      for (std::size_t t = 0; t < k; ++t) s += g[t] * src[y * w + x + t];
      rows[y * ow + x] = s;
    }
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double s = 0;
      for (std::size_t t = 0; t < k; ++t) s += g[t] * rows[(y + t) * ow + x];
      dst[y * ow + x] = s;
    }
}

// Adjoint of gaussian_valid: scatters an (oh x ow) map back onto (h x w).
inline void gaussian_valid_adjoint(const double* src, std::size_t h, std::size_t w, const std::vector<double>& g,
                                   double* dst) {
  const std::size_t k = g.size(), oh = h - k + 1, ow = w - k + 1;
  std::vector<double> rows(h * ow, 0.0);
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x)
      for (std::size_t t = 0; t < k; ++t) rows[(y + t) * ow + x] += g[t] * src[y * ow + x];
  std::fill(dst, dst + h * w, 0.0);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < ow; ++x)
      for (std::size_t t = 0; t < k; ++t) dst[y * w + x + t] += g[t] * rows[y * ow + x];
}

}  // namespace detail

/// Mean structural similarity over all valid Gaussian-window positions of
/// every (n, c=1) plane. Stabilizers C1 = (0.01 L)^2, C2 = (0.03 L)^2.
template <class T>
Tensor<T> ssim(const Tensor<T>& pred, const Tensor<T>& target, const SsimOptions& opt = {}) {
  using detail::require;
  detail::require_same_shape("ssim", pred.shape(), target.shape());
  const Shape s = pred.shape();
  require(s.c == 1, "ssim: expected single-channel input, got c = " + std::to_string(s.c));
  require(opt.window % 2 == 1, "ssim: window " + std::to_string(opt.window) + " must be odd");
  require(opt.window <= s.h && opt.window <= s.w, "ssim: image " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                                                      " smaller than window " + std::to_string(opt.window));
  const auto g = gaussian_taps(opt.window, opt.sigma);
  const double c1 = (0.01 * opt.data_range) * (0.01 * opt.data_range);
  const double c2 = (0.03 * opt.data_range) * (0.03 * opt.data_range);
  const std::size_t oh = s.h - opt.window + 1, ow = s.w - opt.window + 1, op = oh * ow, plane = s.plane();
  const double count = static_cast<double>(s.n * op);

  // Per-position partials of the SSIM map, kept for the backward pass.
  struct Partials {
    std::vector<double> dmx, dmy, dsxx, dsyy, dsxy, mx, my;
  };
  auto partials = std::make_shared<std::vector<Partials>>(s.n);
  double total = 0;
  std::vector<double> xs(plane), ys(plane), buf(plane);
  std::vector<double> mx(op), my(op), exx(op), eyy(op), exy(op);
  for (std::size_t n = 0; n < s.n; ++n) {
    const T* xp = pred.data().data() + n * plane;
    const T* yp = target.data().data() + n * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      xs[i] = xp[i];
      ys[i] = yp[i];
    }
    detail::gaussian_valid(xs.data(), s.h, s.w, g, mx.data());
    detail::gaussian_valid(ys.data(), s.h, s.w, g, my.data());
    for (std::size_t i = 0; i < plane; ++i) buf[i] = xs[i] * xs[i];
    detail::gaussian_valid(buf.data(), s.h, s.w, g, exx.data());
    for (std::size_t i = 0; i < plane; ++i) buf[i] = ys[i] * ys[i];
    detail::gaussian_valid(buf.data(), s.h, s.w, g, eyy.data());
    for (std::size_t i = 0; i < plane; ++i) buf[i] = xs[i] * ys[i];
    detail::gaussian_valid(buf.data(), s.h, s.w, g, exy.data());

    Partials& pt = (*partials)[n];
    pt.dmx.resize(op);
    pt.dmy.resize(op);
    pt.dsxx.resize(op);
    pt.dsyy.resize(op);
    pt.dsxy.resize(op);
    pt.mx = mx;
    pt.my = my;
    for (std::size_t i = 0; i < op; ++i) {
      const double sxx = exx[i] - mx[i] * mx[i];
      const double syy = eyy[i] - my[i] * my[i];
      const double sxy = exy[i] - mx[i] * my[i];
      const double n1 = 2 * mx[i] * my[i] + c1, n2 = 2 * sxy + c2;
      const double d1 = mx[i] * mx[i] + my[i] * my[i] + c1, d2 = sxx + syy + c2;
      const double v = (n1 * n2) / (d1 * d2);
      total += v;
      pt.dmx[i] = 2 * my[i] * n2 / (d1 * d2) - v * 2 * mx[i] / d1;
      pt.dmy[i] = 2 * mx[i] * n2 / (d1 * d2) - v * 2 * my[i] / d1;
      pt.dsxx[i] = -v / d2;
      pt.dsyy[i] = -v / d2;
      pt.dsxy[i] = 2 * n1 / (d1 * d2);
    }
  }
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(total / count));

  auto pn = pred.node(), tn = target.node();
  detail::record(out, "ssim", {pred, target}, [pn, tn, s, g, partials, count, op, plane](const std::vector<T>& gy) {
    const double k = gy[0] / count;
    std::vector<double> a(op), b(op), c(op), wa(plane), wb(plane), wc(plane);
    for (std::size_t n = 0; n < s.n; ++n) {
      const Partials& pt = (*partials)[n];
      const T* xp = pn->value.data() + n * plane;
      const T* yp = tn->value.data() + n * plane;
      // d/dx_q = W^T[dmx - 2 dsxx mx - dsxy my] + 2 x_q W^T[dsxx] + y_q W^T[dsxy]
      auto accumulate = [&](detail::Node<T>* node, const std::vector<double>& dm, const std::vector<double>& ds,
                            const std::vector<double>& m_self, const std::vector<double>& m_other, const T* self,
                            const T* other) {
        if (!node->requires_grad) return;
        for (std::size_t i = 0; i < op; ++i) {
          a[i] = dm[i] - 2 * ds[i] * m_self[i] - pt.dsxy[i] * m_other[i];
          b[i] = ds[i];
          c[i] = pt.dsxy[i];
        }
        detail::gaussian_valid_adjoint(a.data(), s.h, s.w, g, wa.data());
        detail::gaussian_valid_adjoint(b.data(), s.h, s.w, g, wb.data());
        detail::gaussian_valid_adjoint(c.data(), s.h, s.w, g, wc.data());
        T* d = node->grad_buffer().data() + n * plane;
        for (std::size_t q = 0; q < plane; ++q)
          d[q] += static_cast<T>(k * (wa[q] + 2.0 * self[q] * wb[q] + other[q] * wc[q]));
      };
      accumulate(pn.get(), pt.dmx, pt.dsxx, pt.mx, pt.my, xp, yp);
      accumulate(tn.get(), pt.dmy, pt.dsyy, pt.my, pt.mx, yp, xp);
    }
  });
  return out;
}

}  // namespace holoforge
