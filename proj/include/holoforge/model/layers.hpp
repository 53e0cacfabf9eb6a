#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "holoforge/core/random.hpp"
#include "holoforge/tensor/ops.hpp"

namespace holoforge {

template <class T>
struct Parameter {
  std::string name;
  Tensor<T> tensor;
};

template <class T>
using ParameterList = std::vector<Parameter<T>>;

template <class T>
struct Conv2d {
  Tensor<T> weight;
  Tensor<T> bias;
  std::size_t stride = 1;
  std::size_t pad = 0;

  Conv2d() = default;
  Conv2d(std::size_t c_in, std::size_t c_out, std::size_t kernel, std::size_t stride_ = 1)
      : weight(Shape{c_out, c_in, kernel, kernel}, T(0), true),
        bias(Shape{1, c_out, 1, 1}, T(0), true),
        stride(stride_),
        pad(kernel / 2) {}

  Tensor<T> operator()(const Tensor<T>& x) const { return conv2d(x, weight, bias, stride, pad); }

  void parameters(const std::string& prefix, ParameterList<T>& out) const {
    out.push_back({prefix + ".weight", weight});
    out.push_back({prefix + ".bias", bias});
  }

  // He (fan-in) normal init; bias zero.
  void reset(Rng& rng) {
    const Shape& s = weight.shape();
    const double stddev = std::sqrt(2.0 / static_cast<double>(s.c * s.h * s.w));
    for (auto& v : weight.mutable_data()) v = static_cast<T>(rng.normal(0.0, stddev));
    for (auto& v : bias.mutable_data()) v = T(0);
  }
};

template <class T>
struct BatchNorm2d {
  Tensor<T> gamma, beta;
  Tensor<T> running_mean, running_var;
  Mode mode = Mode::train;
  double momentum = 0.1;
  double eps = 1e-5;

  BatchNorm2d() = default;
  BatchNorm2d(std::size_t channels, double momentum_, double eps_)
      : gamma(Shape{1, channels, 1, 1}, T(1), true),
        beta(Shape{1, channels, 1, 1}, T(0), true),
        running_mean(Shape{1, channels, 1, 1}, T(0)),
        running_var(Shape{1, channels, 1, 1}, T(1)),
        momentum(momentum_),
        eps(eps_) {}

  Tensor<T> operator()(const Tensor<T>& x) {
    return batchnorm2d(x, gamma, beta, running_mean.mutable_data(), running_var.mutable_data(), mode, momentum, eps);
  }

  void parameters(const std::string& prefix, ParameterList<T>& out) const {
    out.push_back({prefix + ".gamma", gamma});
    out.push_back({prefix + ".beta", beta});
  }

  void buffers(const std::string& prefix, ParameterList<T>& out) const {
    out.push_back({prefix + ".running_mean", running_mean});
    out.push_back({prefix + ".running_var", running_var});
  }

  void reset() {
    for (auto& v : gamma.mutable_data()) v = T(1);
    for (auto& v : beta.mutable_data()) v = T(0);
    for (auto& v : running_mean.mutable_data()) v = T(0);
    for (auto& v : running_var.mutable_data()) v = T(1);
  }
};

// conv -> batch norm -> optional LeakyReLU
template <class T>
struct ConvBn {
  Conv2d<T> conv;
  BatchNorm2d<T> bn;
  bool activate = true;
  T slope = T(0.01);

  ConvBn() = default;
  ConvBn(std::size_t c_in, std::size_t c_out, std::size_t kernel, std::size_t stride, bool activate_, T slope_,
         double momentum, double eps)
      : conv(c_in, c_out, kernel, stride), bn(c_out, momentum, eps), activate(activate_), slope(slope_) {}

  Tensor<T> operator()(const Tensor<T>& x) {
    Tensor<T> y = bn(conv(x));
    return activate ? leaky_relu(y, slope) : y;
  }

  void parameters(const std::string& prefix, ParameterList<T>& out) const {
    conv.parameters(prefix + ".conv", out);
    bn.parameters(prefix + ".bn", out);
  }
  void buffers(const std::string& prefix, ParameterList<T>& out) const { bn.buffers(prefix + ".bn", out); }
  void reset(Rng& rng) {
    conv.reset(rng);
    bn.reset();
  }
};

}  // namespace holoforge
