#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "holoforge/core/random.hpp"
#include "holoforge/tensor/ops.hpp"

namespace holoforge {

using DiffFunction = std::function<Tensor<double>(const std::vector<Tensor<double>>&)>;

struct GradcheckCase {
  std::string label;
  std::vector<Tensor<double>> inputs;
};

struct GradcheckResult {
  std::string op;
  std::size_t cases = 0;
  double max_rel_error = 0;
  bool passed = false;
};

struct GradcheckOptions {
  double step = 1e-4;
  double tolerance = 1e-5;
  // Denominator floor for |a - n| / max(|a|, |n|, floor).
  double floor = 1e-3;
};

/// Compares analytic gradients of every requires_grad input against central
/// differences. Non-scalar outputs are reduced by a fixed random projection
/// so every output element contributes a distinct weight.
inline double max_gradient_error(const DiffFunction& fn, std::vector<Tensor<double>> inputs,
                                 const GradcheckOptions& opt = {}, std::uint64_t seed = 7) {
  Tensor<double> probe;
  {
    NoGradGuard guard;
    probe = fn(inputs);
  }
  Rng rng(seed);
  std::vector<double> weights(probe.size());
  for (auto& v : weights) v = rng.uniform(0.5, 1.5);
  const Tensor<double> projection = Tensor<double>::from_data(probe.shape(), weights);

  auto scalar_loss = [&](const std::vector<Tensor<double>>& in) {
    Tensor<double> out = fn(in);
    return out.size() == 1 ? out : sum(elementwise_mul(out, projection));
  };

  for (auto& t : inputs) t.zero_grad();
  backward(scalar_loss(inputs));

  double worst = 0;
  for (auto& t : inputs) {
    if (!t.requires_grad()) continue;
    std::vector<double> analytic(t.grad().begin(), t.grad().end());
    if (analytic.empty()) analytic.assign(t.size(), 0.0);
    auto values = t.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      double plus, minus;
      {
        NoGradGuard guard;
        values[i] = original + opt.step;
        plus = scalar_loss(inputs).item();
        values[i] = original - opt.step;
        minus = scalar_loss(inputs).item();
      }
      values[i] = original;
      const double numeric = (plus - minus) / (2 * opt.step);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), opt.floor});
      worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
  }
  return worst;
}

struct OpGradcheck {
  std::string name;
  DiffFunction fn;
  std::vector<GradcheckCase> cases;
};

namespace detail {

inline Tensor<double> random_tensor(Rng& rng, Shape s, bool requires_grad = true, double min_magnitude = 0.0) {
  std::vector<double> v(s.size());
  for (auto& x : v) {
    do {
      x = rng.normal();
    } while (std::abs(x) < min_magnitude);
  }
  return Tensor<double>::from_data(s, std::move(v), requires_grad);
}

inline Tensor<double> random_uniform(Rng& rng, Shape s, double lo, double hi, bool requires_grad = true) {
  std::vector<double> v(s.size());
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor<double>::from_data(s, std::move(v), requires_grad);
}

}  // namespace detail

/// The registered differentiable ops, each with three or more input shapes.
inline std::vector<OpGradcheck> gradcheck_registry(std::uint64_t seed = 2024) {
  using detail::random_tensor;
  using detail::random_uniform;
  Rng rng(seed);
  std::vector<OpGradcheck> ops;

  {
    OpGradcheck op{"conv2d", nullptr, {}};
    struct ConvCase {
      Shape x, w;
      std::size_t stride, pad;
    };
    const ConvCase conv_cases[] = {{{1, 2, 4, 4}, {3, 2, 3, 3}, 1, 1},
                                   {{2, 3, 5, 6}, {2, 3, 3, 3}, 2, 1},
                                   {{2, 4, 3, 3}, {5, 4, 1, 1}, 1, 0},
                                   {{1, 1, 7, 5}, {2, 1, 5, 3}, 1, 2}};
    // The stride/pad of the case being evaluated travels as a 1x1x1x2 tensor.
    op.fn = [](const std::vector<Tensor<double>>& in) {
      const auto sp = in[3].data();
      return conv2d(in[0], in[1], std::optional<Tensor<double>>(in[2]), static_cast<std::size_t>(sp[0]),
                    static_cast<std::size_t>(sp[1]));
    };
    for (const auto& c : conv_cases) {
      op.cases.push_back({"x" + c.x.str() + " w" + c.w.str(),
                          {random_tensor(rng, c.x), random_tensor(rng, c.w), random_tensor(rng, {1, c.w.n, 1, 1}),
                           Tensor<double>::from_data({1, 1, 1, 2}, {double(c.stride), double(c.pad)})}});
    }
    ops.push_back(std::move(op));
  }
  {
    OpGradcheck op{"batchnorm2d_train", nullptr, {}};
    op.fn = [](const std::vector<Tensor<double>>& in) {
      std::vector<double> rm(in[0].shape().c, 0.0), rv(in[0].shape().c, 1.0);
      return batchnorm2d(in[0], in[1], in[2], std::span<double>(rm), std::span<double>(rv), Mode::train);
    };
    for (Shape s : {Shape{4, 3, 2, 2}, Shape{2, 2, 3, 3}, Shape{3, 1, 4, 2}}) {
      op.cases.push_back({s.str(),
                          {random_tensor(rng, s), random_uniform(rng, {1, s.c, 1, 1}, 0.5, 1.5),
                           random_tensor(rng, {1, s.c, 1, 1})}});
    }
    ops.push_back(std::move(op));
  }
  {
    OpGradcheck op{"batchnorm2d_eval", nullptr, {}};
    op.fn = [](const std::vector<Tensor<double>>& in) {
      const std::size_t c = in[0].shape().c;
      std::vector<double> rm(in[3].data().begin(), in[3].data().end());
      std::vector<double> rv(c, 0.7);
      return batchnorm2d(in[0], in[1], in[2], std::span<double>(rm), std::span<double>(rv), Mode::eval);
    };
    for (Shape s : {Shape{2, 3, 2, 2}, Shape{1, 2, 3, 3}, Shape{3, 4, 1, 2}}) {
      op.cases.push_back({s.str(),
                          {random_tensor(rng, s), random_uniform(rng, {1, s.c, 1, 1}, 0.5, 1.5),
                           random_tensor(rng, {1, s.c, 1, 1}), random_tensor(rng, {1, s.c, 1, 1}, false)}});
    }
    ops.push_back(std::move(op));
  }
  {
    OpGradcheck op{"bilinear_upsample2x", [](const auto& in) { return bilinear_upsample2x(in[0]); }, {}};
    for (Shape s : {Shape{1, 1, 2, 2}, Shape{2, 2, 3, 4}, Shape{1, 3, 1, 5}})
      op.cases.push_back({s.str(), {random_tensor(rng, s)}});
    ops.push_back(std::move(op));
  }
  {
    OpGradcheck op{"leaky_relu", [](const auto& in) { return leaky_relu(in[0], 0.01); }, {}};
    for (Shape s : {Shape{1, 1, 3, 3}, Shape{2, 3, 4, 2}, Shape{1, 5, 2, 7}})
      op.cases.push_back({s.str(), {random_tensor(rng, s, true, 0.05)}});
    ops.push_back(std::move(op));
  }
  {
    OpGradcheck op{"sigmoid", [](const auto& in) { return sigmoid(in[0]); }, {}};
    for (Shape s : {Shape{1, 1, 3, 3}, Shape{2, 2, 2, 2}, Shape{1, 4, 3, 1}})
      op.cases.push_back({s.str(), {random_tensor(rng, s)}});
    ops.push_back(std::move(op));
  }
  {
    OpGradcheck op{"elementwise_mul", [](const auto& in) { return elementwise_mul(in[0], in[1]); }, {}};
    for (Shape s : {Shape{1, 1, 3, 3}, Shape{2, 3, 2, 2}, Shape{1, 2, 5, 1}})
      op.cases.push_back({s.str(), {random_tensor(rng, s), random_tensor(rng, s)}});
    ops.push_back(std::move(op));
  }
  {
    OpGradcheck op{"add", [](const auto& in) { return add(in[0], in[1]); }, {}};
    for (Shape s : {Shape{1, 1, 3, 3}, Shape{2, 3, 2, 2}, Shape{1, 2, 5, 1}})
      op.cases.push_back({s.str(), {random_tensor(rng, s), random_tensor(rng, s)}});
    ops.push_back(std::move(op));
  }
  {
    OpGradcheck op{"concat_channels", [](const auto& in) { return concat_channels(in[0], in[1]); }, {}};
    for (auto [a, b] : {std::pair{Shape{1, 2, 2, 2}, Shape{1, 3, 2, 2}}, std::pair{Shape{2, 1, 3, 3}, Shape{2, 1, 3, 3}},
                        std::pair{Shape{3, 4, 1, 2}, Shape{3, 2, 1, 2}}})
      op.cases.push_back({a.str() + "+" + b.str(), {random_tensor(rng, a), random_tensor(rng, b)}});
    ops.push_back(std::move(op));
  }
  {
    OpGradcheck op{"affine", [](const auto& in) { return affine(in[0], -0.7, 0.3); }, {}};
    for (Shape s : {Shape{1, 1, 1, 1}, Shape{2, 2, 2, 2}, Shape{1, 3, 4, 1}})
      op.cases.push_back({s.str(), {random_tensor(rng, s)}});
    ops.push_back(std::move(op));
  }
  {
    OpGradcheck op{"sum", [](const auto& in) { return sum(in[0]); }, {}};
    for (Shape s : {Shape{1, 1, 1, 1}, Shape{2, 2, 2, 2}, Shape{1, 3, 4, 1}})
      op.cases.push_back({s.str(), {random_tensor(rng, s)}});
    ops.push_back(std::move(op));
  }
  {
    OpGradcheck op{"mse_loss", [](const auto& in) { return mse_loss(in[0], in[1]); }, {}};
    for (Shape s : {Shape{1, 1, 3, 3}, Shape{2, 1, 4, 4}, Shape{1, 3, 2, 5}})
      op.cases.push_back({s.str(), {random_tensor(rng, s), random_tensor(rng, s)}});
    ops.push_back(std::move(op));
  }
  {
    OpGradcheck op{"l1_loss", [](const auto& in) { return l1_loss(in[0], in[1]); }, {}};
    for (Shape s : {Shape{1, 1, 3, 3}, Shape{2, 1, 4, 4}, Shape{1, 3, 2, 5}}) {
      Tensor<double> target = random_tensor(rng, s);
      std::vector<double> pred(s.size());
      for (std::size_t i = 0; i < pred.size(); ++i) {
        const double offset = rng.uniform(0.05, 1.0);
        pred[i] = target.data()[i] + (rng.uniform() < 0.5 ? -offset : offset);
      }
      op.cases.push_back({s.str(), {Tensor<double>::from_data(s, pred, true), target}});
    }
    ops.push_back(std::move(op));
  }
  {
    OpGradcheck op{"ssim", nullptr, {}};
    op.fn = [](const std::vector<Tensor<double>>& in) {
      const std::size_t window = static_cast<std::size_t>(in[2].item());
      return ssim(in[0], in[1], SsimOptions{window, 1.5, 1.0});
    };
    struct SsimCase {
      Shape s;
      std::size_t window;
    };
    for (auto c : {SsimCase{{1, 1, 12, 12}, 11}, SsimCase{{2, 1, 8, 9}, 5}, SsimCase{{1, 1, 6, 7}, 3}}) {
      op.cases.push_back({c.s.str() + " win" + std::to_string(c.window),
                          {random_uniform(rng, c.s, 0.0, 1.0), random_uniform(rng, c.s, 0.0, 1.0),
                           Tensor<double>::scalar(static_cast<double>(c.window))}});
    }
    ops.push_back(std::move(op));
  }
  return ops;
}

inline GradcheckResult run_gradcheck(const OpGradcheck& op, const GradcheckOptions& opt = {}) {
  GradcheckResult r{op.name, op.cases.size(), 0.0, false};
  for (const auto& c : op.cases) {
    std::vector<Tensor<double>> inputs;
    for (const auto& t : c.inputs) inputs.push_back(t.clone());
    r.max_rel_error = std::max(r.max_rel_error, max_gradient_error(op.fn, inputs, opt));
  }
  r.passed = r.max_rel_error < opt.tolerance;
  return r;
}

}  // namespace holoforge
