#include <gtest/gtest.h>

#include <cmath>

#include "holoforge/core/random.hpp"
#include "holoforge/tensor/gradcheck.hpp"
#include "holoforge/tensor/ops.hpp"
#include "oracles.hpp"

using namespace holoforge;

namespace {

std::vector<double> seeded(std::uint64_t seed, std::size_t count, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  std::vector<double> v(count);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

template <class T>
std::vector<double> as_double(const Tensor<T>& t) {
  return {t.data().begin(), t.data().end()};
}

}  // namespace

TEST(Tensor, ConstructionChecksDataLength) {
  EXPECT_THROW(Tensor<float>::from_data({1, 1, 2, 2}, {1, 2, 3}), ShapeError);
  Tensor<float> t({2, 3, 4, 5}, 1.5f);
  EXPECT_EQ(t.size(), 120u);
  EXPECT_FALSE(t.has_grad());
}

TEST(Conv2d, IdentityKernelReturnsInput) {
  auto x = Tensor<double>::from_data({1, 1, 3, 3}, seeded(1, 9));
  std::vector<double> k(9, 0.0);
  k[4] = 1.0;
  auto w = Tensor<double>::from_data({1, 1, 3, 3}, k);
  auto y = conv2d(x, w, std::nullopt, 1, 1);
  EXPECT_EQ(y.shape(), x.shape());
  for (std::size_t i = 0; i < 9; ++i) EXPECT_DOUBLE_EQ(y.data()[i], x.data()[i]);
}

TEST(Conv2d, ZeroInputZeroBiasGivesZero) {
  Tensor<float> x({1, 2, 5, 5});
  auto w = Tensor<float>::from_data({4, 2, 3, 3}, std::vector<float>(72, 0.3f));
  auto y = conv2d(x, w, Tensor<float>({1, 4, 1, 1}), 1, 1);
  for (float v : y.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Conv2d, MatchesDirectSummationOracle) {
  const auto xv = seeded(11, 32), wv = seeded(12, 54);
  auto x = Tensor<float>::from_data({1, 2, 4, 4}, {xv.begin(), xv.end()});
  auto w = Tensor<float>::from_data({3, 2, 3, 3}, {wv.begin(), wv.end()});
  auto y = conv2d(x, w, std::nullopt, 1, 1);
  std::size_t oh, ow;
  std::vector<double> xf(x.data().begin(), x.data().end()), wf(w.data().begin(), w.data().end());
  auto ref = oracle::conv2d(xf, 1, 2, 4, 4, wf, 3, 3, 3, {}, 1, 1, oh, ow);
  ASSERT_EQ(y.shape(), (Shape{1, 3, oh, ow}));
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y.data()[i], ref[i], 1e-6);
}

// Exhaustive sweep over a seeded family of small geometries (all dims <= 8).
TEST(Conv2d, OracleEquivalenceOverSmallShapes) {
  Rng rng(99);
  int checked = 0;
  for (std::size_t n : {1, 2})
    for (std::size_t ci : {1, 3})
      for (std::size_t co : {1, 4})
        for (std::size_t h : {3, 5, 8})
          for (std::size_t w : {4, 7})
            for (std::size_t k : {1, 3, 5})
              for (std::size_t stride : {1, 2})
                for (std::size_t pad : {0, 1, 2}) {
                  if (h + 2 * pad < k || w + 2 * pad < k) continue;
                  auto xv = seeded(rng.next_u64(), n * ci * h * w);
                  auto wv = seeded(rng.next_u64(), co * ci * k * k);
                  auto bv = seeded(rng.next_u64(), co);
                  auto x = Tensor<double>::from_data({n, ci, h, w}, xv);
                  auto wt = Tensor<double>::from_data({co, ci, k, k}, wv);
                  auto b = Tensor<double>::from_data({1, co, 1, 1}, bv);
                  auto y = conv2d(x, wt, b, stride, pad);
                  std::size_t oh, ow;
                  auto ref = oracle::conv2d(xv, n, ci, h, w, wv, co, k, k, bv, stride, pad, oh, ow);
                  ASSERT_EQ(y.shape(), (Shape{n, co, oh, ow}));
                  for (std::size_t i = 0; i < ref.size(); ++i) ASSERT_NEAR(y.data()[i], ref[i], 1e-6);
                  ++checked;
                }
  EXPECT_GT(checked, 500);
}

TEST(Conv2d, RejectsChannelMismatchNamingDimension) {
  Tensor<float> x({1, 3, 4, 4});
  Tensor<float> w({2, 4, 3, 3});
  try {
    conv2d(x, w, std::nullopt, 1, 1);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("c_in"), std::string::npos);
  }
  EXPECT_THROW(conv2d(Tensor<float>({1, 1, 4, 4}), Tensor<float>({1, 1, 2, 2}), std::nullopt, 1, 0), ShapeError);
}

TEST(BatchNorm, ConstantChannelCollapsesToBeta) {
  Tensor<float> x({2, 2, 3, 3}, 4.0f);
  auto gamma = Tensor<float>::from_data({1, 2, 1, 1}, {1.3f, 0.7f});
  auto beta = Tensor<float>::from_data({1, 2, 1, 1}, {0.25f, -0.5f});
  std::vector<float> rm(2, 0.f), rv(2, 1.f);
  auto y = batchnorm2d(x, gamma, beta, std::span<float>(rm), std::span<float>(rv), Mode::train);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y.data()[i], (i / 9) % 2 == 0 ? 0.25 : -0.5, 1e-5);
}

TEST(BatchNorm, NormalizedInputIsFixedPoint) {
  // Per channel the 8 values are +-1 with zero mean and unit variance.
  std::vector<float> v;
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 2; ++c)
      for (int i = 0; i < 4; ++i) v.push_back((i + n + c) % 2 ? 1.0f : -1.0f);
  auto x = Tensor<float>::from_data({2, 2, 2, 2}, v);
  Tensor<float> gamma({1, 2, 1, 1}, 1.f), beta({1, 2, 1, 1}, 0.f);
  std::vector<float> rm(2, 0.f), rv(2, 1.f);
  auto y = batchnorm2d(x, gamma, beta, std::span<float>(rm), std::span<float>(rv), Mode::train, 0.1, 1e-5);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(y.data()[i], v[i], 1e-3);
}

TEST(BatchNorm, MatchesTwoPassOracleAndUpdatesRunningStats) {
  auto xv = seeded(5, 48, -2, 3);
  auto gv = seeded(6, 3, 0.5, 1.5), bv = seeded(7, 3);
  auto x = Tensor<double>::from_data({4, 3, 2, 2}, xv);
  auto gamma = Tensor<double>::from_data({1, 3, 1, 1}, gv);
  auto beta = Tensor<double>::from_data({1, 3, 1, 1}, bv);
  std::vector<double> rm(3, 0.0), rv(3, 1.0);
  auto y = batchnorm2d(x, gamma, beta, std::span<double>(rm), std::span<double>(rv), Mode::train);
  auto ref = oracle::batchnorm(xv, 4, 3, 4, gv, bv, 1e-5);
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y.data()[i], ref[i], 1e-6);
  for (std::size_t c = 0; c < 3; ++c) {
    double mean = 0;
    for (std::size_t n = 0; n < 4; ++n)
      for (std::size_t i = 0; i < 4; ++i) mean += xv[(n * 3 + c) * 4 + i];
    mean /= 16;
    EXPECT_NEAR(rm[c], 0.1 * mean, 1e-12);
  }
}

TEST(BatchNorm, EvalWithoutUpdatesUsesInitialStats) {
  auto xv = seeded(8, 8);
  auto x = Tensor<double>::from_data({1, 2, 2, 2}, xv);
  Tensor<double> gamma({1, 2, 1, 1}, 1.0), beta({1, 2, 1, 1}, 0.0);
  std::vector<double> rm(2, 0.0), rv(2, 1.0);
  auto y = batchnorm2d(x, gamma, beta, std::span<double>(rm), std::span<double>(rv), Mode::eval);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(y.data()[i], xv[i] / std::sqrt(1 + 1e-5), 1e-12);
  EXPECT_EQ(rm[0], 0.0);
  EXPECT_THROW(batchnorm2d(Tensor<double>({0, 2, 2, 2}), gamma, beta, std::span<double>(rm), std::span<double>(rv),
                           Mode::train),
               ShapeError);
}

TEST(Bilinear, ConstantStaysConstant) {
  Tensor<float> x({1, 2, 3, 5}, 0.625f);
  auto y = bilinear_upsample2x(x);
  EXPECT_EQ(y.shape(), (Shape{1, 2, 6, 10}));
  for (float v : y.data()) EXPECT_EQ(v, 0.625f);
}

TEST(Bilinear, CornersAndFullGridMatchFormula) {
  auto x = Tensor<double>::from_data({1, 1, 2, 2}, {1, 2, 3, 4});
  auto y = bilinear_upsample2x(x);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 4, 4}));
  EXPECT_EQ(y.at(0, 0, 0, 0), 1.0);
  EXPECT_EQ(y.at(0, 0, 0, 3), 2.0);
  EXPECT_EQ(y.at(0, 0, 3, 0), 3.0);
  EXPECT_EQ(y.at(0, 0, 3, 3), 4.0);
  std::vector<double> plane{1, 2, 3, 4};
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(y.at(0, 0, i, j), oracle::bilinear_pixel(plane, 2, 2, i, j), 1e-6);
}

TEST(Bilinear, SinglePixelReplicates) {
  auto x = Tensor<double>::from_data({1, 1, 1, 1}, {0.3});
  auto y = bilinear_upsample2x(x);
  for (double v : y.data()) EXPECT_EQ(v, 0.3);
}

TEST(LeakyRelu, Definition) {
  auto x = Tensor<float>::from_data({1, 1, 1, 3}, {-1.f, 0.f, 2.f});
  auto y = leaky_relu(x, 0.01f);
  EXPECT_FLOAT_EQ(y.data()[0], -0.01f);
  EXPECT_EQ(y.data()[1], 0.f);
  EXPECT_EQ(y.data()[2], 2.f);
  auto xv = seeded(3, 50);
  auto r = leaky_relu(Tensor<double>::from_data({1, 2, 5, 5}, xv), 0.01);
  for (std::size_t i = 0; i < xv.size(); ++i) EXPECT_EQ(r.data()[i], xv[i] >= 0 ? xv[i] : 0.01 * xv[i]);
  EXPECT_THROW(leaky_relu(x, 1.5f), std::invalid_argument);
}

TEST(LeakyRelu, GradientAtZeroIsOne) {
  auto x = Tensor<double>::from_data({1, 1, 1, 1}, {0.0}, true);
  backward(sum(leaky_relu(x, 0.01)));
  EXPECT_EQ(x.grad()[0], 1.0);
}

TEST(Elementwise, MulAndAddIdentities) {
  auto av = seeded(21, 12), bv = seeded(22, 12);
  auto a = Tensor<double>::from_data({1, 3, 2, 2}, av);
  auto b = Tensor<double>::from_data({1, 3, 2, 2}, bv);
  auto ones = Tensor<double>({1, 3, 2, 2}, 1.0);
  auto zeros = Tensor<double>({1, 3, 2, 2}, 0.0);
  EXPECT_EQ(as_double(elementwise_mul(a, ones)), av);
  auto z = elementwise_mul(a, zeros);
  for (double v : z.data()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(as_double(add(a, zeros)), av);
  auto p = elementwise_mul(a, b);
  for (std::size_t i = 0; i < av.size(); ++i) EXPECT_EQ(p.data()[i], av[i] * bv[i]);
  EXPECT_THROW(add(a, Tensor<double>({1, 2, 2, 2})), ShapeError);
  EXPECT_THROW(elementwise_mul(a, Tensor<double>({1, 3, 2, 3})), ShapeError);
}

TEST(Concat, OrderAndBackwardSplit) {
  auto a = Tensor<double>::from_data({1, 2, 2, 2}, seeded(31, 8), true);
  auto b = Tensor<double>::from_data({1, 3, 2, 2}, seeded(32, 12), true);
  auto c = concat_channels(a, b);
  ASSERT_EQ(c.shape(), (Shape{1, 5, 2, 2}));
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(c.data()[i], a.data()[i]);
  for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(c.data()[8 + i], b.data()[i]);

  std::vector<double> upstream(20);
  for (std::size_t i = 0; i < 20; ++i) upstream[i] = static_cast<double>(i) + 1;
  backward(sum(elementwise_mul(c, Tensor<double>::from_data({1, 5, 2, 2}, upstream))));
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(a.grad()[i], upstream[i]);
  for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(b.grad()[i], upstream[8 + i]);
  EXPECT_THROW(concat_channels(a, Tensor<double>({1, 1, 3, 2})), ShapeError);
}

TEST(Sigmoid, ValuesAndSaturation) {
  auto y = sigmoid(Tensor<float>::from_data({1, 1, 1, 3}, {0.f, -1000.f, 1000.f}));
  EXPECT_EQ(y.data()[0], 0.5f);
  EXPECT_GE(y.data()[1], 0.f);
  EXPECT_TRUE(std::isfinite(y.data()[1]));
  EXPECT_EQ(y.data()[2], 1.f);
  auto xv = seeded(41, 30, -6, 6);
  auto s = sigmoid(Tensor<double>::from_data({1, 1, 5, 6}, xv));
  for (std::size_t i = 0; i < xv.size(); ++i) EXPECT_NEAR(s.data()[i], 1.0 / (1.0 + std::exp(-xv[i])), 1e-7);
}

TEST(Losses, ClosedForms) {
  Tensor<float> p({1, 1, 4, 4}, 0.75f), t({1, 1, 4, 4}, 0.25f);
  EXPECT_FLOAT_EQ(mse_loss(p, t).item(), 0.25f);
  EXPECT_FLOAT_EQ(l1_loss(p, t).item(), 0.5f);
  EXPECT_EQ(mse_loss(p, p).item(), 0.f);
  EXPECT_EQ(l1_loss(p, p).item(), 0.f);
  auto av = seeded(51, 40), bv = seeded(52, 40);
  double mse = 0, l1 = 0;
  for (std::size_t i = 0; i < 40; ++i) {
    mse += (av[i] - bv[i]) * (av[i] - bv[i]);
    l1 += std::abs(av[i] - bv[i]);
  }
  auto a = Tensor<double>::from_data({2, 1, 4, 5}, av), b = Tensor<double>::from_data({2, 1, 4, 5}, bv);
  EXPECT_NEAR(mse_loss(a, b).item(), mse / 40, 1e-7);
  EXPECT_NEAR(l1_loss(a, b).item(), l1 / 40, 1e-7);
  EXPECT_THROW(mse_loss(a, Tensor<double>({2, 1, 5, 4})), ShapeError);
}

TEST(Ssim, SelfSimilarityIsOne) {
  auto xv = seeded(61, 256, 0, 1);
  auto x = Tensor<float>::from_data({1, 1, 16, 16}, {xv.begin(), xv.end()});
  EXPECT_NEAR(ssim(x, x).item(), 1.0, 1e-6);
}

TEST(Ssim, InvertedBinaryImageIsBounded) {
  std::vector<double> v(256);
  for (std::size_t i = 0; i < 256; ++i) v[i] = (i % 16) < 8 ? 0.0 : 1.0;
  std::vector<double> inv(256);
  for (std::size_t i = 0; i < 256; ++i) inv[i] = 1.0 - v[i];
  double s = ssim(Tensor<double>::from_data({1, 1, 16, 16}, v), Tensor<double>::from_data({1, 1, 16, 16}, inv)).item();
  EXPECT_GE(s, -1.0);
  EXPECT_LT(s, 1.0);
}

TEST(Ssim, MatchesDirectWindowOracle) {
  auto av = seeded(71, 256, 0, 1), bv = seeded(72, 256, 0, 1);
  double s = ssim(Tensor<double>::from_data({1, 1, 16, 16}, av), Tensor<double>::from_data({1, 1, 16, 16}, bv)).item();
  EXPECT_NEAR(s, oracle::ssim(av, bv, 16, 16), 1e-5);
  // correlated pair exercises the upper range
  for (std::size_t i = 0; i < 256; ++i) bv[i] = 0.8 * av[i] + 0.1 * bv[i];
  s = ssim(Tensor<double>::from_data({1, 1, 16, 16}, av), Tensor<double>::from_data({1, 1, 16, 16}, bv)).item();
  EXPECT_NEAR(s, oracle::ssim(av, bv, 16, 16), 1e-5);
}

TEST(Ssim, RejectsSmallImagesAndMultiChannel) {
  EXPECT_THROW(ssim(Tensor<float>({1, 1, 8, 8}), Tensor<float>({1, 1, 8, 8})), ShapeError);
  EXPECT_THROW(ssim(Tensor<float>({1, 3, 16, 16}), Tensor<float>({1, 3, 16, 16})), ShapeError);
}

TEST(Ssim, BoundedOnRandomInputs) {
  Rng rng(81);
  for (int trial = 0; trial < 20; ++trial) {
    auto av = seeded(rng.next_u64(), 144, 0, 1), bv = seeded(rng.next_u64(), 144, 0, 1);
    double s = ssim(Tensor<double>::from_data({1, 1, 12, 12}, av), Tensor<double>::from_data({1, 1, 12, 12}, bv)).item();
    EXPECT_LE(std::abs(s), 1.0);
  }
}

TEST(Backward, LinearAndClosedFormGradients) {
  auto xv = seeded(91, 6);
  auto w = Tensor<double>::from_data({1, 1, 2, 3}, seeded(92, 6), true);
  auto x = Tensor<double>::from_data({1, 1, 2, 3}, xv);
  backward(sum(elementwise_mul(w, x)));
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(w.grad()[i], xv[i]);

  auto tv = seeded(93, 6);
  auto w2 = Tensor<double>::from_data({1, 1, 2, 3}, seeded(94, 6), true);
  backward(mse_loss(w2, Tensor<double>::from_data({1, 1, 2, 3}, tv)));
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(w2.grad()[i], 2 * (w2.data()[i] - tv[i]) / 6, 1e-15);
}

TEST(Backward, AccumulatesWithoutResetAndRepeatsAfterReset) {
  auto w = Tensor<double>::from_data({1, 2, 3, 3}, seeded(101, 18), true);
  auto k = Tensor<double>::from_data({2, 2, 3, 3}, seeded(102, 36), true);
  auto loss_fn = [&] { return mse_loss(leaky_relu(conv2d(w, k, std::nullopt, 1, 1), 0.01), Tensor<double>({1, 2, 3, 3})); };
  backward(loss_fn());
  std::vector<double> first(k.grad().begin(), k.grad().end());
  backward(loss_fn());
  for (std::size_t i = 0; i < first.size(); ++i) EXPECT_NEAR(k.grad()[i], 2 * first[i], 1e-14);
  k.zero_grad();
  w.zero_grad();
  backward(loss_fn());
  for (std::size_t i = 0; i < first.size(); ++i) EXPECT_EQ(k.grad()[i], first[i]);
}

TEST(Backward, ReusedIntermediateReceivesBothContributions) {
  auto x = Tensor<double>::from_data({1, 1, 1, 2}, {0.5, -2.0}, true);
  auto y = elementwise_mul(x, x);
  backward(sum(add(y, y)));
  EXPECT_DOUBLE_EQ(x.grad()[0], 2.0);
  EXPECT_DOUBLE_EQ(x.grad()[1], -8.0);
}

TEST(Backward, RejectsNonScalarLoss) {
  auto x = Tensor<double>({1, 1, 2, 2}, 1.0, true);
  EXPECT_THROW(backward(affine(x, 2.0, 0.0)), ShapeError);
}

TEST(Backward, NoGradGuardSkipsRecording) {
  auto x = Tensor<double>({1, 1, 2, 2}, 1.0, true);
  NoGradGuard guard;
  auto y = sum(x);
  EXPECT_TRUE(y.is_leaf());
  EXPECT_FALSE(y.requires_grad());
}

TEST(Gradcheck, EveryRegisteredOpPasses) {
  for (const auto& op : gradcheck_registry()) {
    ASSERT_GE(op.cases.size(), 3u) << op.name;
    auto r = run_gradcheck(op);
    EXPECT_TRUE(r.passed) << op.name << " max rel error " << r.max_rel_error;
  }
}

TEST(Gradcheck, DetectsPerturbedBackwardRule) {
  // sin with a deliberately wrong derivative (missing factor 1.1).
  DiffFunction broken = [](const std::vector<Tensor<double>>& in) {
    Tensor<double> out(in[0].shape());
    for (std::size_t i = 0; i < out.size(); ++i) out.mutable_data()[i] = std::sin(in[0].data()[i]);
    auto node = in[0].node();
    detail::record(out, "broken_sin", {in[0]}, [node](const std::vector<double>& gy) {
      auto& d = node->grad_buffer();
      for (std::size_t i = 0; i < gy.size(); ++i) d[i] += 1.1 * gy[i] * std::cos(node->value[i]);
    });
    return out;
  };
  auto x = Tensor<double>::from_data({1, 1, 2, 3}, seeded(111, 6), true);
  EXPECT_GT(max_gradient_error(broken, {x}), 1e-2);
}

TEST(Determinism, ForwardIsBitwiseAcrossThreadCounts) {
  auto x = Tensor<float>::from_data({4, 3, 8, 8}, [] {
    auto v = seeded(121, 768);
    return std::vector<float>(v.begin(), v.end());
  }());
  auto w = Tensor<float>::from_data({5, 3, 3, 3}, [] {
    auto v = seeded(122, 135);
    return std::vector<float>(v.begin(), v.end());
  }());
  const std::size_t saved = max_threads();
  set_max_threads(1);
  auto a = conv2d(x, w, std::nullopt, 1, 1);
  auto a2 = conv2d(x, w, std::nullopt, 1, 1);
  set_max_threads(3);
  auto b = conv2d(x, w, std::nullopt, 1, 1);
  set_max_threads(saved);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.data()[i], a2.data()[i]);
    EXPECT_EQ(a.data()[i], b.data()[i]);
  }
}
