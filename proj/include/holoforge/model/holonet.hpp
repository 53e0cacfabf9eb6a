#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "holoforge/core/random.hpp"
#include "holoforge/model/config.hpp"
#include "holoforge/model/layers.hpp"
#include "holoforge/tensor/ops.hpp"

namespace holoforge {

/// Encoder maps Ef1..Ef6, decoder maps Df1..Df4 and fused maps Ff1..Ff4.
/// Index 0 holds level 1 in every list.
template <class T>
struct FeaturePyramid {
  std::vector<Tensor<T>> ef;
  std::vector<Tensor<T>> df;
  std::vector<Tensor<T>> ff;
};

template <class T>
struct ModelOutput {
  Tensor<T> depth;
  Tensor<T> amplitude;
  Tensor<T> phase;
};

/// Projection unit C_{n,m}: 1x1 conv followed by batch norm.
template <class T>
using Projection = ConvBn<T>;

/// Fuses Ef_n and Df_n:
///   Ff_n = Ef_n + C4(C1(Ef_n) * (C2(Df_n) * C3(Df_n)))
/// with * the elementwise product.
template <class T>
struct FusionBlock {
  std::size_t level = 1;
  std::array<Projection<T>, 4> c;

  FusionBlock() = default;
  FusionBlock(std::size_t level_, std::size_t enc_channels, std::size_t dec_channels, const ArchConfig& cfg)
      : level(level_) {
    c[0] = Projection<T>(enc_channels, enc_channels, 1, 1, false, T(cfg.leaky_slope), cfg.bn_momentum, cfg.bn_eps);
    c[1] = Projection<T>(dec_channels, enc_channels, 1, 1, false, T(cfg.leaky_slope), cfg.bn_momentum, cfg.bn_eps);
    c[2] = Projection<T>(dec_channels, enc_channels, 1, 1, false, T(cfg.leaky_slope), cfg.bn_momentum, cfg.bn_eps);
    c[3] = Projection<T>(enc_channels, enc_channels, 1, 1, false, T(cfg.leaky_slope), cfg.bn_momentum, cfg.bn_eps);
  }

  Tensor<T> operator()(const Tensor<T>& ef, const Tensor<T>& df) {
    const Shape& a = ef.shape();
    const Shape& b = df.shape();
    if (a.n != b.n || a.h != b.h || a.w != b.w) {
      throw ShapeError("fuse level " + std::to_string(level) + ": Ef " + a.str() + " and Df " + b.str() +
                       " differ in batch or spatial size");
    }
    Tensor<T> gate = elementwise_mul(c[1](df), c[2](df));
    return add(ef, c[3](elementwise_mul(c[0](ef), gate)));
  }

  void parameters(const std::string& prefix, ParameterList<T>& out) const {
    for (std::size_t m = 0; m < 4; ++m) c[m].parameters(prefix + ".c" + std::to_string(m + 1), out);
  }
  void buffers(const std::string& prefix, ParameterList<T>& out) const {
    for (std::size_t m = 0; m < 4; ++m) c[m].buffers(prefix + ".c" + std::to_string(m + 1), out);
  }
  void set_mode(Mode mode) {
    for (auto& p : c) p.bn.mode = mode;
  }
};

/// One cascaded block: conv3x3 + BN, 2x upsample, merge with the skip map,
/// then conv1x1 + LeakyReLU.
template <class T>
struct CascadeBlock {
  ConvBn<T> conv;
  Conv2d<T> point;
  T slope = T(0.01);

  CascadeBlock() = default;
  CascadeBlock(std::size_t c_in, std::size_t c_out, std::size_t skip_channels, const ArchConfig& cfg)
      : conv(c_in, c_out, 3, 1, false, T(cfg.leaky_slope), cfg.bn_momentum, cfg.bn_eps),
        point(c_out + skip_channels, c_out, 1),
        slope(T(cfg.leaky_slope)) {}

  Tensor<T> operator()(const Tensor<T>& x, const Tensor<T>& skip) {
    Tensor<T> up = bilinear_upsample2x(conv(x));
    return leaky_relu(point(concat_channels(up, skip)), slope);
  }

  void parameters(const std::string& prefix, ParameterList<T>& out) const {
    conv.parameters(prefix, out);
    point.parameters(prefix + ".point", out);
  }
  void buffers(const std::string& prefix, ParameterList<T>& out) const { conv.buffers(prefix, out); }
};

/// Three cascaded blocks (Ff4 -> Ff3 -> Ff2 -> Ff1 resolution) and a sigmoid
/// head over the full-resolution map concatenated with the RGB input.
template <class T>
struct CascadeBranch {
  std::array<CascadeBlock<T>, 3> blocks;
  Conv2d<T> head;

  CascadeBranch() = default;
  explicit CascadeBranch(const ArchConfig& cfg) {
    for (std::size_t k = 0; k < 3; ++k) {
      const std::size_t target = 3 - k;  // fused level merged by block k
      blocks[k] = CascadeBlock<T>(cfg.channels(target + 1), cfg.channels(target), cfg.channels(target), cfg);
    }
    head = Conv2d<T>(cfg.channels(1) + 3, 1, 1);
  }

  Tensor<T> operator()(const std::vector<Tensor<T>>& ff, const Tensor<T>& rgb,
                       std::vector<Tensor<T>>* trace = nullptr) {
    Tensor<T> x = ff[3];
    for (std::size_t k = 0; k < 3; ++k) {
      x = blocks[k](x, ff[2 - k]);
      if (trace) trace->push_back(x);
    }
    return sigmoid(head(concat_channels(x, rgb)));
  }

  void parameters(const std::string& prefix, ParameterList<T>& out) const {
    for (std::size_t k = 0; k < 3; ++k) blocks[k].parameters(prefix + ".block" + std::to_string(k + 1), out);
    head.parameters(prefix + ".head", out);
  }
  void buffers(const std::string& prefix, ParameterList<T>& out) const {
    for (std::size_t k = 0; k < 3; ++k) blocks[k].buffers(prefix + ".block" + std::to_string(k + 1), out);
  }
  void set_mode(Mode mode) {
    for (auto& b : blocks) b.conv.bn.mode = mode;
  }
};

/// RGB-only hologram network: an encoder-decoder that estimates depth and
/// exposes its latent maps, four fusion blocks, and two cascaded heads for
/// amplitude and phase.
template <class T>
class HoloNet {
 public:
  explicit HoloNet(ArchConfig cfg = ArchConfig::toy()) : cfg_(std::move(cfg)) {
    cfg_.validate();
    const T slope = T(cfg_.leaky_slope);
    for (std::size_t s = 1; s <= 6; ++s) {
      const std::size_t in = s == 1 ? 3 : cfg_.channels(s - 1);
      const std::size_t stride = (s >= 2 && s <= 5) ? 2 : 1;
      encoder_[s - 1] = {ConvBn<T>(in, cfg_.channels(s), 3, stride, true, slope, cfg_.bn_momentum, cfg_.bn_eps),
                         ConvBn<T>(cfg_.channels(s), cfg_.channels(s), 3, 1, true, slope, cfg_.bn_momentum,
                                   cfg_.bn_eps)};
    }
    for (std::size_t n = 1; n <= 4; ++n) {
      const std::size_t below = n == 4 ? cfg_.channels(6) : cfg_.channels(n + 1);
      decoder_[n - 1] =
          ConvBn<T>(below + cfg_.channels(n), cfg_.channels(n), 3, 1, true, slope, cfg_.bn_momentum, cfg_.bn_eps);
    }
    depth_head_ = Conv2d<T>(cfg_.channels(1), 1, 1);
    for (std::size_t n = 1; n <= 4; ++n) fusion_[n - 1] = FusionBlock<T>(n, cfg_.channels(n), cfg_.channels(n), cfg_);
    amplitude_ = CascadeBranch<T>(cfg_);
    phase_ = CascadeBranch<T>(cfg_);
  }

  const ArchConfig& config() const { return cfg_; }

  /// Six encoder maps. Stages 2-5 halve the resolution with a stride-2 conv.
  std::vector<Tensor<T>> encode(const Tensor<T>& rgb) {
    const Shape& s = rgb.shape();
    if (s.c != 3 || s.h != cfg_.input_size || s.w != cfg_.input_size) {
      throw ShapeError("encode: expected input (n, 3, " + std::to_string(cfg_.input_size) + ", " +
                       std::to_string(cfg_.input_size) + "), got " + s.str());
    }
    std::vector<Tensor<T>> ef;
    Tensor<T> x = rgb;
    for (auto& stage : encoder_) {
      x = stage.second(stage.first(x));
      ef.push_back(x);
    }
    return ef;
  }

  /// Decoder maps Df1..Df4 and the sigmoid depth map. Each step upsamples the
  /// map from below, concatenates Ef_n, and applies conv3x3 + BN + LeakyReLU.
  std::pair<std::vector<Tensor<T>>, Tensor<T>> decode(const std::vector<Tensor<T>>& ef) {
    if (ef.size() != 6) throw ShapeError("decode: expected 6 encoder maps, got " + std::to_string(ef.size()));
    std::vector<Tensor<T>> df(4);
    Tensor<T> below = ef[5];
    for (std::size_t n = 4; n >= 1; --n) {
      const Tensor<T>& skip = ef[n - 1];
      Tensor<T> up = bilinear_upsample2x(below);
      if (up.shape().h != skip.shape().h || up.shape().w != skip.shape().w) {
        throw ShapeError("decode step " + std::to_string(n) + ": upsampled map " + up.shape().str() +
                         " does not match Ef" + std::to_string(n) + " " + skip.shape().str());
      }
      df[n - 1] = decoder_[n - 1](concat_channels(up, skip));
      below = df[n - 1];
    }
    Tensor<T> depth = sigmoid(depth_head_(df[0]));
    return {std::move(df), std::move(depth)};
  }

  Tensor<T> fuse(std::size_t level, const Tensor<T>& ef, const Tensor<T>& df) {
    return fusion_.at(level - 1)(ef, df);
  }

  std::pair<Tensor<T>, Tensor<T>> generate_cgh(const std::vector<Tensor<T>>& ff, const Tensor<T>& rgb) {
    if (ff.size() != 4) throw ShapeError("generate_cgh: expected 4 fused maps, got " + std::to_string(ff.size()));
    const Shape& top = ff[0].shape();
    const Shape& s = rgb.shape();
    if (s.c != 3 || s.n != top.n || s.h != top.h || s.w != top.w) {
      throw ShapeError("generate_cgh: rgb " + s.str() + " does not match Ff1 resolution " + top.str());
    }
    return {amplitude_(ff, rgb), phase_(ff, rgb)};
  }

  /// Full pipeline. The pyramid, when requested, receives every latent map.
  ModelOutput<T> forward(const Tensor<T>& rgb, FeaturePyramid<T>* pyramid = nullptr) {
    auto ef = encode(rgb);
    auto [df, depth] = decode(ef);
    std::vector<Tensor<T>> ff;
    for (std::size_t n = 1; n <= 4; ++n) ff.push_back(fuse(n, ef[n - 1], df[n - 1]));
    auto [amp, phase] = generate_cgh(ff, rgb);
    if (pyramid) *pyramid = {ef, df, ff};
    return {depth, amp, phase};
  }

  /// Depth-module forward only (phase-1 training and depth inference).
  Tensor<T> forward_depth(const Tensor<T>& rgb) { return decode(encode(rgb)).second; }

  // Parameter groups in a fixed order: depth module first, then CGH module.
  ParameterList<T> depth_parameters() const {
    ParameterList<T> out;
    for (std::size_t s = 0; s < 6; ++s) {
      const std::string p = "encoder.stage" + std::to_string(s + 1);
      encoder_[s].first.parameters(p + ".a", out);
      encoder_[s].second.parameters(p + ".b", out);
    }
    for (std::size_t n = 4; n >= 1; --n) decoder_[n - 1].parameters("decoder.step" + std::to_string(n), out);
    depth_head_.parameters("depth_head", out);
    return out;
  }

  ParameterList<T> cgh_parameters() const {
    ParameterList<T> out;
    for (std::size_t n = 1; n <= 4; ++n) fusion_[n - 1].parameters("fusion.level" + std::to_string(n), out);
    amplitude_.parameters("amplitude", out);
    phase_.parameters("phase", out);
    return out;
  }

  ParameterList<T> amplitude_parameters() const {
    ParameterList<T> out;
    amplitude_.parameters("amplitude", out);
    return out;
  }

  ParameterList<T> phase_parameters() const {
    ParameterList<T> out;
    phase_.parameters("phase", out);
    return out;
  }

  ParameterList<T> parameters() const {
    auto out = depth_parameters();
    auto cgh = cgh_parameters();
    out.insert(out.end(), cgh.begin(), cgh.end());
    return out;
  }

  /// Batch-norm running statistics, same ordering rules as parameters().
  ParameterList<T> buffers() const {
    ParameterList<T> out;
    for (std::size_t s = 0; s < 6; ++s) {
      const std::string p = "encoder.stage" + std::to_string(s + 1);
      encoder_[s].first.buffers(p + ".a", out);
      encoder_[s].second.buffers(p + ".b", out);
    }
    for (std::size_t n = 4; n >= 1; --n) decoder_[n - 1].buffers("decoder.step" + std::to_string(n), out);
    for (std::size_t n = 1; n <= 4; ++n) fusion_[n - 1].buffers("fusion.level" + std::to_string(n), out);
    amplitude_.buffers("amplitude", out);
    phase_.buffers("phase", out);
    return out;
  }

  /// Parameters followed by buffers; the checkpoint payload.
  ParameterList<T> state() const {
    auto out = parameters();
    auto b = buffers();
    out.insert(out.end(), b.begin(), b.end());
    return out;
  }

  void set_mode(Mode depth_module, Mode cgh_module) {
    for (auto& stage : encoder_) {
      stage.first.bn.mode = depth_module;
      stage.second.bn.mode = depth_module;
    }
    for (auto& d : decoder_) d.bn.mode = depth_module;
    for (auto& f : fusion_) f.set_mode(cgh_module);
    amplitude_.set_mode(cgh_module);
    phase_.set_mode(cgh_module);
  }
  void set_mode(Mode mode) { set_mode(mode, mode); }

  void set_trainable(bool depth_module, bool cgh_module) {
    for (auto& p : depth_parameters()) p.tensor.set_requires_grad(depth_module);
    for (auto& p : cgh_parameters()) p.tensor.set_requires_grad(cgh_module);
  }

  /// He-normal conv weights, zero biases and beta, unit gamma, reset running
  /// statistics. Draws follow parameter order from one seeded stream.
  void init_weights(std::uint64_t seed) {
    Rng rng(seed);
    for (auto& stage : encoder_) {
      stage.first.reset(rng);
      stage.second.reset(rng);
    }
    for (std::size_t n = 4; n >= 1; --n) decoder_[n - 1].reset(rng);
    depth_head_.reset(rng);
    for (auto& f : fusion_)
      for (auto& p : f.c) p.reset(rng);
    for (auto* branch : {&amplitude_, &phase_}) {
      for (auto& b : branch->blocks) {
        b.conv.reset(rng);
        b.point.reset(rng);
      }
      branch->head.reset(rng);
    }
  }

  FusionBlock<T>& fusion_block(std::size_t level) { return fusion_.at(level - 1); }

 private:
  ArchConfig cfg_;
  std::array<std::pair<ConvBn<T>, ConvBn<T>>, 6> encoder_;
  std::array<ConvBn<T>, 4> decoder_;
  Conv2d<T> depth_head_;
  std::array<FusionBlock<T>, 4> fusion_;
  CascadeBranch<T> amplitude_;
  CascadeBranch<T> phase_;
};

/// Expected spatial sizes for every level of a preset, derived from the
/// stage plan without running the network.
struct ShapeLedger {
  std::array<std::size_t, 6> ef_size{}, ef_channels{};
  std::array<std::size_t, 4> df_size{}, df_channels{};
  std::array<std::size_t, 3> cascade_size{};
  std::size_t head_size = 0;
};

inline ShapeLedger shape_ledger(const ArchConfig& cfg) {
  ShapeLedger l;
  for (std::size_t s = 1; s <= 6; ++s) {
    l.ef_size[s - 1] = cfg.encoder_size(s);
    l.ef_channels[s - 1] = cfg.channels(s);
  }
  for (std::size_t n = 1; n <= 4; ++n) {
    l.df_size[n - 1] = l.ef_size[n - 1];
    l.df_channels[n - 1] = cfg.channels(n);
  }
  for (std::size_t k = 0; k < 3; ++k) l.cascade_size[k] = l.ef_size[2 - k];
  l.head_size = cfg.input_size;
  return l;
}

}  // namespace holoforge
