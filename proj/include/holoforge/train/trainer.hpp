#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "holoforge/core/random.hpp"
#include "holoforge/data/scene.hpp"
#include "holoforge/metrics/metrics.hpp"
#include "holoforge/model/holonet.hpp"
#include "holoforge/train/adam.hpp"
#include "holoforge/train/losses.hpp"

namespace holoforge::train {

using json = nlohmann::json;

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 4;
  double learning_rate = 1e-4;
  std::uint64_t seed = 42;
  LossConfig loss;

  void validate() const {
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
    if (!(learning_rate > 0)) throw std::invalid_argument("learning rate must be > 0");
    loss.validate();
  }
};

struct History {
  int phase = 1;
  std::vector<double> step_loss;
  std::vector<double> epoch_loss;  // sample-weighted mean over each epoch

  json to_json() const { return {{"phase", phase}, {"epoch_loss", epoch_loss}, {"step_loss", step_loss}}; }
};

/// Everything needed to continue a run: completed epochs, optimizer state
/// and the loss history so far.
struct TrainProgress {
  std::size_t epoch = 0;
  AdamState<float> adam;
  History history;
};

using EpochCallback = std::function<void(const TrainProgress&)>;

// ---- Image <-> tensor plumbing ---------------------------------------------

inline Tensor<float> image_to_tensor(const Image& img) {
  return Tensor<float>::from_data({1, img.channels, img.height, img.width}, img.data);
}

/// Sample n of a batch tensor as an image.
inline Image tensor_to_image(const Tensor<float>& t, std::size_t n = 0) {
  const Shape& s = t.shape();
  Image img(s.c, s.h, s.w);
  const std::size_t per = s.c * s.h * s.w;
  std::copy_n(t.data().begin() + static_cast<std::ptrdiff_t>(n * per), per, img.data.begin());
  return img;
}

/// Stacks equally shaped single-sample tensors along the batch axis.
inline Tensor<float> stack(const std::vector<const Tensor<float>*>& parts) {
  const Shape& s = parts.front()->shape();
  std::vector<float> values;
  values.reserve(parts.size() * s.size());
  for (const auto* p : parts) {
    if (p->shape().c != s.c || p->shape().h != s.h || p->shape().w != s.w)
      throw ShapeError("stack: " + p->shape().str() + " does not match " + s.str());
    values.insert(values.end(), p->data().begin(), p->data().end());
  }
  return Tensor<float>::from_data({parts.size() * s.n, s.c, s.h, s.w}, std::move(values));
}

inline Tensor<float> stack_images(const std::vector<data::ImageSet>& samples, std::span<const std::size_t> idx,
                                  const Image data::ImageSet::*field) {
  const Image& first = samples[idx[0]].*field;
  std::vector<float> values;
  values.reserve(idx.size() * first.data.size());
  for (std::size_t i : idx) {
    const Image& img = samples[i].*field;
    if (!img.same_shape(first)) throw ShapeError("batch: sample " + samples[i].id + " has shape " + img.shape_str());
    values.insert(values.end(), img.data.begin(), img.data.end());
  }
  return Tensor<float>::from_data({idx.size(), first.channels, first.height, first.width}, std::move(values));
}

/// Seeded permutation of the training set for one epoch of one phase.
inline std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int phase, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(derive_seed(seed, static_cast<std::uint64_t>(phase)), epoch));
  rng.shuffle(order);
  return order;
}

namespace detail {

inline void zero_grads(ParameterList<float>& params) {
  for (auto& p : params) p.tensor.zero_grad();
}

// Runs the remaining epochs; `step` computes one batch loss, backpropagates
// it and returns its value.
inline void run_epochs(std::size_t n, const TrainConfig& cfg, int phase, ParameterList<float>& params,
                       TrainProgress& progress,
                       const std::function<double(std::span<const std::size_t>)>& step,
                       const EpochCallback& on_epoch) {
  if (progress.adam.names.empty()) progress.adam.init(params);
  progress.adam.check(params);
  progress.history.phase = phase;
  for (std::size_t epoch = progress.epoch; epoch < cfg.epochs; ++epoch) {
    const auto order = epoch_order(n, cfg.seed, phase, epoch);
    double weighted = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, n - start);
      const std::span<const std::size_t> idx(order.data() + start, count);
      zero_grads(params);
      const double loss = step(idx);
      adam_step(params, progress.adam, cfg.learning_rate);
      progress.history.step_loss.push_back(loss);
      weighted += loss * static_cast<double>(count);
    }
    progress.history.epoch_loss.push_back(weighted / static_cast<double>(n));
    progress.epoch = epoch + 1;
    if (on_epoch) on_epoch(progress);
  }
  zero_grads(params);
}

}  // namespace detail

/// Phase 1: fits encoder, decoder and depth head under loss_phase1. The
/// CGH module is neither run nor touched.
inline TrainProgress train_phase1(HoloNet<float>& model, const std::vector<data::ImageSet>& samples,
                                  const TrainConfig& cfg, TrainProgress progress = {},
                                  const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (samples.empty()) throw std::invalid_argument("train_phase1: training split is empty");
  model.set_trainable(true, false);
  model.set_mode(Mode::train, Mode::eval);
  auto params = model.depth_parameters();
  detail::run_epochs(samples.size(), cfg, 1, params, progress, [&](std::span<const std::size_t> idx) {
    const auto rgb = stack_images(samples, idx, &data::ImageSet::rgb);
    const auto depth = stack_images(samples, idx, &data::ImageSet::depth);
    const auto loss = loss_phase1(model.forward_depth(rgb), depth, cfg.loss);
    backward(loss);
    return static_cast<double>(loss.item());
  }, on_epoch);
  model.set_trainable(true, true);
  return progress;
}

/// Frozen depth-module features of one sample (levels 1-4).
struct DepthFeatures {
  std::vector<Tensor<float>> ef, df;
};

inline DepthFeatures depth_features(HoloNet<float>& model, const Image& rgb) {
  NoGradGuard guard;
  auto ef = model.encode(image_to_tensor(rgb));
  auto df = model.decode(ef).first;
  ef.resize(4);
  return {std::move(ef), std::move(df)};
}

/// Phase 2: the depth module is frozen (eval-mode batch norm, no gradient);
/// fusion blocks and both cascaded branches are fitted under loss_phase2.
/// Frozen features are computed once per sample for small sets.
inline TrainProgress train_phase2(HoloNet<float>& model, const std::vector<data::ImageSet>& samples,
                                  const TrainConfig& cfg, TrainProgress progress = {},
                                  const EpochCallback& on_epoch = {}, std::size_t cache_limit = 512) {
  cfg.validate();
  if (samples.empty()) throw std::invalid_argument("train_phase2: training split is empty");
  model.set_trainable(false, true);
  model.set_mode(Mode::eval, Mode::train);
  std::vector<DepthFeatures> cache;
  if (samples.size() <= cache_limit) {
    cache.resize(samples.size());
    parallel_for(samples.size(), [&](std::size_t i) { cache[i] = depth_features(model, samples[i].rgb); });
  }
  auto params = model.cgh_parameters();
  detail::run_epochs(samples.size(), cfg, 2, params, progress, [&](std::span<const std::size_t> idx) {
    const auto rgb = stack_images(samples, idx, &data::ImageSet::rgb);
    std::vector<DepthFeatures> fresh;
    if (cache.empty())
      for (std::size_t i : idx) fresh.push_back(depth_features(model, samples[i].rgb));
    std::vector<Tensor<float>> ff;
    for (std::size_t level = 0; level < 4; ++level) {
      std::vector<const Tensor<float>*> ef, df;
      for (std::size_t k = 0; k < idx.size(); ++k) {
        const DepthFeatures& f = cache.empty() ? fresh[k] : cache[idx[k]];
        ef.push_back(&f.ef[level]);
        df.push_back(&f.df[level]);
      }
      ff.push_back(model.fuse(level + 1, stack(ef), stack(df)));
    }
    auto [amp, phase] = model.generate_cgh(ff, rgb);
    const auto loss = loss_phase2(amp, phase, stack_images(samples, idx, &data::ImageSet::amplitude),
                                  stack_images(samples, idx, &data::ImageSet::phase), cfg.loss);
    backward(loss);
    return static_cast<double>(loss.item());
  }, on_epoch);
  model.set_trainable(true, true);
  return progress;
}

// ---- Inference and evaluation -----------------------------------------------

struct Prediction {
  Image depth, amplitude, phase;
};

/// Eval-mode forward pass for one RGB image; the model takes nothing else.
inline Prediction predict(HoloNet<float>& model, const Image& rgb) {
  NoGradGuard guard;
  model.set_mode(Mode::eval);
  const auto out = model.forward(image_to_tensor(rgb));
  return {tensor_to_image(out.depth), tensor_to_image(out.amplitude), tensor_to_image(out.phase)};
}

struct SeriesStats {
  double mean = 0;
  std::vector<double> per_sample;
  json to_json() const { return {{"mean", mean}, {"per_sample", per_sample}}; }
};

struct MetricsReport {
  std::string split;
  std::vector<std::string> ids;
  SeriesStats psnr_amp, ssim_amp, psnr_phase, ssim_phase;

  std::size_t n() const { return ids.size(); }

  json to_json() const {
    return {{"split", split},           {"n", n()},
            {"ids", ids},               {"psnr_amp", psnr_amp.to_json()},
            {"ssim_amp", ssim_amp.to_json()}, {"psnr_phase", psnr_phase.to_json()},
            {"ssim_phase", ssim_phase.to_json()}};
  }
};

inline void finish(SeriesStats& s) {
  double total = 0;
  for (double v : s.per_sample) total += v;
  s.mean = s.per_sample.empty() ? 0.0 : total / static_cast<double>(s.per_sample.size());
}

/// Scores predicted amplitude/phase maps against the ground truth.
inline MetricsReport score_predictions(const std::string& split, const std::vector<data::ImageSet>& truth,
                                       const std::vector<Prediction>& preds) {
  if (truth.empty()) throw std::invalid_argument("evaluate: split '" + split + "' is empty");
  if (truth.size() != preds.size()) throw std::invalid_argument("evaluate: prediction count mismatch");
  MetricsReport r;
  r.split = split;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    r.ids.push_back(truth[i].id);
    r.psnr_amp.per_sample.push_back(metrics::psnr(preds[i].amplitude, truth[i].amplitude));
    r.ssim_amp.per_sample.push_back(metrics::ssim_eval(preds[i].amplitude, truth[i].amplitude));
    r.psnr_phase.per_sample.push_back(metrics::psnr(preds[i].phase, truth[i].phase));
    r.ssim_phase.per_sample.push_back(metrics::ssim_eval(preds[i].phase, truth[i].phase));
  }
  for (auto* s : {&r.psnr_amp, &r.ssim_amp, &r.psnr_phase, &r.ssim_phase}) finish(*s);
  return r;
}

inline MetricsReport evaluate(HoloNet<float>& model, const std::vector<data::ImageSet>& samples,
                              const std::string& split) {
  if (samples.empty()) throw std::invalid_argument("evaluate: split '" + split + "' is empty");
  model.set_mode(Mode::eval);
  std::vector<Prediction> preds(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    NoGradGuard guard;
    const auto out = model.forward(image_to_tensor(samples[i].rgb));
    preds[i] = {tensor_to_image(out.depth), tensor_to_image(out.amplitude), tensor_to_image(out.phase)};
  });
  return score_predictions(split, samples, preds);
}

}  // namespace holoforge::train
