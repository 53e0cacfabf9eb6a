#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "holoforge/model/layers.hpp"

namespace holoforge::train {

/// First and second moments per parameter, keyed by position in the
/// parameter list they were created for.
template <class T>
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::string> names;
  std::vector<std::vector<T>> m, v;

  void init(const ParameterList<T>& params) {
    step = 0;
    names.clear();
    m.clear();
    v.clear();
    for (const auto& p : params) {
      names.push_back(p.name);
      m.emplace_back(p.tensor.size(), T(0));
      v.emplace_back(p.tensor.size(), T(0));
    }
  }

  void check(const ParameterList<T>& params) const {
    if (params.size() != names.size())
      throw std::invalid_argument("adam: state tracks " + std::to_string(names.size()) + " parameters, got " +
                                  std::to_string(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (params[i].name != names[i] || params[i].tensor.size() != m[i].size())
        throw std::invalid_argument("adam: parameter " + std::to_string(i) + " is " + params[i].name +
                                    ", state expects " + names[i]);
    }
  }
};

/// Bias-corrected Adam update in double arithmetic, stored back as T.
template <class T>
void adam_step(ParameterList<T>& params, AdamState<T>& state, double lr) {
  if (!(lr > 0)) throw std::invalid_argument("adam: learning rate must be positive");
  state.check(params);
  for (const auto& p : params)
    if (!p.tensor.has_grad()) throw std::invalid_argument("adam: missing gradient for " + p.name);
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto value = params[i].tensor.mutable_data();
    const auto grad = params[i].tensor.grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t k = 0; k < value.size(); ++k) {
      const double g = grad[k];
      const double mk = state.beta1 * m[k] + (1 - state.beta1) * g;
      const double vk = state.beta2 * v[k] + (1 - state.beta2) * g * g;
      m[k] = static_cast<T>(mk);
      v[k] = static_cast<T>(vk);
      value[k] = static_cast<T>(value[k] - lr * (mk / c1) / (std::sqrt(vk / c2) + state.eps));
    }
  }
}

}  // namespace holoforge::train
