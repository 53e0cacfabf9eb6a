#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace holoforge {

enum class Preset { toy, paper };

inline std::string to_string(Preset p) { return p == Preset::toy ? "toy" : "paper"; }

inline Preset parse_preset(const std::string& name) {
  if (name == "toy") return Preset::toy;
  if (name == "paper") return Preset::paper;
  throw std::invalid_argument("unknown preset '" + name + "' (expected toy or paper)");
}

struct ArchConfig {
  Preset preset = Preset::toy;
  std::size_t input_size = 64;
  std::array<std::size_t, 6> encoder_channels{16, 32, 64, 128, 256, 368};
  std::size_t fusion_levels = 4;
  float leaky_slope = 0.01f;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;

  static ArchConfig toy() { return ArchConfig{}; }

  static ArchConfig paper() {
    ArchConfig c;
    c.preset = Preset::paper;
    c.input_size = 384;
    c.encoder_channels = {96, 192, 384, 768, 1536, 2208};
    return c;
  }

  static ArchConfig for_preset(Preset p) { return p == Preset::toy ? toy() : paper(); }

  void validate() const {
    if (input_size == 0 || input_size % 16 != 0)
      throw std::invalid_argument("input_size " + std::to_string(input_size) + " must be a positive multiple of 16");
    for (std::size_t i = 1; i < encoder_channels.size(); ++i)
      if (encoder_channels[i] <= encoder_channels[i - 1])
        throw std::invalid_argument("encoder_channels must be strictly increasing");
    if (fusion_levels != 4) throw std::invalid_argument("fusion_levels must be 4");
  }

  // Spatial size of encoder stage s (1-based): halved on stages 2..5.
  std::size_t encoder_size(std::size_t stage) const {
    std::size_t s = input_size;
    for (std::size_t k = 2; k <= std::min<std::size_t>(stage, 5); ++k) s /= 2;
    return s;
  }

  std::size_t channels(std::size_t stage) const { return encoder_channels.at(stage - 1); }
};

}  // namespace holoforge
