#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "holoforge/core/parallel.hpp"
#include "holoforge/core/random.hpp"
#include "holoforge/data/scene.hpp"
#include "holoforge/io/pfm.hpp"
#include "holoforge/io/png.hpp"

namespace holoforge::data {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline constexpr int kManifestVersion = 1;

enum class Split { train, val, test };

inline std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

inline Split parse_split(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw std::invalid_argument("unknown split '" + name + "' (expected train, val or test)");
}

struct SplitRatio {
  std::size_t train = 38, val = 1, test = 1;
  std::size_t total() const { return train + val + test; }
};

struct DatasetManifest {
  std::string root;
  int version = kManifestVersion;
  std::vector<std::string> ids;
  std::vector<Split> splits;  // parallel to ids
  SplitRatio ratio;
  std::uint64_t seed = 0;
  std::size_t size = 0;
  optics::PropagationParams optics;

  std::vector<std::string> ids_in(Split s) const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (splits[i] == s) out.push_back(ids[i]);
    return out;
  }

  void validate() const {
    if (ids.size() != splits.size()) throw std::invalid_argument("manifest: ids and split labels differ in length");
    std::set<std::string> seen;
    for (const auto& id : ids) {
      if (id.empty() || id.find('/') != std::string::npos || id == "." || id == "..")
        throw std::invalid_argument("manifest: invalid sample id '" + id + "'");
      if (!seen.insert(id).second) throw std::invalid_argument("manifest: duplicate id '" + id + "'");
    }
  }
};

inline json optics_to_json(const optics::PropagationParams& p) {
  return {{"wavelength", p.wavelength}, {"pitch", p.pitch}, {"n_layers", p.n_layers}, {"z_min", p.z_min},
          {"z_max", p.z_max}};
}

inline optics::PropagationParams optics_from_json(const json& j) {
  optics::PropagationParams p;
  p.wavelength = j.value("wavelength", p.wavelength);
  p.pitch = j.value("pitch", p.pitch);
  p.n_layers = j.value("n_layers", p.n_layers);
  p.z_min = j.value("z_min", p.z_min);
  p.z_max = j.value("z_max", p.z_max);
  p.validate();
  return p;
}

inline json to_json(const DatasetManifest& m) {
  json samples = json::array();
  for (std::size_t i = 0; i < m.ids.size(); ++i) samples.push_back({{"id", m.ids[i]}, {"split", to_string(m.splits[i])}});
  return {{"format_version", m.version},
          {"generation", {{"seed", m.seed}, {"size", m.size}, {"optics", optics_to_json(m.optics)}}},
          {"ratio", {m.ratio.train, m.ratio.val, m.ratio.test}},
          {"samples", samples}};
}

inline DatasetManifest manifest_from_json(const json& j, const std::string& root) {
  DatasetManifest m;
  m.root = root;
  m.version = j.at("format_version").get<int>();
  if (m.version != kManifestVersion)
    throw std::runtime_error("manifest: unsupported format_version " + std::to_string(m.version));
  const auto& gen = j.at("generation");
  m.seed = gen.value("seed", std::uint64_t{0});
  m.size = gen.value("size", std::size_t{0});
  m.optics = optics_from_json(gen.value("optics", json::object()));
  if (j.contains("ratio")) {
    const auto r = j.at("ratio").get<std::vector<std::size_t>>();
    if (r.size() != 3) throw std::runtime_error("manifest: ratio must have three entries");
    m.ratio = {r[0], r[1], r[2]};
  }
  for (const auto& s : j.at("samples")) {
    m.ids.push_back(s.at("id").get<std::string>());
    m.splits.push_back(parse_split(s.at("split").get<std::string>()));
  }
  m.validate();
  return m;
}

/// Seeded shuffle, then partition. Every class with a nonzero ratio gets at
/// least one id; val and test take floor(N * r / total) and the remainder
/// goes to train.
inline DatasetManifest make_splits(const std::vector<std::string>& ids, SplitRatio ratio, std::uint64_t seed) {
  if (ratio.total() == 0) throw std::invalid_argument("make_splits: ratio must not be all zero");
  const std::size_t classes = (ratio.train > 0) + (ratio.val > 0) + (ratio.test > 0);
  if (ids.size() < std::max<std::size_t>(classes, 3))
    throw std::invalid_argument("make_splits: need at least " + std::to_string(std::max<std::size_t>(classes, 3)) +
                                " ids, got " + std::to_string(ids.size()));
  const std::size_t n = ids.size();
  auto share = [&](std::size_t r) { return r == 0 ? 0 : std::max<std::size_t>(1, n * r / ratio.total()); };
  const std::size_t n_val = share(ratio.val), n_test = share(ratio.test);
  if (ratio.train > 0 && n_val + n_test >= n) throw std::invalid_argument("make_splits: too few ids for the ratio");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, 0x53504C4954ull));
  rng.shuffle(order);

  DatasetManifest m;
  m.ids = ids;
  m.splits.assign(n, Split::train);
  m.ratio = ratio;
  m.seed = seed;
  const std::size_t n_train = n - n_val - n_test;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = order[k];
    m.splits[i] = k < n_train ? Split::train : (k < n_train + n_val ? Split::val : Split::test);
  }
  m.validate();
  return m;
}

inline std::string sample_id(std::size_t index) {
  std::string digits = std::to_string(index);
  if (digits.size() < 5) digits.insert(0, 5 - digits.size(), '0');
  return "s" + digits;
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out << text;
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

inline json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path.string() + ": cannot open for reading");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path.string() + ": invalid JSON at byte " + std::to_string(e.byte) + ": " + e.what());
  }
}

/// Writes rgb.png, depth.pfm, amp.pfm, phase.pfm and meta.json under <root>/<id>.
inline void save_sample(const fs::path& root, const ImageSet& s) {
  s.validate();
  const fs::path dir = root / s.id;
  fs::create_directories(dir);
  io::save_png(s.rgb, (dir / "rgb.png").string());
  io::save_pfm(s.depth, (dir / "depth.pfm").string());
  io::save_pfm(s.amplitude, (dir / "amp.pfm").string());
  io::save_pfm(s.phase, (dir / "phase.pfm").string());
  write_text(dir / "meta.json", json{{"id", s.id}, {"scale", s.scale}, {"seed", s.seed}, {"size", s.size()}}.dump(2) + "\n");
}

/// Loads one sample and checks the ImageSet invariants. meta.json is
/// optional for externally supplied data (scale then defaults to 1).
inline ImageSet load_sample(const fs::path& root, const std::string& id) {
  const fs::path dir = root / id;
  ImageSet s;
  s.id = id;
  s.rgb = io::load_png((dir / "rgb.png").string(), 3);
  s.depth = io::load_pfm((dir / "depth.pfm").string());
  s.amplitude = io::load_pfm((dir / "amp.pfm").string());
  s.phase = io::load_pfm((dir / "phase.pfm").string());
  s.scale = 1.0;
  if (fs::exists(dir / "meta.json")) {
    const json meta = read_json(dir / "meta.json");
    s.scale = meta.value("scale", 1.0);
    s.seed = meta.value("seed", std::uint64_t{0});
  }
  s.validate();
  return s;
}

inline void save_manifest(const DatasetManifest& m) {
  fs::create_directories(m.root);
  write_text(fs::path(m.root) / "manifest.json", to_json(m).dump(2) + "\n");
}

inline DatasetManifest load_manifest(const fs::path& root) {
  return manifest_from_json(read_json(root / "manifest.json"), root.string());
}

struct GenerateOptions {
  std::size_t count = 40;
  std::uint64_t seed = 42;
  std::size_t size = 64;
  optics::PropagationParams optics;
  SplitRatio ratio;
};

/// Synthesizes `count` scenes (sample i uses derive_seed(seed, i)), writes
/// them in parallel and the manifest last.
inline DatasetManifest generate_dataset(const fs::path& root, const GenerateOptions& opt) {
  opt.optics.validate();
  std::vector<std::string> ids(opt.count);
  for (std::size_t i = 0; i < opt.count; ++i) ids[i] = sample_id(i);
  DatasetManifest m = make_splits(ids, opt.ratio, opt.seed);
  m.root = root.string();
  m.size = opt.size;
  m.optics = opt.optics;
  fs::create_directories(root);
  parallel_for(opt.count, [&](std::size_t i) {
    ImageSet s = synth_scene(derive_seed(opt.seed, i), opt.size, opt.optics);
    s.id = ids[i];
    save_sample(root, s);
  });
  save_manifest(m);
  return m;
}

/// Builds a manifest for an externally supplied directory of samples in the
/// same layout (one subdirectory per id holding the four images). Sample
/// sizes must agree.
inline DatasetManifest index_directory(const fs::path& root, SplitRatio ratio, std::uint64_t seed,
                                       const optics::PropagationParams& params = {}) {
  if (!fs::is_directory(root)) throw std::runtime_error(root.string() + ": not a directory");
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    const fs::path d = entry.path();
    if (fs::exists(d / "rgb.png") && fs::exists(d / "depth.pfm") && fs::exists(d / "amp.pfm") &&
        fs::exists(d / "phase.pfm"))
      ids.push_back(d.filename().string());
  }
  std::sort(ids.begin(), ids.end());
  if (ids.empty()) throw std::runtime_error(root.string() + ": no samples found");
  DatasetManifest m = make_splits(ids, ratio, seed);
  m.root = root.string();
  m.optics = params;
  m.size = load_sample(root, ids.front()).size();
  return m;
}

inline std::vector<ImageSet> load_split(const DatasetManifest& m, Split split) {
  const auto ids = m.ids_in(split);
  std::vector<ImageSet> out(ids.size());
  parallel_for(ids.size(), [&](std::size_t i) { out[i] = load_sample(m.root, ids[i]); });
  for (const auto& s : out)
    if (m.size != 0 && s.size() != m.size)
      throw std::runtime_error(s.id + ": size " + std::to_string(s.size()) + " differs from manifest size " +
                               std::to_string(m.size));
  return out;
}

}  // namespace holoforge::data
