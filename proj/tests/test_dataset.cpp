#include <gtest/gtest.h>

#include <fstream>

#include "holoforge/data/dataset.hpp"
#include "temp_dir.hpp"

using namespace holoforge;
using namespace holoforge::data;

namespace {

std::map<std::string, std::string> tree_bytes(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    out[fs::relative(e.path(), root).string()] = {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  }
  return out;
}

std::vector<std::string> make_ids(std::size_t n) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back(sample_id(i));
  return ids;
}

}  // namespace

TEST(SynthScene, SameSeedIsBitwiseIdentical) {
  optics::PropagationParams p;
  const auto a = synth_scene(5, 64, p), b = synth_scene(5, 64, p), c = synth_scene(6, 64, p);
  EXPECT_EQ(a.rgb, b.rgb);
  EXPECT_EQ(a.depth, b.depth);
  EXPECT_EQ(a.amplitude, b.amplitude);
  EXPECT_EQ(a.phase, b.phase);
  EXPECT_EQ(a.scale, b.scale);
  EXPECT_NE(a.rgb, c.rgb);
}

TEST(SynthScene, BackgroundConventionAndInvariants) {
  optics::PropagationParams p;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto s = synth_scene(seed, 64, p);
    s.id = "x";
    EXPECT_NO_THROW(s.validate());
    const Image lum = luminance(s.rgb);
    std::size_t lit = 0;
    for (std::size_t i = 0; i < lum.data.size(); ++i) {
      if (lum.data[i] == 0.0f) {
        EXPECT_EQ(s.depth.data[i], 1.0f);
      } else {
        ++lit;
        EXPECT_LT(s.depth.data[i], 1.0f);
        // Shapes sit exactly on a layer.
        EXPECT_FLOAT_EQ(s.depth.data[i] * 7.0f, std::round(s.depth.data[i] * 7.0f));
      }
    }
    EXPECT_GT(lit, 0u);
    for (float v : s.rgb.data) EXPECT_EQ(v, std::round(v * 255.0f) / 255.0f);
    EXPECT_GT(s.scale, 0.0);
  }
}

TEST(SynthScene, NearestShapeIsInFocus) {
  optics::PropagationParams p;
  for (std::uint64_t seed = 100; seed < 130; ++seed) {
    const auto s = synth_scene(seed, 64, p);
    const auto fc = sample_focus_check(s, p);
    EXPECT_GE(fc.contrast_db(), 3.0) << "seed " << seed;
  }
}

TEST(SynthScene, RejectsNonPowerOfTwo) {
  EXPECT_THROW(synth_scene(1, 48, {}), std::invalid_argument);
}

TEST(Splits, PaperAndToyProportions) {
  const auto big = make_splits(make_ids(4000), {}, 42);
  EXPECT_EQ(big.ids_in(Split::train).size(), 3800u);
  EXPECT_EQ(big.ids_in(Split::val).size(), 100u);
  EXPECT_EQ(big.ids_in(Split::test).size(), 100u);
  const auto small = make_splits(make_ids(40), {}, 42);
  EXPECT_EQ(small.ids_in(Split::train).size(), 38u);
  EXPECT_EQ(small.ids_in(Split::val).size(), 1u);
  EXPECT_EQ(small.ids_in(Split::test).size(), 1u);
  const auto tiny = make_splits(make_ids(3), {}, 42);
  EXPECT_EQ(tiny.ids_in(Split::train).size(), 1u);
}

TEST(Splits, DisjointExhaustiveAndSeeded) {
  for (std::size_t n : {3u, 10u, 41u, 97u}) {
    const auto ids = make_ids(n);
    const auto a = make_splits(ids, {}, 7), b = make_splits(ids, {}, 7), c = make_splits(ids, {}, 8);
    EXPECT_EQ(a.splits, b.splits);
    std::set<std::string> all;
    std::size_t total = 0;
    for (Split s : {Split::train, Split::val, Split::test}) {
      const auto part = a.ids_in(s);
      total += part.size();
      all.insert(part.begin(), part.end());
      EXPECT_EQ(part.size(), c.ids_in(s).size());
    }
    EXPECT_EQ(total, n);
    EXPECT_EQ(all.size(), n);
    if (n >= 10) EXPECT_NE(a.splits, c.splits) << n;
  }
}

TEST(Splits, RejectsTooFewIds) {
  EXPECT_THROW(make_splits(make_ids(2), {}, 1), std::invalid_argument);
  EXPECT_THROW(make_splits({}, {}, 1), std::invalid_argument);
  EXPECT_THROW(make_splits(make_ids(5), {0, 0, 0}, 1), std::invalid_argument);
}

TEST(Store, SampleRoundTripIsExact) {
  TempDir dir;
  optics::PropagationParams p;
  auto s = synth_scene(77, 32, p);
  s.id = "abc";
  save_sample(dir.path(), s);
  const auto back = load_sample(dir.path(), "abc");
  EXPECT_EQ(back.rgb, s.rgb);
  EXPECT_EQ(back.depth, s.depth);
  EXPECT_EQ(back.amplitude, s.amplitude);
  EXPECT_EQ(back.phase, s.phase);
  EXPECT_EQ(back.scale, s.scale);
  EXPECT_EQ(back.seed, s.seed);
}

TEST(Store, RejectsInvalidSampleOnLoad) {
  TempDir dir;
  auto s = synth_scene(3, 16, {});
  s.id = "bad";
  save_sample(dir.path(), s);
  Image broken = s.amplitude;
  broken.data[5] = 1.5f;
  io::save_pfm(broken, (dir.path() / "bad" / "amp.pfm").string());
  EXPECT_THROW(load_sample(dir.path(), "bad"), std::invalid_argument);
  io::save_pfm(Image(1, 8, 8), (dir.path() / "bad" / "amp.pfm").string());
  EXPECT_THROW(load_sample(dir.path(), "bad"), std::invalid_argument);
}

TEST(Store, GenerationIsByteReproducible) {
  TempDir a, b;
  GenerateOptions opt;
  opt.count = 6;
  opt.size = 32;
  opt.seed = 11;
  const auto fa = (a.path() / "ds"), fb = (b.path() / "ds");
  const auto ma = generate_dataset(fa, opt);
  generate_dataset(fb, opt);
  const auto ta = tree_bytes(fa), tb = tree_bytes(fb);
  EXPECT_EQ(ta.size(), 6u * 5u + 1u);
  EXPECT_EQ(ta, tb);

  const auto loaded = load_manifest(fa);
  EXPECT_EQ(loaded.ids, ma.ids);
  EXPECT_EQ(loaded.splits, ma.splits);
  EXPECT_EQ(loaded.size, 32u);
  EXPECT_EQ(loaded.seed, 11u);
  EXPECT_EQ(loaded.optics.z_max, opt.optics.z_max);
  const auto train = load_split(loaded, Split::train);
  EXPECT_EQ(train.size(), loaded.ids_in(Split::train).size());
  for (const auto& s : train) EXPECT_EQ(s.rgb, synth_scene(derive_seed(11, std::stoul(s.id.substr(1))), 32, {}).rgb);
}

TEST(Store, IndexesExternalLayout) {
  TempDir dir;
  for (std::size_t i = 0; i < 5; ++i) {
    auto s = synth_scene(i, 16, {});
    s.id = "ext_" + std::to_string(i);
    save_sample(dir.path(), s);
    if (i == 0) fs::remove(dir.path() / s.id / "meta.json");
  }
  fs::create_directories(dir.path() / "not_a_sample");
  const auto m = index_directory(dir.path(), {3, 1, 1}, 5);
  EXPECT_EQ(m.ids.size(), 5u);
  EXPECT_EQ(m.size, 16u);
  EXPECT_EQ(m.ids_in(Split::val).size(), 1u);
  EXPECT_EQ(load_sample(dir.path(), "ext_0").scale, 1.0);
}

TEST(Store, ManifestRejectsBadContent) {
  TempDir dir;
  write_text(dir.path() / "manifest.json", "{\"format_version\": 9, \"generation\": {}, \"samples\": []}");
  EXPECT_THROW(load_manifest(dir.path()), std::runtime_error);
  write_text(dir.path() / "manifest.json", "{ nope");
  EXPECT_THROW(load_manifest(dir.path()), std::runtime_error);
  write_text(dir.path() / "manifest.json",
             R"({"format_version": 1, "generation": {}, "samples": [{"id": "a", "split": "train"}, {"id": "a", "split": "val"}]})");
  EXPECT_THROW(load_manifest(dir.path()), std::invalid_argument);
}
