// Small end-to-end tour of the library: synthesize scenes, train both phases
// of the toy network briefly, predict a hologram from RGB alone, and refocus it.
//
//   walkthrough [OUT_DIR]     (default: ./walkthrough_out)

#include <filesystem>
#include <iomanip>
#include <iostream>

#include "holoforge/data/dataset.hpp"
#include "holoforge/io/pfm.hpp"
#include "holoforge/io/png.hpp"
#include "holoforge/optics/hologram.hpp"
#include "holoforge/train/trainer.hpp"

using namespace holoforge;
namespace fs = std::filesystem;

int main(int argc, char** argv) {
  const fs::path out = argc > 1 ? fs::path(argv[1]) : fs::path("walkthrough_out");
  fs::create_directories(out);

  data::GenerateOptions gen;
  gen.count = 8;
  gen.size = 32;
  gen.seed = 7;
  const auto manifest = data::generate_dataset(out / "data", gen);
  const auto train_set = data::load_split(manifest, data::Split::train);
  std::cout << "synthesized " << manifest.ids.size() << " scenes, " << train_set.size() << " for training\n";

  const auto& first = train_set.front();
  const auto focus = data::sample_focus_check(first, manifest.optics);
  std::cout << std::fixed << std::setprecision(2) << "ground truth " << first.id << ": layer " << focus.layer
            << " in focus " << focus.in_focus_db << " dB, defocused " << focus.defocused_db << " dB\n";

  ArchConfig arch = ArchConfig::toy();
  arch.input_size = gen.size;
  HoloNet<float> model(arch);
  model.init_weights(gen.seed);

  train::TrainConfig cfg;
  cfg.epochs = 30;
  cfg.batch_size = 4;
  cfg.learning_rate = 3e-3;
  auto report = [](const char* phase) {
    return [phase](const train::TrainProgress& p) {
      if (p.epoch % 10 == 0) std::cout << "  " << phase << " epoch " << p.epoch << " loss " << std::setprecision(5)
                                       << p.history.epoch_loss.back() << "\n";
    };
  };
  std::cout << "phase 1 (depth module)\n";
  train::train_phase1(model, train_set, cfg, {}, report("depth"));
  std::cout << "phase 2 (CGH module)\n";
  train::train_phase2(model, train_set, cfg, {}, report("cgh"));

  const auto pred = train::predict(model, first.rgb);
  io::save_png(first.rgb, (out / "rgb.png").string());
  io::save_png(pred.depth, (out / "depth.png").string());
  io::save_png(pred.amplitude, (out / "amp.png").string());
  io::save_png(pred.phase, (out / "phase.png").string());
  io::save_pfm(pred.amplitude, (out / "amp.pfm").string());
  io::save_pfm(pred.phase, (out / "phase.pfm").string());

  const auto scores = train::evaluate(model, train_set, "train");
  std::cout << std::setprecision(2) << "train amplitude PSNR " << scores.psnr_amp.mean << " dB, SSIM "
            << std::setprecision(3) << scores.ssim_amp.mean << "\n";

  for (std::size_t layer = 0; layer < manifest.optics.n_layers; layer += 3) {
    const double z = manifest.optics.layer_z(layer);
    const Image focal = optics::reconstruct(pred.amplitude, pred.phase, first.scale, z, manifest.optics);
    const std::string name = "focal_layer" + std::to_string(layer) + ".png";
    io::save_png(focal, (out / name).string());
    std::cout << "refocused at " << std::setprecision(3) << z * 1e3 << " mm -> " << name << "\n";
  }
  std::cout << "outputs in " << fs::absolute(out).string() << "\n";
}
