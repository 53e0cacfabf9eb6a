#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "holoforge/core/parallel.hpp"
#include "holoforge/data/dataset.hpp"
#include "holoforge/io/pfm.hpp"
#include "holoforge/io/png.hpp"
#include "holoforge/optics/hologram.hpp"
#include "holoforge/tensor/gradcheck.hpp"
#include "holoforge/train/checkpoint.hpp"
#include "holoforge/train/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace holoforge;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

// Failure in the inputs a user supplied, reported with exit code 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::uint64_t seed = 42;
  std::string config;
  std::size_t workers = 1;
  bool quiet = false;
  json overrides = json::object();
};

// Caps data-level parallelism (synthesis, sample loading) at --workers for
// the lifetime of the guard.
class WorkerScope {
 public:
  explicit WorkerScope(std::size_t workers) : saved_(max_threads()) { set_max_threads(std::min(saved_, workers)); }
  ~WorkerScope() { set_max_threads(saved_); }
  WorkerScope(const WorkerScope&) = delete;
  WorkerScope& operator=(const WorkerScope&) = delete;

 private:
  std::size_t saved_;
};

std::vector<data::ImageSet> load_split_with(const Globals& g, const data::DatasetManifest& m, data::Split split) {
  WorkerScope scope(g.workers);
  return data::load_split(m, split);
}

void log_line(const Globals& g, const std::string& line) {
  if (!g.quiet) std::cout << line << std::endl;
}

std::string fmt(double v, int precision = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, v);
  return buf;
}

// Values from --config fill every option that was not given on the command
// line. Keys are option names without leading dashes.
template <class T>
void overlay(const CLI::App* cmd, const json& cfg, const std::string& key, T& target) {
  if (!cfg.contains(key)) return;
  if (cmd->get_option("--" + key)->count() > 0) return;
  try {
    target = cfg.at(key).get<T>();
  } catch (const json::exception& e) {
    throw UsageError("config key '" + key + "': " + e.what());
  }
}

// ---- dataset synth ------------------------------------------------------------

struct SynthArgs {
  std::string out;
  std::size_t n = 40;
  std::size_t size = 64;
  double wavelength = 520e-9, pitch = 8e-6, z_min = 0.0, z_max = 1.5e-3;
  std::size_t layers = 8;
};

optics::PropagationParams optics_of(const SynthArgs& a) {
  optics::PropagationParams p;
  p.wavelength = a.wavelength;
  p.pitch = a.pitch;
  p.n_layers = a.layers;
  p.z_min = a.z_min;
  p.z_max = a.z_max;
  return p;
}

int run_synth(const Globals& g, const SynthArgs& a) {
  if (a.size == 0 || (a.size & (a.size - 1)) != 0)
    throw UsageError("--size " + std::to_string(a.size) + " is not a power of two");
  if (a.n < 3) throw UsageError("--n must be at least 3 to form train/val/test splits");
  data::GenerateOptions opt;
  opt.count = a.n;
  opt.seed = g.seed;
  opt.size = a.size;
  opt.optics = optics_of(a);
  try {
    opt.optics.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const auto m = [&] {
    WorkerScope scope(g.workers);
    return data::generate_dataset(a.out, opt);
  }();
  log_line(g, "dataset: " + std::to_string(m.ids.size()) + " samples of " + std::to_string(a.size) + "x" +
                  std::to_string(a.size) + " in " + a.out + " (train " +
                  std::to_string(m.ids_in(data::Split::train).size()) + ", val " +
                  std::to_string(m.ids_in(data::Split::val).size()) + ", test " +
                  std::to_string(m.ids_in(data::Split::test).size()) + ")");
  return 0;
}

// ---- model/checkpoint helpers --------------------------------------------------

HoloNet<float> model_for(Preset preset, std::size_t input_size) {
  ArchConfig cfg = ArchConfig::for_preset(preset);
  if (preset == Preset::paper && input_size != cfg.input_size)
    throw UsageError("paper preset expects " + std::to_string(cfg.input_size) + "x" +
                     std::to_string(cfg.input_size) + " samples, dataset has " + std::to_string(input_size));
  cfg.input_size = input_size;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return HoloNet<float>(cfg);
}

struct LoadedModel {
  HoloNet<float> model;
  train::Checkpoint ckpt;
};

LoadedModel load_model(const std::string& path) {
  if (!fs::exists(path)) throw UsageError("checkpoint " + path + " does not exist");
  auto ckpt = train::read_checkpoint(path);
  const auto preset = parse_preset(ckpt.meta.value("preset", std::string("toy")));
  const std::size_t size = ckpt.meta.value("input_size", ArchConfig::for_preset(preset).input_size);
  auto model = model_for(preset, size);
  train::apply_checkpoint(ckpt, model);
  return {std::move(model), std::move(ckpt)};
}

// ---- train -------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string phase = "both";
  std::size_t epochs = 20;
  std::size_t batch = 4;
  double lr = 1e-4;
  std::string preset = "toy";
  std::string ckpt_out = "checkpoints";
  std::string init;
  std::string resume;
  std::size_t save_every = 1;
};

std::string epoch_file(int phase, std::size_t epoch) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "phase%d_epoch%03zu.ckpt", phase, epoch);
  return buf;
}

json history_json(const train::History& h) {
  json j = h.to_json();
  if (!h.epoch_loss.empty()) {
    j["initial_loss"] = h.epoch_loss.front();
    j["final_loss"] = h.epoch_loss.back();
    j["final_over_initial"] = h.epoch_loss.front() > 0 ? h.epoch_loss.back() / h.epoch_loss.front() : 0.0;
  }
  return j;
}

train::History history_from_json(const json& j) {
  train::History h;
  h.phase = j.value("phase", 1);
  h.epoch_loss = j.value("epoch_loss", std::vector<double>{});
  h.step_loss = j.value("step_loss", std::vector<double>{});
  return h;
}

int run_train_phase(const Globals& g, const TrainArgs& a, int phase, HoloNet<float>& model,
                    const std::vector<data::ImageSet>& samples, train::TrainProgress progress,
                    std::size_t input_size) {
  train::TrainConfig cfg;
  cfg.epochs = a.epochs;
  cfg.batch_size = a.batch;
  cfg.learning_rate = a.lr;
  cfg.seed = g.seed;
  const fs::path out(a.ckpt_out);
  fs::create_directories(out);
  auto meta_base = json{{"phase", phase},
                        {"epochs", a.epochs},
                        {"batch", a.batch},
                        {"lr", a.lr},
                        {"seed", g.seed},
                        {"input_size", input_size},
                        {"data", a.data}};
  auto on_epoch = [&](const train::TrainProgress& p) {
    if (a.save_every > 0 && (p.epoch % a.save_every == 0 || p.epoch == a.epochs)) {
      json meta = meta_base;
      meta["epoch"] = p.epoch;
      meta["history"] = p.history.to_json();
      train::write_checkpoint((out / epoch_file(phase, p.epoch)).string(),
                              train::make_checkpoint(model, meta, &p.adam));
    }
    log_line(g, "phase " + std::to_string(phase) + " epoch " + std::to_string(p.epoch) + "/" +
                    std::to_string(a.epochs) + " loss " + fmt(p.history.epoch_loss.back()));
  };
  const auto done = phase == 1 ? train::train_phase1(model, samples, cfg, std::move(progress), on_epoch)
                               : train::train_phase2(model, samples, cfg, std::move(progress), on_epoch);
  json meta = meta_base;
  meta["epoch"] = done.epoch;
  meta["history"] = done.history.to_json();
  const std::string final_path = (out / ("phase" + std::to_string(phase) + ".ckpt")).string();
  train::write_checkpoint(final_path, train::make_checkpoint(model, meta));
  data::write_text(out / ("history_phase" + std::to_string(phase) + ".json"), history_json(done.history).dump(2) + "\n");
  log_line(g, "phase " + std::to_string(phase) + " done: " + final_path);
  return 0;
}

int run_train(const Globals& g, const TrainArgs& a) {
  if (a.phase != "1" && a.phase != "2" && a.phase != "both")
    throw UsageError("--phase must be 1, 2 or both, got '" + a.phase + "'");
  if (a.epochs < 1) throw UsageError("--epochs must be >= 1");
  if (a.batch < 1) throw UsageError("--batch must be >= 1");
  if (!(a.lr > 0)) throw UsageError("--lr must be > 0");
  const Preset preset = [&] {
    try {
      return parse_preset(a.preset);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }();
  if (a.phase == "2" && a.init.empty() && a.resume.empty())
    throw UsageError("--phase 2 requires --init <phase-1 checkpoint> (or --resume)");
  if (!fs::exists(fs::path(a.data) / "manifest.json")) throw UsageError("no manifest.json under " + a.data);

  const auto manifest = data::load_manifest(a.data);
  const auto samples = load_split_with(g, manifest, data::Split::train);
  if (samples.empty()) throw UsageError("training split of " + a.data + " is empty");
  const std::size_t size = samples.front().size();
  log_line(g, "train: " + std::to_string(samples.size()) + " samples, preset " + a.preset + ", epochs " +
                  std::to_string(a.epochs) + ", batch " + std::to_string(a.batch) + ", lr " + fmt(a.lr));

  if (!a.resume.empty()) {
    auto loaded = load_model(a.resume);
    const int phase = loaded.ckpt.meta.value("phase", 1);
    if (a.phase != "both" && std::to_string(phase) != a.phase)
      throw UsageError("--resume checkpoint is from phase " + std::to_string(phase) + ", --phase is " + a.phase);
    train::TrainProgress progress;
    progress.epoch = loaded.ckpt.meta.value("epoch", std::size_t{0});
    progress.history = history_from_json(loaded.ckpt.meta.value("history", json::object()));
    const auto params = phase == 1 ? loaded.model.depth_parameters() : loaded.model.cgh_parameters();
    if (!train::restore_adam(loaded.ckpt, params, progress.adam))
      throw UsageError("--resume checkpoint carries no optimizer state for phase " + std::to_string(phase));
    run_train_phase(g, a, phase, loaded.model, samples, std::move(progress), size);
    if (phase == 1 && a.phase == "both") {
      auto chained = load_model((fs::path(a.ckpt_out) / "phase1.ckpt").string());
      return run_train_phase(g, a, 2, chained.model, samples, {}, size);
    }
    return 0;
  }

  if (a.phase == "1" || a.phase == "both") {
    auto model = model_for(preset, size);
    model.init_weights(g.seed);
    run_train_phase(g, a, 1, model, samples, {}, size);
    if (a.phase == "1") return 0;
  }
  const std::string init = a.phase == "both" ? (fs::path(a.ckpt_out) / "phase1.ckpt").string() : a.init;
  auto loaded = load_model(init);
  if (loaded.model.config().preset != preset) throw UsageError("--init checkpoint preset differs from --preset");
  if (loaded.model.config().input_size != size)
    throw UsageError("--init checkpoint expects " + std::to_string(loaded.model.config().input_size) +
                     "x" + std::to_string(loaded.model.config().input_size) + " inputs, dataset has " +
                     std::to_string(size));
  return run_train_phase(g, a, 2, loaded.model, samples, {}, size);
}

// ---- infer -------------------------------------------------------------------

struct InferArgs {
  std::string ckpt, rgb, out;
};

int run_infer(const Globals& g, const InferArgs& a) {
  auto loaded = load_model(a.ckpt);
  if (!fs::exists(a.rgb)) throw UsageError("RGB image " + a.rgb + " does not exist");
  const Image rgb = io::load_png(a.rgb, 3);
  const std::size_t s = loaded.model.config().input_size;
  if (rgb.height != s || rgb.width != s)
    throw UsageError("RGB image is " + std::to_string(rgb.width) + "x" + std::to_string(rgb.height) +
                     ", checkpoint expects 3x" + std::to_string(s) + "x" + std::to_string(s));
  const auto pred = train::predict(loaded.model, rgb);
  const fs::path out(a.out);
  fs::create_directories(out);
  const std::vector<std::pair<std::string, const Image*>> maps = {
      {"depth", &pred.depth}, {"amp", &pred.amplitude}, {"phase", &pred.phase}};
  for (const auto& [name, img] : maps) {
    io::save_pfm(*img, (out / (name + ".pfm")).string());
    io::save_png(*img, (out / (name + ".png")).string());
  }
  log_line(g, "infer: wrote depth, amp and phase to " + a.out);
  return 0;
}

// ---- reconstruct -------------------------------------------------------------

struct ReconstructArgs {
  std::string amp, phase, out;
  double scale = 1.0;
  std::vector<double> z;
  double wavelength = 520e-9, pitch = 8e-6;
};

int run_reconstruct(const Globals& g, const ReconstructArgs& a) {
  if (a.z.empty()) throw UsageError("at least one --z is required");
  if (!(a.scale >= 0)) throw UsageError("--scale must be >= 0");
  for (const auto& p : {a.amp, a.phase})
    if (!fs::exists(p)) throw UsageError(p + " does not exist");
  const Image amp = io::load_pfm(a.amp), phase = io::load_pfm(a.phase);
  if (!amp.same_shape(phase))
    throw UsageError("amplitude " + amp.shape_str() + " and phase " + phase.shape_str() + " differ in size");
  optics::PropagationParams params;
  params.wavelength = a.wavelength;
  params.pitch = a.pitch;
  const fs::path out(a.out);
  fs::create_directories(out);
  json index = json::array();
  for (std::size_t k = 0; k < a.z.size(); ++k) {
    const Image focal = optics::reconstruct(amp, phase, a.scale, a.z[k], params);
    const auto physical = optics::physical_intensity(amp, phase, a.scale, a.z[k], params);
    const double peak = physical.empty() ? 0.0 : *std::max_element(physical.begin(), physical.end());
    const std::string stem = "focal_" + std::to_string(k);
    io::save_pfm(focal, (out / (stem + ".pfm")).string());
    io::save_png(focal, (out / (stem + ".png")).string());
    index.push_back({{"file", stem + ".pfm"}, {"preview", stem + ".png"}, {"z", a.z[k]}, {"peak_intensity", peak}});
  }
  data::write_text(out / "focal_stack.json", index.dump(2) + "\n");
  log_line(g, "reconstruct: " + std::to_string(a.z.size()) + " focal image(s) in " + a.out);
  return 0;
}

// ---- evaluate ----------------------------------------------------------------

struct EvaluateArgs {
  std::string ckpt, data, split = "test", out;
};

int run_evaluate(const Globals& g, const EvaluateArgs& a) {
  const auto split = [&] {
    try {
      return data::parse_split(a.split);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }();
  auto loaded = load_model(a.ckpt);
  if (!fs::exists(fs::path(a.data) / "manifest.json")) throw UsageError("no manifest.json under " + a.data);
  const auto samples = load_split_with(g, data::load_manifest(a.data), split);
  if (samples.empty()) throw UsageError("split '" + a.split + "' of " + a.data + " is empty");
  const auto report = train::evaluate(loaded.model, samples, a.split);
  const std::string text = report.to_json().dump(2) + "\n";
  if (a.out.empty()) {
    std::cout << text;
  } else {
    data::write_text(a.out, text);
    log_line(g, "evaluate: " + a.split + " n=" + std::to_string(report.n()) + " psnr_amp " +
                    fmt(report.psnr_amp.mean, 4) + " ssim_amp " + fmt(report.ssim_amp.mean, 4) + " -> " + a.out);
  }
  return 0;
}

// ---- gradcheck ---------------------------------------------------------------

struct GradcheckArgs {
  std::string ops = "all";
  int precision = 64;
};

int run_gradcheck(const Globals& g, const GradcheckArgs& a) {
  if (a.precision != 64) throw UsageError("--precision supports only 64");
  auto registry = gradcheck_registry(g.seed);
  std::vector<OpGradcheck> selected;
  for (auto& op : registry)
    if (a.ops == "all" || a.ops == op.name) selected.push_back(op);
  if (selected.empty()) {
    std::string names;
    for (const auto& op : registry) names += (names.empty() ? "" : ", ") + op.name;
    throw UsageError("unknown op '" + a.ops + "' (known: " + names + ")");
  }
  bool ok = true;
  std::printf("%-18s %6s %14s  %s\n", "op", "cases", "max_rel_err", "result");
  for (const auto& op : selected) {
    const auto r = run_gradcheck(op);
    ok = ok && r.passed;
    std::printf("%-18s %6zu %14.3e  %s\n", r.op.c_str(), r.cases, r.max_rel_error, r.passed ? "PASS" : "FAIL");
  }
  std::fflush(stdout);
  if (!ok) {
    std::cerr << "error: gradient check failed" << std::endl;
    return kExitRuntime;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"holoforge: RGB-only volumetric hologram toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Seed for synthesis, initialization and batch order")->capture_default_str();
  app.add_option("--config", g.config, "JSON file whose keys fill options not given on the command line");
  app.add_option("--workers", g.workers, "Worker threads for data loading and synthesis")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_flag("--quiet,-q", g.quiet, "Suppress progress lines");

  auto* dataset = app.add_subcommand("dataset", "Dataset utilities");
  dataset->require_subcommand(1);
  SynthArgs synth;
  auto* synth_cmd = dataset->add_subcommand("synth", "Generate a synthetic RGB-D-A-P dataset");
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();
  synth_cmd->add_option("--n", synth.n, "Number of samples")->capture_default_str();
  synth_cmd->add_option("--size", synth.size, "Image side (power of two)")->capture_default_str();
  synth_cmd->add_option("--wavelength", synth.wavelength, "Wavelength in meters")->capture_default_str();
  synth_cmd->add_option("--pitch", synth.pitch, "Pixel pitch in meters")->capture_default_str();
  synth_cmd->add_option("--layers", synth.layers, "Number of depth layers")->capture_default_str();
  synth_cmd->add_option("--z-min", synth.z_min, "Nearest layer distance in meters")->capture_default_str();
  synth_cmd->add_option("--z-max", synth.z_max, "Farthest layer distance in meters")->capture_default_str();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Two-phase training");
  train_cmd->add_option("--data", tr.data, "Dataset directory with manifest.json")->required();
  train_cmd->add_option("--phase", tr.phase, "1, 2 or both")->capture_default_str();
  train_cmd->add_option("--epochs", tr.epochs, "Epochs per phase")->capture_default_str();
  train_cmd->add_option("--batch", tr.batch, "Batch size")->capture_default_str();
  train_cmd->add_option("--lr", tr.lr, "Adam learning rate")->capture_default_str();
  train_cmd->add_option("--preset", tr.preset, "toy or paper")->capture_default_str();
  train_cmd->add_option("--ckpt-out", tr.ckpt_out, "Checkpoint and history directory")->capture_default_str();
  train_cmd->add_option("--init", tr.init, "Phase-1 checkpoint to start phase 2 from");
  train_cmd->add_option("--resume", tr.resume, "Per-epoch checkpoint to continue from");
  train_cmd->add_option("--save-every", tr.save_every, "Write a resumable checkpoint every N epochs (0: never)")
      ->capture_default_str();

  InferArgs inf;
  auto* infer_cmd = app.add_subcommand("infer", "Predict depth, amplitude and phase from one RGB image");
  infer_cmd->add_option("--ckpt", inf.ckpt, "Checkpoint")->required();
  infer_cmd->add_option("--rgb", inf.rgb, "RGB PNG")->required();
  infer_cmd->add_option("--out", inf.out, "Output directory")->required();

  ReconstructArgs rec;
  auto* rec_cmd = app.add_subcommand("reconstruct", "Numerically refocus a hologram");
  rec_cmd->add_option("--amp", rec.amp, "Amplitude PFM")->required();
  rec_cmd->add_option("--phase", rec.phase, "Phase PFM")->required();
  rec_cmd->add_option("--scale", rec.scale, "Amplitude scale")->capture_default_str();
  rec_cmd->add_option("--z", rec.z, "Propagation distance in meters (repeatable)")->required();
  rec_cmd->add_option("--out", rec.out, "Output directory")->required();
  rec_cmd->add_option("--wavelength", rec.wavelength, "Wavelength in meters")->capture_default_str();
  rec_cmd->add_option("--pitch", rec.pitch, "Pixel pitch in meters")->capture_default_str();

  EvaluateArgs ev;
  auto* eval_cmd = app.add_subcommand("evaluate", "PSNR/SSIM report of a checkpoint on a split");
  eval_cmd->add_option("--ckpt", ev.ckpt, "Checkpoint")->required();
  eval_cmd->add_option("--data", ev.data, "Dataset directory")->required();
  eval_cmd->add_option("--split", ev.split, "train, val or test")->capture_default_str();
  eval_cmd->add_option("--out", ev.out, "Report path (stdout if omitted)");

  GradcheckArgs gc;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference check of autograd ops");
  gc_cmd->add_option("--ops", gc.ops, "all or one op name")->capture_default_str();
  gc_cmd->add_option("--precision", gc.precision, "Floating point bits")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitUsage;
  }

  try {
    if (!g.config.empty()) {
      if (!fs::exists(g.config)) throw UsageError("config file " + g.config + " does not exist");
      g.overrides = data::read_json(g.config);
      if (!g.overrides.is_object()) throw UsageError("config file must hold a JSON object");
      overlay(&app, g.overrides, "seed", g.seed);
      overlay(&app, g.overrides, "workers", g.workers);
    }
    const json& c = g.overrides;

    if (synth_cmd->parsed()) {
      for (auto [k, v] : {std::pair{"wavelength", &synth.wavelength}, {"pitch", &synth.pitch},
                          {"z-min", &synth.z_min}, {"z-max", &synth.z_max}})
        overlay(synth_cmd, c, k, *v);
      overlay(synth_cmd, c, "n", synth.n);
      overlay(synth_cmd, c, "size", synth.size);
      overlay(synth_cmd, c, "layers", synth.layers);
      return run_synth(g, synth);
    }
    if (train_cmd->parsed()) {
      overlay(train_cmd, c, "phase", tr.phase);
      overlay(train_cmd, c, "epochs", tr.epochs);
      overlay(train_cmd, c, "batch", tr.batch);
      overlay(train_cmd, c, "lr", tr.lr);
      overlay(train_cmd, c, "preset", tr.preset);
      overlay(train_cmd, c, "ckpt-out", tr.ckpt_out);
      overlay(train_cmd, c, "init", tr.init);
      overlay(train_cmd, c, "save-every", tr.save_every);
      return run_train(g, tr);
    }
    if (infer_cmd->parsed()) return run_infer(g, inf);
    if (rec_cmd->parsed()) {
      overlay(rec_cmd, c, "scale", rec.scale);
      overlay(rec_cmd, c, "wavelength", rec.wavelength);
      overlay(rec_cmd, c, "pitch", rec.pitch);
      return run_reconstruct(g, rec);
    }
    if (eval_cmd->parsed()) {
      overlay(eval_cmd, c, "split", ev.split);
      return run_evaluate(g, ev);
    }
    if (gc_cmd->parsed()) return run_gradcheck(g, gc);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitRuntime;
  }
  return kExitUsage;
}
