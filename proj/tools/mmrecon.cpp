// mmrecon: dataset generation, training, reconstruction and evaluation.
//
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
// abort, 1 anything else.

#include "mmrecon/error.hpp"
#include "mmrecon/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace fs = std::filesystem;

namespace {

enum Exit
{
  kOk = 0,
  kOther = 1,
  kConfig = 2,
  kData = 3,
  kNumerical = 4,
};

struct Options
{
  std::string configFile;
  std::vector<std::string> overrides;
  std::string data, out, checkpoint, method, label;
  std::vector<std::string> recon;
  bool resume = false;
  bool quiet = false;
};

mmr::ExperimentConfig LoadConfig(Options const &o)
{
  nlohmann::json doc = o.configFile.empty() ? nlohmann::json::object() : mmr::ReadConfigFile(o.configFile);
  for (auto const &s : o.overrides) { mmr::ApplyOverride(doc, s); }
  return mmr::ExperimentConfig::FromJson(doc);
}

fs::path OutDir(Options const &o, mmr::ExperimentConfig const &cfg, char const *fallback)
{
  return mmr::ResolveOutput(o.out.empty() ? fs::path(cfg.outputDir) / fallback : fs::path(o.out));
}

fs::path DataDir(Options const &o, mmr::ExperimentConfig const &cfg)
{
  return o.data.empty() ? mmr::ResolveOutput(fs::path(cfg.outputDir) / "data") : fs::path(o.data);
}

} // namespace

int main(int argc, char **argv)
{
  CLI::App app{"Physics-guided unrolled MRI reconstruction with multi-mask supervised training"};
  app.require_subcommand(1);
  Options o;
  app.add_option("-c,--config", o.configFile, "Experiment config (JSON)");
  app.add_option("-s,--set", o.overrides, "Override a config entry, e.g. --set model.T=5 (repeatable)");
  app.add_flag("-q,--quiet", o.quiet, "No progress output");

  auto *gen = app.add_subcommand("generate-data", "Write a synthetic dataset");
  gen->add_option("-o,--out", o.out, "Dataset directory (default <output_dir>/data)");

  auto *train = app.add_subcommand("train", "Train an unrolled network (K=1 conventional, K>1 multi-mask)");
  train->add_option("-d,--data", o.data, "Dataset directory (default <output_dir>/data)");
  train->add_option("-o,--out", o.out, "Run directory (default <output_dir>/train)");
  train->add_flag("--resume", o.resume, "Continue from <out>/checkpoint.bin");

  auto *recon = app.add_subcommand("reconstruct", "Reconstruct the test slices");
  recon->add_option("-d,--data", o.data, "Dataset directory (default <output_dir>/data)");
  recon->add_option("-m,--method", o.method, "unrolled | cg-sense | zero-filled | reference")->required();
  recon->add_option("-k,--checkpoint", o.checkpoint, "Checkpoint (unrolled only)");
  recon->add_option("-o,--out", o.out, "Output directory (default <output_dir>/recon_<method>)");
  recon->add_option("-l,--label", o.label, "Method name in reports");

  auto *eval = app.add_subcommand("evaluate", "SSIM/PSNR of reconstructions against the clean test images");
  eval->add_option("-d,--data", o.data, "Dataset directory (default <output_dir>/data)");
  eval->add_option("-r,--recon", o.recon, "Reconstruction directories")->required();
  eval->add_option("-o,--out", o.out, "Report directory (default <output_dir>/eval)");

  auto *compare = app.add_subcommand("compare", "Baselines plus one model per eval.compare_K, in one table");
  compare->add_option("-d,--data", o.data, "Existing dataset (generated into <out>/data otherwise)");
  compare->add_option("-o,--out", o.out, "Sweep directory (default <output_dir>/compare)");

  auto *show = app.add_subcommand("show-config", "Print the effective config with defaults resolved");

  try {
    app.parse(argc, argv);
  } catch (CLI::ParseError const &e) {
    int const code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  std::ostream *progress = o.quiet ? nullptr : &std::cerr;
  try {
    auto const cfg = LoadConfig(o);
    if (*show) {
      std::cout << cfg.toJson().dump(2) << "\n";
    } else if (*gen) {
      auto const dir = OutDir(o, cfg, "data");
      auto const ds = mmr::CmdGenerateData(cfg, dir);
      std::cout << "wrote " << ds.size() << " slices to " << dir.string() << "\n";
    } else if (*train) {
      auto const r = mmr::CmdTrain(cfg, DataDir(o, cfg), OutDir(o, cfg, "train"), o.resume, progress);
      std::cout << "checkpoint " << r.checkpoint.string() << " (" << r.state.step << " steps)\n";
    } else if (*recon) {
      std::optional<fs::path> ckpt;
      if (!o.checkpoint.empty()) { ckpt = o.checkpoint; }
      auto const dir = OutDir(o, cfg, ("recon_" + o.method).c_str());
      mmr::CmdReconstruct(cfg, DataDir(o, cfg), o.method, ckpt, dir, o.label);
      std::cout << "wrote reconstructions to " << dir.string() << "\n";
    } else if (*eval) {
      std::vector<fs::path> dirs(o.recon.begin(), o.recon.end());
      auto const ev = mmr::CmdEvaluate(DataDir(o, cfg), dirs, OutDir(o, cfg, "eval"));
      std::cout << ev.report.table();
    } else if (*compare) {
      std::optional<fs::path> data;
      if (!o.data.empty()) { data = o.data; }
      auto const ev = mmr::CmdCompare(cfg, OutDir(o, cfg, "compare"), data, progress);
      std::cout << ev.report.table();
    }
  } catch (mmr::ConfigError const &e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (mmr::DataError const &e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (mmr::ShapeError const &e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (mmr::NumericalError const &e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    return kNumerical;
  } catch (std::exception const &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kOther;
  }
  return kOk;
}
