#include "mmrecon/error.hpp"
#include "mmrecon/experiment.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using mmr::ExperimentConfig;
using nlohmann::json;

namespace {

ExperimentConfig Tiny(std::size_t K = 1)
{
  auto c = ExperimentConfig::FromJson(json::parse(R"({
    "data": {"H": 16, "W": 16, "C": 2, "n_train": 3, "n_test": 2},
    "sampling": {"n_acs": 4},
    "model": {"T": 1, "n_cg": 2, "B": 1, "F": 2},
    "train": {"epochs": 2, "lr": 0.001},
    "baseline": {"n_iter": 10}
  })"));
  c.K = K;
  return c;
}

fs::path TempDir(std::string const &name)
{
  auto const p = fs::temp_directory_path() / ("mmrecon_exp_" + name);
  fs::remove_all(p);
  return p;
}

std::string Slurp(fs::path const &p)
{
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t Lines(fs::path const &p)
{
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) { ++n; }
  return n;
}

} // namespace

TEST_CASE("config parsing")
{
  auto const c = ExperimentConfig::FromJson(json::object());
  CHECK(c.data.H == 64);
  CHECK(c.K == 1);
  CHECK(ExperimentConfig::FromJson(c.toJson()).toJson() == c.toJson());

  CHECK_THROWS_AS(ExperimentConfig::FromJson(json::parse(R"({"data": {"HH": 4}})")), mmr::ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::FromJson(json::parse(R"({"extra": {}})")), mmr::ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::FromJson(json::parse(R"({"data": {"H": "big"}})")), mmr::ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::FromJson(json::parse(R"({"data": {"C": -1}})")), mmr::ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::FromJson(json::parse(R"({"sampling": {"rho": 0}})")), mmr::ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::FromJson(json::parse(R"({"sampling": {"acs_policy": "x"}})")), mmr::ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::FromJson(json::parse(R"({"train": {"batch_size": 2}})")), mmr::ConfigError);
  CHECK(ExperimentConfig::FromJson(json::parse(R"({"train": {"lr": 1}})")).lr == 1.0);
}

TEST_CASE("overrides")
{
  json doc = json::object();
  mmr::ApplyOverride(doc, "sampling.K=5");
  mmr::ApplyOverride(doc, "sampling.acs_policy=uniform-over-all");
  mmr::ApplyOverride(doc, "eval.compare_K=[1,2]");
  auto const c = ExperimentConfig::FromJson(doc);
  CHECK(c.K == 5);
  CHECK(c.acsPolicy == mmr::AcsPolicy::UniformOverAll);
  CHECK(c.compareK == std::vector<std::size_t>{1, 2});
  CHECK_THROWS_AS(mmr::ApplyOverride(doc, "novalue"), mmr::ConfigError);
  CHECK_THROWS_AS(mmr::ApplyOverride(doc, "sampling.K.x=1"), mmr::ConfigError);
}

TEST_CASE("output root from the environment")
{
  ::setenv("MMRECON_OUTPUT_ROOT", "/tmp/root_x", 1);
  CHECK(mmr::ResolveOutput("runs/a") == fs::path("/tmp/root_x/runs/a"));
  CHECK(mmr::ResolveOutput("/abs") == fs::path("/abs"));
  ::unsetenv("MMRECON_OUTPUT_ROOT");
  CHECK(mmr::ResolveOutput("runs/a") == fs::path("runs/a"));
}

TEST_CASE("data generation is reproducible and validated")
{
  auto const a = TempDir("gen_a"), b = TempDir("gen_b");
  auto const cfg = Tiny();
  auto const ds = mmr::CmdGenerateData(cfg, a);
  (void)mmr::CmdGenerateData(cfg, b);
  CHECK(ds.size() == 5);
  CHECK(ds.testIds() == std::vector<std::size_t>{3, 4});
  for (std::size_t id = 0; id < 5; ++id) {
    CHECK(Slurp(a / mmr::Dataset::SliceFile(id)) == Slurp(b / mmr::Dataset::SliceFile(id)));
  }
  auto const s = ds.load(1);
  CHECK(s.omega == mmr::UniformMask(16, 4, 4));
  CHECK(s.acquired().mask() == s.omega);

  auto empty = cfg;
  empty.data.nTrain = 0;
  CHECK_THROWS_AS(mmr::CmdGenerateData(empty, TempDir("gen_empty")), mmr::ConfigError);

  fs::resize_file(a / mmr::Dataset::SliceFile(2), 100);
  CHECK_THROWS_AS(ds.load(2), mmr::DataError);
  CHECK_THROWS_AS(mmr::Dataset::Open(TempDir("nothing")), mmr::DataError);
}

TEST_CASE("training writes logs and checkpoints, and resumes exactly")
{
  auto const root = TempDir("train");
  auto const data = root / "data";
  auto cfg = Tiny(2);
  (void)mmr::CmdGenerateData(cfg, data);

  auto mismatched = cfg;
  mismatched.data.H = 32;
  CHECK_THROWS_AS(mmr::CmdTrain(mismatched, data, root / "bad"), mmr::ConfigError);

  auto const full = mmr::CmdTrain(cfg, data, root / "full");
  CHECK(Lines(full.log) == 1 + 2 * 3 * 2);
  CHECK(fs::exists(root / "full" / "checkpoint_epoch0001.bin"));
  CHECK(fs::exists(root / "full" / "checkpoint_epoch0002.bin"));
  auto const ck = mmr::LoadCheckpoint(full.checkpoint);
  CHECK(ck.config.K == 2);
  CHECK(ck.state.step == 12);

  auto first = cfg;
  first.epochs = 1;
  (void)mmr::CmdTrain(first, data, root / "split");
  // Extending the epoch budget is the one change allowed on resume.
  auto const extended = mmr::CmdTrain(cfg, data, root / "split", true);
  CHECK(extended.state.params == full.state.params);
  CHECK(Lines(extended.log) == 13);
  auto other = cfg;
  other.lr = 0.01;
  CHECK_THROWS_AS(mmr::CmdTrain(other, data, root / "split", true), mmr::ConfigError);

  // Resume from the epoch-1 checkpoint of the full run instead.
  fs::create_directories(root / "resume");
  fs::copy_file(root / "full" / "checkpoint_epoch0001.bin", root / "resume" / "checkpoint.bin");
  {
    std::ifstream in(full.log);
    std::ofstream out(root / "resume" / "train_log.csv");
    std::string line;
    for (int i = 0; i < 1 + 6 + 2 && std::getline(in, line); ++i) { out << line << '\n'; } // two stray rows
  }
  auto const resumed = mmr::CmdTrain(cfg, data, root / "resume", true);
  CHECK(resumed.state.params == full.state.params);
  std::ifstream x(full.log), y(resumed.log);
  std::string lx, ly;
  std::size_t rows = 0;
  while (std::getline(x, lx) && std::getline(y, ly)) {
    CHECK(lx.substr(0, lx.rfind(',')) == ly.substr(0, ly.rfind(','))); // all but wall time
    ++rows;
  }
  CHECK(rows == 13);
  CHECK(Lines(resumed.log) == 13);
}

TEST_CASE("reconstruction methods")
{
  auto const root = TempDir("recon");
  auto const data = root / "data";
  auto const cfg = Tiny();
  auto const ds = mmr::CmdGenerateData(cfg, data);
  auto const trained = mmr::CmdTrain(cfg, data, root / "train");

  mmr::CmdReconstruct(cfg, data, "zero-filled", std::nullopt, root / "zf");
  auto const s = ds.load(3);
  auto const zf = mmr::ReadArray(root / "zf" / "slice_00003.bin", {2, 16, 16});
  CHECK(zf == mmr::ApplyEH(s.acquired(), s.coils, s.omega).array());

  mmr::CmdReconstruct(cfg, data, "cg-sense", trained.checkpoint, root / "cg");
  mmr::CmdReconstruct(cfg, data, "cg-sense", std::nullopt, root / "cg2");
  CHECK(Slurp(root / "cg" / "slice_00004.bin") == Slurp(root / "cg2" / "slice_00004.bin"));

  mmr::CmdReconstruct(cfg, data, "unrolled", trained.checkpoint, root / "u1");
  mmr::CmdReconstruct(cfg, data, "unrolled", trained.checkpoint, root / "u2", "again");
  CHECK(Slurp(root / "u1" / "slice_00003.bin") == Slurp(root / "u2" / "slice_00003.bin"));
  CHECK(Slurp(root / "u1" / "slice_00003.pgm").rfind("P5\n16 16\n65535\n", 0) == 0);

  CHECK_THROWS_AS(mmr::CmdReconstruct(cfg, data, "unrolled", std::nullopt, root / "x"), mmr::ConfigError);
  CHECK_THROWS_AS(mmr::CmdReconstruct(cfg, data, "magic", std::nullopt, root / "x"), mmr::ConfigError);

  // A checkpoint trained on a different grid is refused.
  auto big = cfg;
  big.data.H = big.data.W = 32;
  (void)mmr::CmdGenerateData(big, root / "data32");
  CHECK_THROWS_AS(
    mmr::CmdReconstruct(big, root / "data32", "unrolled", trained.checkpoint, root / "x"), mmr::DataError);

  mmr::CmdReconstruct(cfg, data, "reference", std::nullopt, root / "ref");
  auto const ev = mmr::CmdEvaluate(data, {root / "ref", root / "zf", root / "u1"}, root / "eval");
  CHECK(ev.report.find("reference").psnr.median == mmr::kPsnrIdentical);
  CHECK(ev.report.find("reference").ssim.median == doctest::Approx(1.0));
  CHECK(ev.metrics.size() == 6);
  CHECK(fs::exists(root / "eval" / "report.txt"));
  CHECK_THROWS_AS(mmr::CmdEvaluate(data, {root / "u1", root / "u1"}, root / "eval"), mmr::ConfigError);

  fs::remove(root / "zf" / "slice_00004.bin");
  try {
    (void)mmr::CmdEvaluate(data, {root / "zf"}, root / "eval2");
    FAIL("expected a data error");
  } catch (mmr::DataError const &e) {
    CHECK(std::string(e.what()).find("missing test slices: 4") != std::string::npos);
  }
}

TEST_CASE("compare sweep is reproducible")
{
  auto cfg = Tiny();
  cfg.epochs = 1;
  cfg.compareK = {1, 2};
  auto const a = TempDir("cmp_a"), b = TempDir("cmp_b");
  auto const ea = mmr::CmdCompare(cfg, a), eb = mmr::CmdCompare(cfg, b);
  CHECK(ea.report.methods.size() == 4);
  CHECK(Slurp(a / "eval" / "metrics.csv") == Slurp(b / "eval" / "metrics.csv"));
  CHECK(Slurp(a / "eval" / "report.csv") == Slurp(b / "eval" / "report.csv"));
  (void)ea.report.find("multi-mask (K=2)");
  (void)ea.report.find("supervised (K=1)");
}
