#include "mmrecon/experiment.hpp"
#include "mmrecon/error.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <map>
#include <ostream>

namespace mmr {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

bool SameKind(json const &def, json const &v)
{
  if (def.is_boolean()) { return v.is_boolean(); }
  if (def.is_number_unsigned()) { return v.is_number_unsigned(); }
  if (def.is_number()) { return v.is_number(); }
  if (def.is_string()) { return v.is_string(); }
  if (def.is_array()) {
    if (!v.is_array()) { return false; }
    for (auto const &e : v) {
      if (!e.is_number_unsigned()) { return false; }
    }
    return true;
  }
  return false;
}

// Overlays `user` on `defaults`, rejecting unknown keys and type changes.
void Merge(json &defaults, json const &user, std::string const &where)
{
  if (!user.is_object()) { throw ConfigError("config: " + (where.empty() ? "document" : where) + " must be an object"); }
  for (auto const &[key, value] : user.items()) {
    std::string const path = where.empty() ? key : where + "." + key;
    if (!defaults.contains(key)) { throw ConfigError("config: unknown key '" + path + "'"); }
    auto &slot = defaults[key];
    if (slot.is_object()) {
      Merge(slot, value, path);
    } else if (!SameKind(slot, value)) {
      throw ConfigError("config: '" + path + "' has the wrong type (expected like " + slot.dump() + ")");
    } else {
      slot = value;
    }
  }
}

void WriteText(fs::path const &path, std::string const &text)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) { throw DataError("cannot write " + path.string()); }
  out << text;
  if (!out.flush()) { throw DataError("write failed for " + path.string()); }
}

json ReadJson(fs::path const &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) { throw DataError("cannot open " + path.string()); }
  try {
    return json::parse(std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()));
  } catch (json::exception const &e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void MakeDir(fs::path const &dir)
{
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) { throw DataError("cannot create " + dir.string() + ": " + ec.message()); }
}

std::string SliceStem(std::size_t id)
{
  auto name = Dataset::SliceFile(id);
  return name.substr(0, name.size() - 4);
}

// Drops log rows written after the checkpoint a run resumes from.
void TruncateLog(fs::path const &path, std::size_t lastStep)
{
  std::ifstream in(path);
  if (!in) { return; }
  std::string line, kept;
  for (bool header = true; std::getline(in, line); header = false) {
    std::size_t step = 0;
    auto const [end, ec] = std::from_chars(line.data(), line.data() + line.size(), step);
    if (!header && ec != std::errc{}) { throw DataError("train log " + path.string() + ": malformed row '" + line + "'"); }
    if (header || step <= lastStep) { kept += line + "\n"; }
  }
  in.close();
  WriteText(path, kept);
}

json DataShape(DataSpec const &d) { return {{"H", d.H}, {"W", d.W}, {"C", d.C}}; }

} // namespace

json ExperimentConfig::toJson() const
{
  json ks = json::array();
  for (auto k : compareK) { ks.push_back(k); }
  return {
    {"data",
     {{"H", data.H},
      {"W", data.W},
      {"C", data.C},
      {"n_train", data.nTrain},
      {"n_test", data.nTest},
      {"noise_sigma", data.sigma},
      {"seed", data.seed}}},
    {"sampling",
     {{"pattern", sampling.pattern},
      {"R", sampling.R},
      {"n_acs", sampling.nAcs},
      {"seed", sampling.seed},
      {"K", K},
      {"rho", rho},
      {"acs_policy", ToString(acsPolicy)},
      {"partition_seed", partitionSeed},
      {"resample_per_epoch", resampleMasks}}},
    {"model",
     {{"T", model.unrolls},
      {"n_cg", model.cgIters},
      {"B", model.blocks},
      {"F", model.features},
      {"kernel", model.kernel},
      {"shared_weights", model.sharedWeights},
      {"mu_init", model.muInit}}},
    {"train",
     {{"lr", lr},
      {"epochs", epochs},
      {"batch_size", batchSize},
      {"init_seed", initSeed},
      {"shuffle_seed", shuffleSeed},
      {"loss_l2_weight", loss.l2},
      {"loss_l1_weight", loss.l1}}},
    {"baseline", {{"lambda", baseline.lambda}, {"n_iter", baseline.iterations}}},
    {"eval", {{"output_dir", outputDir}, {"compare_K", ks}}},
  };
}

ExperimentConfig ExperimentConfig::FromJson(json const &j)
{
  json doc = ExperimentConfig{}.toJson();
  Merge(doc, j, "");
  ExperimentConfig c;
  auto const &d = doc["data"];
  c.data.H = d["H"];
  c.data.W = d["W"];
  c.data.C = d["C"];
  c.data.nTrain = d["n_train"];
  c.data.nTest = d["n_test"];
  c.data.sigma = d["noise_sigma"];
  c.data.seed = d["seed"];
  auto const &s = doc["sampling"];
  c.sampling.pattern = s["pattern"];
  c.sampling.R = s["R"];
  c.sampling.nAcs = s["n_acs"];
  c.sampling.seed = s["seed"];
  c.K = s["K"];
  c.rho = s["rho"];
  c.acsPolicy = ParseAcsPolicy(s["acs_policy"].get<std::string>());
  c.partitionSeed = s["partition_seed"];
  c.resampleMasks = s["resample_per_epoch"];
  auto const &m = doc["model"];
  c.model.unrolls = m["T"];
  c.model.cgIters = m["n_cg"];
  c.model.blocks = m["B"];
  c.model.features = m["F"];
  c.model.kernel = m["kernel"];
  c.model.sharedWeights = m["shared_weights"];
  c.model.muInit = m["mu_init"];
  auto const &t = doc["train"];
  c.lr = t["lr"];
  c.epochs = t["epochs"];
  c.batchSize = t["batch_size"];
  c.initSeed = t["init_seed"];
  c.shuffleSeed = t["shuffle_seed"];
  c.loss.l2 = t["loss_l2_weight"];
  c.loss.l1 = t["loss_l1_weight"];
  auto const &b = doc["baseline"];
  c.baseline.lambda = b["lambda"];
  c.baseline.iterations = b["n_iter"];
  auto const &e = doc["eval"];
  c.outputDir = e["output_dir"];
  c.compareK = e["compare_K"].get<std::vector<std::size_t>>();
  c.validate();
  return c;
}

TrainConfig ExperimentConfig::trainConfig() const
{
  TrainConfig t;
  t.K = K;
  t.rho = rho;
  t.lr = lr;
  t.epochs = epochs;
  t.batchSize = batchSize;
  t.model = model;
  t.initSeed = initSeed;
  t.maskSeed = partitionSeed;
  t.shuffleSeed = shuffleSeed;
  t.acsPolicy = acsPolicy;
  t.resampleMasks = resampleMasks;
  t.loss = loss;
  return t;
}

void ExperimentConfig::validate() const
{
  if (data.H < 16 || data.W < 16) { throw ConfigError("config: data.H and data.W must be at least 16"); }
  if (data.C < 1) { throw ConfigError("config: data.C must be at least 1"); }
  if (!(data.sigma >= 0.0)) { throw ConfigError("config: data.noise_sigma must be non-negative"); }
  if (sampling.pattern != "uniform" && sampling.pattern != "random") {
    throw ConfigError("config: sampling.pattern must be uniform or random");
  }
  if (sampling.R < 1 || sampling.R > data.W) { throw ConfigError("config: sampling.R must lie in [1, W]"); }
  if (sampling.nAcs > data.W) { throw ConfigError("config: sampling.n_acs exceeds W"); }
  if (!(baseline.lambda >= 0.0)) { throw ConfigError("config: baseline.lambda must be non-negative"); }
  if (baseline.iterations < 1) { throw ConfigError("config: baseline.n_iter must be at least 1"); }
  if (outputDir.empty()) { throw ConfigError("config: eval.output_dir must not be empty"); }
  if (compareK.empty()) { throw ConfigError("config: eval.compare_K must not be empty"); }
  for (auto k : compareK) {
    if (k < 1) { throw ConfigError("config: eval.compare_K entries must be at least 1"); }
  }
  trainConfig().validate();
}

json ReadConfigFile(fs::path const &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) { throw ConfigError("config: cannot read " + path.string()); }
  try {
    return json::parse(std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()));
  } catch (json::exception const &e) {
    throw ConfigError("config: " + path.string() + " is not valid JSON: " + e.what());
  }
}

void ApplyOverride(json &doc, std::string const &assignment)
{
  auto const eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("config: override '" + assignment + "' is not of the form key.path=value");
  }
  std::string const key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (json::exception const &) {
    value = text;
  }
  json *node = &doc;
  std::size_t start = 0;
  while (true) {
    auto const dot = key.find('.', start);
    std::string const part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) { throw ConfigError("config: malformed override key '" + key + "'"); }
    if (!node->is_object()) { throw ConfigError("config: override '" + key + "' descends into a non-object"); }
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) { *node = json::object(); }
    start = dot + 1;
  }
}

fs::path ResolveOutput(fs::path const &path)
{
  if (path.is_absolute()) { return path; }
  if (char const *root = std::getenv("MMRECON_OUTPUT_ROOT"); root && *root) { return fs::path(root) / path; }
  return path;
}

Dataset CmdGenerateData(ExperimentConfig const &cfg, fs::path const &dir)
{
  cfg.validate();
  return Dataset::Generate(dir, cfg.data, cfg.sampling, cfg.toJson());
}

namespace {

void CheckDatasetMatches(ExperimentConfig const &cfg, Dataset const &ds)
{
  auto const &d = ds.data();
  auto mismatch = [&](std::string const &what, std::string const &have, std::string const &want) {
    throw ConfigError(
      "dataset " + ds.dir().string() + " was generated with " + what + "=" + have + " but the config requests " +
      want);
  };
  if (d.H != cfg.data.H || d.W != cfg.data.W || d.C != cfg.data.C) {
    mismatch(
      "H,W,C", DataShape(d).dump(), DataShape(cfg.data).dump());
  }
  if (d.nTrain != cfg.data.nTrain || d.nTest != cfg.data.nTest) {
    mismatch(
      "n_train,n_test", std::to_string(d.nTrain) + "," + std::to_string(d.nTest),
      std::to_string(cfg.data.nTrain) + "," + std::to_string(cfg.data.nTest));
  }
  if (d.sigma != cfg.data.sigma || d.seed != cfg.data.seed) {
    mismatch("noise_sigma/seed", json{d.sigma, d.seed}.dump(), json{cfg.data.sigma, cfg.data.seed}.dump());
  }
  auto const &s = ds.sampling();
  if (!(s == cfg.sampling)) {
    mismatch(
      "sampling (pattern, R, n_acs, seed)", json{s.pattern, s.R, s.nAcs, s.seed}.dump(),
      json{cfg.sampling.pattern, cfg.sampling.R, cfg.sampling.nAcs, cfg.sampling.seed}.dump());
  }
}

} // namespace

TrainOutcome CmdTrain(
  ExperimentConfig const &cfg, fs::path const &dataDir, fs::path const &outDir, bool resume, std::ostream *progress)
{
  cfg.validate();
  auto const ds = Dataset::Open(dataDir);
  CheckDatasetMatches(cfg, ds);
  auto const tc = cfg.trainConfig();
  MakeDir(outDir);

  TrainOutcome out;
  out.checkpoint = outDir / "checkpoint.bin";
  out.log = outDir / "train_log.csv";
  std::optional<TrainState> start;
  if (resume) {
    auto ckpt = LoadCheckpoint(out.checkpoint);
    // Only the epoch budget may change between a run and its continuation.
    auto stored = ckpt.config;
    stored.epochs = tc.epochs;
    if (!(stored == tc)) { throw ConfigError("train: checkpoint " + out.checkpoint.string() + " used a different config"); }
    if (ckpt.state.epochsDone > tc.epochs) {
      throw ConfigError("train: checkpoint already has more epochs than train.epochs");
    }
    start = std::move(ckpt.state);
    TruncateLog(out.log, start->step);
  } else {
    std::error_code ec;
    fs::remove(out.log, ec);
  }
  WriteText(outDir / "config.json", cfg.toJson().dump(2) + "\n");

  json const extra = {{"config", cfg.toJson()}, {"data", DataShape(ds.data())}, {"dataset", ds.dir().string()}};
  TrainLog log(out.log);
  TrainHooks hooks;
  hooks.onStep = [&](TrainRecord const &r) { log.append(r); };
  hooks.onEpoch = [&](TrainState const &s) {
    Checkpoint c{tc, s, extra};
    char name[40];
    std::snprintf(name, sizeof name, "checkpoint_epoch%04zu.bin", s.epochsDone);
    SaveCheckpoint(outDir / name, c);
    SaveCheckpoint(out.checkpoint, c);
    if (progress) {
      *progress << "epoch " << s.epochsDone << "/" << tc.epochs << " step " << s.step << " mu " << s.params.mu()
                << std::endl;
    }
  };
  auto const slices = ds.trainingSlices();
  out.state = tc.K == 1 ? TrainConventional(slices, tc, hooks, std::move(start))
                        : TrainMultiMask(slices, tc, hooks, std::move(start));
  if (!fs::exists(out.checkpoint)) {
    SaveCheckpoint(out.checkpoint, Checkpoint{tc, out.state, extra});
  }
  return out;
}

void CmdReconstruct(
  ExperimentConfig const &cfg, fs::path const &dataDir, std::string const &method,
  std::optional<fs::path> const &checkpoint, fs::path const &outDir, std::string label)
{
  cfg.validate();
  auto const ds = Dataset::Open(dataDir);
  if (label.empty()) { label = method; }
  std::optional<ModelParams> params;
  json meta = {{"method", method}, {"label", label}, {"dataset", ds.dir().string()}, {"data", DataShape(ds.data())}};
  if (method == "unrolled") {
    if (!checkpoint) { throw ConfigError("reconstruct: method 'unrolled' needs a checkpoint"); }
    auto const ckpt = LoadCheckpoint(*checkpoint);
    if (ckpt.extra.contains("data") && ckpt.extra["data"] != DataShape(ds.data())) {
      throw DataError(
        "reconstruct: checkpoint was trained on " + ckpt.extra["data"].dump() + " but the dataset is " +
        DataShape(ds.data()).dump());
    }
    params = ckpt.state.params;
    meta["checkpoint"] = checkpoint->string();
    meta["train"] = ToJson(ckpt.config);
  } else if (method == "cg-sense") {
    meta["baseline"] = {{"lambda", cfg.baseline.lambda}, {"n_iter", cfg.baseline.iterations}};
  } else if (method != "zero-filled" && method != "reference") {
    throw ConfigError("reconstruct: unknown method '" + method + "' (expected unrolled, cg-sense, zero-filled or reference)");
  }

  MakeDir(outDir);
  std::vector<std::size_t> ids;
  for (auto id : ds.testIds()) {
    auto const s = ds.load(id);
    auto const y = s.acquired();
    ComplexImage x;
    if (method == "unrolled") {
      x = Reconstruct(y, s.omega, s.coils, *params).image;
    } else if (method == "cg-sense") {
      x = CgSense(y, s.omega, s.coils, cfg.baseline);
    } else if (method == "zero-filled") {
      x = ApplyEH(y, s.coils, s.omega);
    } else {
      x = s.image;
    }
    if (!x.array().allFinite()) { throw NumericalError("reconstruct: non-finite output for slice " + std::to_string(id)); }
    auto const stem = SliceStem(id);
    WriteArray(outDir / (stem + ".bin"), x.array());
    WriteArray(outDir / (stem + "_kspace.bin"), ApplyE(x, s.coils, SamplingMask::Full(ds.data().W)).array());
    WritePgm(outDir / (stem + ".pgm"), x);
    ids.push_back(id);
  }
  meta["slices"] = ids;
  meta["config"] = cfg.toJson();
  WriteText(outDir / "recon.json", meta.dump(2) + "\n");
}

Evaluation CmdEvaluate(fs::path const &dataDir, std::vector<fs::path> const &reconDirs, fs::path const &outDir)
{
  if (reconDirs.empty()) { throw ConfigError("evaluate: no reconstruction directories given"); }
  auto const ds = Dataset::Open(dataDir);
  auto const &d = ds.data();
  Evaluation ev;
  std::map<std::string, fs::path> labels;
  std::vector<std::pair<std::string, fs::path>> sources;
  for (auto const &dir : reconDirs) {
    auto const meta = ReadJson(dir / "recon.json");
    std::string const label = meta.value("label", meta.value("method", dir.filename().string()));
    if (auto [it, fresh] = labels.emplace(label, dir); !fresh) {
      throw ConfigError("evaluate: label '" + label + "' used by both " + it->second.string() + " and " + dir.string());
    }
    std::vector<std::string> missing;
    for (auto id : ds.testIds()) {
      if (!fs::exists(dir / (SliceStem(id) + ".bin"))) { missing.push_back(std::to_string(id)); }
    }
    if (!missing.empty()) {
      std::string list;
      for (auto const &m : missing) { list += (list.empty() ? "" : ", ") + m; }
      throw DataError("evaluate: " + dir.string() + " is missing test slices: " + list);
    }
    sources.emplace_back(label, dir);
  }
  for (auto id : ds.testIds()) {
    auto const ref = ds.load(id).image;
    for (auto const &[label, dir] : sources) {
      ComplexImage const rec(ReadArray(dir / (SliceStem(id) + ".bin"), {2, d.H, d.W}));
      ev.metrics.push_back({id, label, Ssim(ref, rec), Psnr(ref, rec)});
    }
  }
  ev.report = Aggregate(ev.metrics);
  MakeDir(outDir);
  WriteText(outDir / "metrics.csv", MetricsCsv(ev.metrics));
  WriteText(outDir / "report.csv", ev.report.csv());
  WriteText(outDir / "report.txt", ev.report.table());
  return ev;
}

Evaluation CmdCompare(
  ExperimentConfig const &cfg, fs::path const &outDir, std::optional<fs::path> const &dataDir, std::ostream *progress)
{
  cfg.validate();
  fs::path const data = dataDir ? *dataDir : outDir / "data";
  if (!dataDir) { CmdGenerateData(cfg, data); }
  std::vector<fs::path> recons;
  for (std::string const method : {"zero-filled", "cg-sense"}) {
    auto const dir = outDir / ("recon_" + method);
    CmdReconstruct(cfg, data, method, std::nullopt, dir);
    recons.push_back(dir);
  }
  for (auto K : cfg.compareK) {
    ExperimentConfig c = cfg;
    c.K = K;
    std::string const tag = "K" + std::to_string(K);
    if (progress) { *progress << "training " << tag << std::endl; }
    auto const trained = CmdTrain(c, data, outDir / ("train_" + tag), false, progress);
    auto const dir = outDir / ("recon_" + tag);
    CmdReconstruct(c, data, "unrolled", trained.checkpoint, dir, K == 1 ? "supervised (K=1)" : "multi-mask (K=" + std::to_string(K) + ")");
    recons.push_back(dir);
  }
  return CmdEvaluate(data, recons, outDir / "eval");
}

} // namespace mmr
