#include "arclab/commands.h"

#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "arclab/anglestats.h"
#include "arclab/autonet.h"
#include "arclab/checkpoint.h"
#include "arclab/config.h"
#include "arclab/gradcheck.h"
#include "arclab/hypersphere.h"
#include "arclab/margin.h"
#include "arclab/penalties.h"
#include "arclab/shardhead.h"

namespace arclab {
namespace {

namespace fs = std::filesystem;

constexpr const char* kOutDirEnv = "ARCLAB_OUT_DIR";
constexpr double kDegPerRad = 180.0 / std::numbers::pi;
constexpr double kShardTolerance = 1e-10;

std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void WriteFile(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  f << text;
  if (!f) throw Error(ErrorKind::kIo, "short write to " + path.string());
}

// CSV goes to the named file, or to `out` when no file was given.
void Emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty()) {
    out << text;
  } else {
    WriteFile(path, text);
  }
}

fs::path ResolveOutDir(const std::string& flag, const std::string& from_config) {
  if (!flag.empty()) return flag;
  if (!from_config.empty()) return from_config;
  if (const char* env = std::getenv(kOutDirEnv); env != nullptr && *env != '\0') return env;
  return "arclab_out";
}

void MakeDir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create " + dir.string() + ": " + ec.message());
}

std::vector<Preset> ResolvePresets(const std::vector<std::string>& names) {
  if (names.empty()) return {kAllPresets.begin(), kAllPresets.end()};
  std::vector<Preset> presets;
  for (const auto& name : names) {
    const auto p = ParsePreset(name);
    if (!p) throw Error(ErrorKind::kConfig, "unknown preset '" + name + "'");
    presets.push_back(*p);
  }
  return presets;
}

std::string UtcNow() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// ---- curves ----

struct CurvesOptions {
  std::vector<std::string> presets;
  double lo = 20.0;
  double hi = 100.0;
  double step = 1.0;
  bool boundary = false;
  std::string out;
};

int RunCurves(const CurvesOptions& o, std::ostream& out) {
  const std::vector<Preset> presets = ResolvePresets(o.presets);
  const std::vector<double> grid = DegreeGrid(o.lo, o.hi, o.step);
  std::ostringstream csv;
  csv << (o.boundary ? "theta2_deg" : "theta_deg");
  for (Preset p : presets) csv << ',' << PresetName(p);
  csv << '\n';
  if (o.boundary) {
    for (double deg : grid) {
      csv << Num(deg);
      for (Preset p : presets) {
        csv << ',';
        if (const auto theta1 = DecisionBoundary(PresetSpec(p), deg / kDegPerRad)) csv << Num(*theta1 * kDegPerRad);
      }
      csv << '\n';
    }
  } else {
    std::vector<std::vector<CurvePoint>> columns;
    for (Preset p : presets) columns.push_back(TargetLogitCurve(PresetSpec(p), grid));
    for (std::size_t i = 0; i < grid.size(); ++i) {
      csv << Num(grid[i]);
      for (const auto& column : columns) csv << ',' << Num(column[i].value);
      csv << '\n';
    }
  }
  Emit(o.out, csv.str(), out);
  return kExitOk;
}

// ---- toy-train ----

struct ToyTrainOptions {
  std::string config;
  std::string out_dir;
  int iters = 0;
  double lr = 0.0;
  std::uint64_t seed = 0;
  std::string preset;
  std::string loss_kind;
  CLI::Option* iters_opt = nullptr;
  CLI::Option* lr_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
};

std::string LossTraceCsv(const TrainResult& r) {
  std::ostringstream csv;
  csv << "iteration,lr,loss\n";
  for (std::size_t i = 0; i < r.loss_trace.size(); ++i) {
    csv << i << ',' << Num(r.lr_trace[i]) << ',' << Num(r.loss_trace[i]) << '\n';
  }
  return csv.str();
}

// Long format: one record per line so per-class, per-pair and global
// figures share a single file.
std::string Fig3Csv(const Fig3Report& f) {
  std::ostringstream csv;
  csv << "record,class,other,value\n";
  for (std::size_t c = 0; c < f.classes.size(); ++c) {
    csv << "class_mean_deg," << c << ",," << Num(f.classes[c].mean_deg) << '\n';
    csv << "class_p95_deg," << c << ",," << Num(f.classes[c].p95_deg) << '\n';
  }
  for (Eigen::Index i = 0; i < f.separation_deg.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < f.separation_deg.cols(); ++j) {
      csv << "separation_deg," << i << ',' << j << ',' << Num(f.separation_deg(i, j)) << '\n';
    }
  }
  csv << "min_separation_deg,,," << Num(f.min_separation_deg) << '\n';
  csv << "max_p95_deg,,," << Num(f.max_p95_deg) << '\n';
  csv << "gap_deg,,," << Num(f.gap_deg) << '\n';
  return csv.str();
}

std::string SnapshotCsv(const TrainResult& r) {
  std::ostringstream csv;
  csv << "iteration,bin_start_deg,count\n";
  for (const ThetaSnapshot& s : r.snapshots) {
    for (std::size_t b = 0; b < s.counts.size(); ++b) {
      csv << s.iteration << ',' << Num(static_cast<double>(b) * s.bin_width_deg) << ',' << s.counts[b] << '\n';
    }
  }
  return csv.str();
}

int RunToyTrain(const ToyTrainOptions& o, std::ostream& out) {
  RunConfig cfg = LoadRunConfig(o.config);
  if (o.iters_opt->count() > 0) cfg.train.total_iters = o.iters;
  if (o.lr_opt->count() > 0) cfg.train.lr = o.lr;
  if (o.seed_opt->count() > 0) cfg.train.seed = o.seed;
  if (!o.preset.empty()) {
    const auto p = ParsePreset(o.preset);
    if (!p) throw Error(ErrorKind::kConfig, "unknown preset '" + o.preset + "'");
    cfg.train.margin = PresetSpec(*p);
    cfg.margin_name = o.preset;
  }
  if (!o.loss_kind.empty()) {
    const auto kind = ParseLossKind(o.loss_kind);
    if (!kind) throw Error(ErrorKind::kConfig, "unknown loss kind '" + o.loss_kind + "'");
    cfg.train.loss_kind = *kind;
  }
  ValidateTrainConfig(cfg.train);

  const std::string started = UtcNow();
  const Dataset train = SplitDataset(SynthDataset(cfg.dataset), cfg.train_fraction, cfg.split_seed).first;
  const TrainResult result = Train(cfg.train, train);
  const Fig3Report fig3 = MakeFig3Report(result.model.net, train);

  const fs::path dir = ResolveOutDir(o.out_dir, cfg.report.output_dir);
  MakeDir(dir);
  SaveCheckpoint(result.model, dir / "model.ckpt");
  if (cfg.report.loss_trace) WriteFile(dir / "loss_trace.csv", LossTraceCsv(result));
  if (cfg.report.fig3) WriteFile(dir / "fig3_report.csv", Fig3Csv(fig3));
  if (cfg.report.snapshots) WriteFile(dir / "theta_snapshots.csv", SnapshotCsv(result));

  const double ratio = result.final_full_loss / result.initial_full_loss;
  std::ostringstream summary;
  summary << "margin " << cfg.margin_name << " loss_kind " << LossKindName(cfg.train.loss_kind) << '\n'
          << "initial_loss " << Num(result.initial_full_loss) << '\n'
          << "final_loss " << Num(result.final_full_loss) << '\n'
          << "loss_ratio " << Num(ratio) << (ratio < 0.1 ? " converged" : " not-converged") << '\n'
          << "gap_deg " << Num(fig3.gap_deg) << '\n';
  WriteFile(dir / "run.log", "started " + started + "\nfinished " + UtcNow() + "\nconfig " + o.config + "\n" +
                                 summary.str());
  out << summary.str() << "outputs " << dir.string() << '\n';
  return kExitOk;
}

// ---- stats ----

struct StatsOptions {
  std::string checkpoint;
  std::string config;
  std::string out_dir;
};

int RunStats(const StatsOptions& o, std::ostream& out) {
  const RunConfig cfg = LoadRunConfig(o.config);
  const Model model = LoadCheckpoint(o.checkpoint);
  if (model.net.input_dim() != cfg.dataset.input_dim || model.centres.cols() != cfg.dataset.n_classes) {
    throw Error(ErrorKind::kDimensionMismatch, "checkpoint shapes do not match the dataset section of the config");
  }
  const Dataset held_out = SplitDataset(SynthDataset(cfg.dataset), cfg.train_fraction, cfg.split_seed).second;
  const EmbeddingBatch emb = NormalizeRows(Forward(model.net, held_out.inputs));
  std::optional<CentreMatrix> learned;
  if (cfg.train.loss_kind != LossKind::kTripletOnly) learned = NormalizeColumns(model.centres);

  const AngleReport report = ComputeAngleReport(emb, held_out.labels, learned);
  const PairSet pairs = SamplePairs(emb, held_out.labels, cfg.report.negative_pairs, cfg.train.seed);
  const PairHistogram hist = HistogramPairs(pairs, cfg.report.histogram_bin_deg);
  const VerificationResult verification = VerificationAccuracy(pairs);

  auto opt = [](const std::optional<double>& v) { return v ? Num(*v) : std::string("-"); };
  std::ostringstream report_csv;
  report_csv << "w_ec_deg,w_inter_deg,intra_deg,inter_deg,verification_accuracy,threshold_deg,overlap_mass,"
                "positive_pairs,negative_pairs\n"
             << opt(report.w_ec) << ',' << opt(report.w_inter) << ',' << Num(report.intra) << ','
             << Num(report.inter) << ',' << Num(verification.accuracy) << ',' << Num(verification.threshold_deg)
             << ',' << Num(OverlapMass(hist)) << ',' << pairs.positives.size() << ',' << pairs.negatives.size()
             << '\n';
  std::ostringstream hist_csv;
  hist_csv << "bin_start_deg,pos_count,neg_count\n";
  for (std::size_t b = 0; b < hist.positive.size(); ++b) {
    hist_csv << Num(hist.bin_start(b)) << ',' << hist.positive[b] << ',' << hist.negative[b] << '\n';
  }

  const fs::path dir = ResolveOutDir(o.out_dir, cfg.report.output_dir);
  MakeDir(dir);
  WriteFile(dir / "angle_report.csv", report_csv.str());
  WriteFile(dir / "pair_histogram.csv", hist_csv.str());
  out << report_csv.str();
  return kExitOk;
}

// ---- capacity ----

struct CapacityOptions {
  std::vector<int> dims = {2, 128};
  std::vector<long> counts = {10, 100, 10000};
  bool mc = false;
  int trials = 20;
  std::uint64_t seed = 1;
  std::string out;
};

int RunCapacity(const CapacityOptions& o, std::ostream& out) {
  std::set<std::pair<int, long>> grid;
  for (int d : o.dims) {
    for (long n : o.counts) {
      if (d < 2 || n < 2) throw Error(ErrorKind::kBadRange, "capacity needs d >= 2 and n >= 2");
      grid.emplace(d, n);
    }
  }
  if (o.mc && o.trials < 1) throw Error(ErrorKind::kBadRange, "--trials must be >= 1");
  std::ostringstream csv;
  csv << "d,n,radians,degrees";
  if (o.mc) csv << ",mc_radians,mc_degrees,mc_stddev_radians,mc_trials";
  csv << '\n';
  for (const auto& [d, n] : grid) {
    const double rad = ExpectedNearestSeparation(d, static_cast<double>(n));
    csv << d << ',' << n << ',' << Num(rad) << ',' << Num(rad * kDegPerRad);
    if (o.mc) {
      const SeparationEstimate mc = MonteCarloNearestSeparation(d, static_cast<int>(n), o.trials, o.seed);
      csv << ',' << Num(mc.mean) << ',' << Num(mc.mean * kDegPerRad) << ',' << Num(mc.stddev) << ',' << mc.trials;
    }
    csv << '\n';
  }
  Emit(o.out, csv.str(), out);
  return kExitOk;
}

// ---- shard-bench ----

struct ShardBenchOptions {
  long batch = 512;
  long dim = 512;
  long classes = 1000000;
  std::vector<int> shards = {1, 2, 8};
  int bytes = 4;
  double flops = 11e12;
  double link = 10e9;
  int toy_batch = 16;
  int toy_dim = 16;
  int toy_classes = 64;
  std::uint64_t seed = 1;
  bool threaded = false;
  std::string out;
};

int RunShardBench(const ShardBenchOptions& o, std::ostream& out) {
  if (o.batch < 1 || o.dim < 2 || o.classes < 1 || o.bytes < 1) {
    throw Error(ErrorKind::kBadRange, "shard-bench needs N >= 1, d >= 2, n >= 1, bytes >= 1");
  }
  const DeviceRates rates{o.flops, o.link};
  std::ostringstream csv;
  csv << "k,n,per_device_W_MB,per_device_score_MB,comm_MB_per_step,est_samples_per_sec\n";
  for (int k : o.shards) {
    const ShardPlan plan = ShardPlan::Make(static_cast<int>(o.classes), k);
    const CostModel cost = CostReport(o.batch, o.dim, o.classes, k, o.bytes);
    const ThroughputEstimate tp = ThroughputModel(plan, o.batch, o.dim, rates, o.bytes);
    csv << k << ',' << o.classes << ',' << Num(ToMB(cost.per_device_w_bytes)) << ','
        << Num(ToMB(cost.per_device_score_bytes)) << ',' << Num(ToMB(cost.CommunicatedBytes())) << ','
        << Num(tp.samples_per_second) << '\n';
  }
  Emit(o.out, csv.str(), out);

  Rng rng(o.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> label(0, o.toy_classes - 1);
  Matrix features(o.toy_batch, o.toy_dim);
  Matrix centres(o.toy_dim, o.toy_classes);
  for (Eigen::Index i = 0; i < features.size(); ++i) features.data()[i] = gauss(rng);
  for (Eigen::Index i = 0; i < centres.size(); ++i) centres.data()[i] = gauss(rng);
  Labels labels(o.toy_batch);
  for (int& y : labels) y = label(rng);

  const Execution execution = o.threaded ? Execution::kThreaded : Execution::kSerial;
  bool all_pass = true;
  for (int k : o.shards) {
    if (k > o.toy_classes) {
      out << "EQUIV k=" << k << " SKIP more shards than toy classes\n";
      continue;
    }
    const ShardEquivalence eq =
        CompareWithDense(features, centres, labels, PresetSpec(Preset::kArcFace), k, execution);
    const bool pass = eq.MaxRelError() <= kShardTolerance && (k != 1 || eq.bitwise);
    all_pass = all_pass && pass;
    out << "EQUIV k=" << k << (pass ? " PASS" : " FAIL") << " max_rel_error=" << Num(eq.MaxRelError())
        << " bitwise=" << (eq.bitwise ? "yes" : "no") << '\n';
  }
  return all_pass ? kExitOk : kExitNumerical;
}

// ---- gradcheck ----

int RunGradcheckCommand(const GradcheckOptions& o, const std::string& path, std::ostream& out) {
  const std::vector<GradcheckRow> rows = RunGradcheck(o);
  std::ostringstream csv;
  csv << "loss_kind,margin,instances,max_rel_error,verdict\n";
  bool all_pass = true;
  for (const GradcheckRow& r : rows) {
    all_pass = all_pass && r.pass;
    csv << r.loss_kind << ',' << r.margin << ',' << r.instances << ',' << Num(r.max_rel_error) << ','
        << (r.pass ? "PASS" : "FAIL") << '\n';
  }
  Emit(path, csv.str(), out);
  return all_pass ? kExitOk : kExitNumerical;
}

}  // namespace

int ExitCodeFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIo:
    case ErrorKind::kChecksumMismatch:
      return kExitIo;
    case ErrorKind::kNonFiniteInput:
    case ErrorKind::kNonFiniteGradient:
    case ErrorKind::kDivergenceDetected:
    case ErrorKind::kRejectionExhausted:
    case ErrorKind::kZeroVector:
    case ErrorKind::kNotUnitNorm:
    case ErrorKind::kEmptyClass:
    case ErrorKind::kNoPositivePairs:
    case ErrorKind::kEmptyPairSet:
      return kExitNumerical;
    default:
      return kExitUsage;
  }
}

int RunCli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Angular-margin loss lab and model-parallel classification head simulator", "arclab"};
  app.require_subcommand(1);
  std::function<int()> action;

  CurvesOptions curves;
  auto* c = app.add_subcommand("curves", "Target-logit curves (or decision boundaries) per margin preset");
  c->add_option("--presets", curves.presets, "Comma-separated preset names (default: all six)")->delimiter(',');
  c->add_option("--lo", curves.lo, "Grid start in degrees")->capture_default_str();
  c->add_option("--hi", curves.hi, "Grid end in degrees")->capture_default_str();
  c->add_option("--step", curves.step, "Grid step in degrees")->capture_default_str();
  c->add_flag("--boundary", curves.boundary, "Emit the binary decision boundary theta1(theta2) instead");
  c->add_option("--out", curves.out, "Write CSV here instead of stdout");
  c->callback([&] { action = [&] { return RunCurves(curves, out); }; });

  ToyTrainOptions train;
  auto* t = app.add_subcommand("toy-train", "Train the toy embedding net from a YAML config");
  t->add_option("config", train.config, "Run config (YAML)")->required();
  t->add_option("--out-dir", train.out_dir, "Output directory (overrides config and $ARCLAB_OUT_DIR)");
  train.iters_opt = t->add_option("--iters", train.iters, "Override train.total_iters");
  train.lr_opt = t->add_option("--lr", train.lr, "Override train.lr");
  train.seed_opt = t->add_option("--seed", train.seed, "Override train.seed");
  t->add_option("--preset", train.preset, "Override the margin with a preset");
  t->add_option("--loss-kind", train.loss_kind, "Override train.loss_kind");
  t->callback([&] { action = [&] { return RunToyTrain(train, out); }; });

  StatsOptions stats;
  auto* s = app.add_subcommand("stats", "Angle statistics and pair histogram on the held-out split");
  s->add_option("--checkpoint", stats.checkpoint, "Checkpoint written by toy-train")->required();
  s->add_option("--config", stats.config, "Run config the checkpoint was trained with")->required();
  s->add_option("--out-dir", stats.out_dir, "Output directory (overrides config and $ARCLAB_OUT_DIR)");
  s->callback([&] { action = [&] { return RunStats(stats, out); }; });

  CapacityOptions capacity;
  auto* p = app.add_subcommand("capacity", "Expected nearest angle among n random centres in d dimensions");
  p->add_option("--d", capacity.dims, "Comma-separated dimensions")->delimiter(',')->capture_default_str();
  p->add_option("--n", capacity.counts, "Comma-separated class counts")->delimiter(',')->capture_default_str();
  p->add_flag("--mc", capacity.mc, "Append Monte-Carlo estimates");
  p->add_option("--trials", capacity.trials, "Monte-Carlo trials per row")->capture_default_str();
  p->add_option("--seed", capacity.seed, "Monte-Carlo seed")->capture_default_str();
  p->add_option("--out", capacity.out, "Write CSV here instead of stdout");
  p->callback([&] { action = [&] { return RunCapacity(capacity, out); }; });

  ShardBenchOptions bench;
  auto* b = app.add_subcommand("shard-bench", "Cost model at full shapes plus sharded-vs-dense check at toy shapes");
  b->add_option("--batch", bench.batch, "Batch size N for the cost rows")->capture_default_str();
  b->add_option("--dim", bench.dim, "Embedding dimension d for the cost rows")->capture_default_str();
  b->add_option("--classes", bench.classes, "Class count n for the cost rows")->capture_default_str();
  b->add_option("--k", bench.shards, "Comma-separated shard counts")->delimiter(',')->capture_default_str();
  b->add_option("--bytes", bench.bytes, "Bytes per scalar")->capture_default_str();
  b->add_option("--flops", bench.flops, "Per-device FLOP/s for the throughput estimate")->capture_default_str();
  b->add_option("--link", bench.link, "Link bytes/s for the throughput estimate")->capture_default_str();
  b->add_option("--toy-batch", bench.toy_batch, "N for the equivalence check")->capture_default_str();
  b->add_option("--toy-dim", bench.toy_dim, "d for the equivalence check")->capture_default_str();
  b->add_option("--toy-classes", bench.toy_classes, "n for the equivalence check")->capture_default_str();
  b->add_option("--seed", bench.seed, "Seed for the equivalence instance")->capture_default_str();
  b->add_flag("--threaded", bench.threaded, "Run shards on worker threads");
  b->add_option("--out", bench.out, "Write the cost CSV here instead of stdout");
  b->callback([&] { action = [&] { return RunShardBench(bench, out); }; });

  GradcheckOptions grad;
  grad.instances = 100;
  std::string grad_out;
  auto* g = app.add_subcommand("gradcheck", "Central finite differences against every analytic loss gradient");
  g->add_option("--seed", grad.seed, "Instance seed")->capture_default_str();
  g->add_option("--instances", grad.instances, "Instances per loss row")->capture_default_str();
  g->add_option("--batch", grad.batch, "Samples per instance")->capture_default_str();
  g->add_option("--dim", grad.dim, "Embedding dimension")->capture_default_str();
  g->add_option("--classes", grad.classes, "Class count")->capture_default_str();
  g->add_option("--perturb", grad.perturb, "Add this to every analytic gradient entry (harness self-test)");
  g->add_option("--out", grad_out, "Write CSV here instead of stdout");
  g->callback([&] { action = [&] { return RunGradcheckCommand(grad, grad_out, out); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }
  try {
    return action();
  } catch (const Error& e) {
    err << "arclab: " << e.what() << '\n';
    return ExitCodeFor(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "arclab: " << e.what() << '\n';
    return kExitIo;
  }
}

}  // namespace arclab
