#include "arclab/config.h"

#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "arclab/error.h"

namespace arclab {
namespace {

std::string Where(const YAML::Mark& mark) {
  return mark.is_null() ? std::string("?") : "line " + std::to_string(mark.line + 1);
}

[[noreturn]] void Fail(const YAML::Mark& mark, const std::string& what) {
  throw Error(ErrorKind::kConfig, Where(mark) + ": " + what);
}

// Reads keys out of one mapping and rejects whatever was not read.
class Section {
 public:
  Section(const YAML::Node& node, std::string name) : node_(node), name_(std::move(name)) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) Fail(node_.Mark(), "section '" + name_ + "' must be a mapping");
  }

  bool Has(const char* key) const { return node_ && node_.IsMap() && node_[key]; }

  template <typename T>
  bool Read(const char* key, T& out) {
    if (!Has(key)) return false;
    seen_.insert(key);
    const YAML::Node value = node_[key];
    try {
      out = value.as<T>();
    } catch (const YAML::Exception&) {
      Fail(value.Mark(), "bad value for '" + name_ + "." + key + "'");
    }
    return true;
  }

  YAML::Mark MarkOf(const char* key) const { return Has(key) ? node_[key].Mark() : node_.Mark(); }

  void Finish() const {
    if (!node_ || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!seen_.count(key)) Fail(kv.first.Mark(), "unknown key '" + name_ + "." + key + "'");
    }
  }

 private:
  const YAML::Node node_;
  std::string name_;
  std::set<std::string> seen_;
};

void ParseDataset(const YAML::Node& node, RunConfig& cfg) {
  Section s(node, "dataset");
  s.Read("n_classes", cfg.dataset.n_classes);
  s.Read("samples_per_class", cfg.dataset.samples_per_class);
  s.Read("input_dim", cfg.dataset.input_dim);
  s.Read("kappa", cfg.dataset.kappa);
  s.Read("seed", cfg.dataset.seed);
  s.Read("train_fraction", cfg.train_fraction);
  s.Read("split_seed", cfg.split_seed);
  s.Finish();
  if (cfg.dataset.n_classes < 2) Fail(s.MarkOf("n_classes"), "n_classes must be >= 2");
  if (cfg.dataset.samples_per_class < 2) Fail(s.MarkOf("samples_per_class"), "samples_per_class must be >= 2");
  if (cfg.dataset.input_dim < 2) Fail(s.MarkOf("input_dim"), "input_dim must be >= 2");
  if (!(cfg.dataset.kappa > 0.0)) Fail(s.MarkOf("kappa"), "kappa must be > 0");
  if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0)) {
    Fail(s.MarkOf("train_fraction"), "train_fraction must lie in (0, 1)");
  }
}

void ParseTrain(const YAML::Node& node, RunConfig& cfg) {
  Section s(node, "train");
  TrainConfig& t = cfg.train;
  s.Read("hidden_dim", t.hidden_dim);
  s.Read("embedding_dim", t.embedding_dim);
  s.Read("lr", t.lr);
  s.Read("lr_drops", t.lr_drops);
  s.Read("total_iters", t.total_iters);
  s.Read("momentum", t.momentum);
  s.Read("weight_decay", t.weight_decay);
  s.Read("batch_size", t.batch_size);
  s.Read("seed", t.seed);
  s.Read("penalty_weight", t.penalty_weight);
  s.Read("triplet_margin", t.triplet_margin);
  s.Read("snapshot_bin_deg", t.snapshot_bin_deg);
  std::string kind;
  if (s.Read("loss_kind", kind)) {
    const auto parsed = ParseLossKind(kind);
    if (!parsed) Fail(s.MarkOf("loss_kind"), "unknown loss_kind '" + kind + "'");
    t.loss_kind = *parsed;
  }
  s.Finish();
  try {
    TrainConfig probe = t;
    probe.margin = MarginSpec{};
    ValidateTrainConfig(probe);
  } catch (const Error& e) {
    Fail(node.Mark(), std::string("train: ") + e.what());
  }
}

void ParseMargin(const YAML::Node& node, RunConfig& cfg) {
  Section s(node, "margin");
  std::string preset;
  const bool has_preset = s.Read("preset", preset);
  const bool explicit_form = s.Has("m1") || s.Has("m2") || s.Has("m3");
  if (has_preset && explicit_form) Fail(s.MarkOf("preset"), "give either a preset or m1/m2/m3, not both");
  MarginSpec spec = PresetSpec(Preset::kArcFace);
  cfg.margin_name = "arcface";
  if (has_preset) {
    const auto p = ParsePreset(preset);
    if (!p) Fail(s.MarkOf("preset"), "unknown preset '" + preset + "'");
    spec = PresetSpec(*p);
    cfg.margin_name = preset;
  } else if (explicit_form) {
    spec = MarginSpec{1.0, 0.0, 0.0, 64.0};
    s.Read("m1", spec.m1);
    s.Read("m2", spec.m2);
    s.Read("m3", spec.m3);
    cfg.margin_name = "custom";
  }
  s.Read("s", spec.s);
  s.Finish();
  try {
    ValidateMarginSpec(spec);
  } catch (const Error& e) {
    Fail(node.Mark(), std::string("margin: ") + e.what());
  }
  cfg.train.margin = spec;
}

void ParseReport(const YAML::Node& node, RunConfig& cfg) {
  Section s(node, "report");
  ReportConfig& r = cfg.report;
  s.Read("output_dir", r.output_dir);
  s.Read("loss_trace", r.loss_trace);
  s.Read("fig3", r.fig3);
  s.Read("snapshots", r.snapshots);
  s.Read("histogram_bin_deg", r.histogram_bin_deg);
  long n_neg = 0;
  if (s.Read("negative_pairs", n_neg)) {
    if (n_neg < 1) Fail(s.MarkOf("negative_pairs"), "negative_pairs must be >= 1");
    r.negative_pairs = n_neg;
  }
  s.Finish();
  if (!(r.histogram_bin_deg > 0.0 && r.histogram_bin_deg <= 180.0)) {
    Fail(s.MarkOf("histogram_bin_deg"), "histogram_bin_deg must lie in (0, 180]");
  }
}

}  // namespace

RunConfig ParseRunConfig(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw Error(ErrorKind::kConfig, Where(e.mark) + ": " + e.msg);
  }
  RunConfig cfg;
  if (root.IsNull()) return cfg;
  if (!root.IsMap()) Fail(root.Mark(), "top level must be a mapping");
  static const std::set<std::string> kSections = {"dataset", "train", "margin", "report"};
  for (const auto& kv : root) {
    const auto key = kv.first.as<std::string>();
    if (!kSections.count(key)) Fail(kv.first.Mark(), "unknown section '" + key + "'");
  }
  const YAML::Node& sections = root;
  ParseDataset(sections["dataset"], cfg);
  ParseTrain(sections["train"], cfg);
  ParseMargin(sections["margin"], cfg);
  ParseReport(sections["report"], cfg);
  return cfg;
}

RunConfig LoadRunConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return ParseRunConfig(text.str());
}

}  // namespace arclab
