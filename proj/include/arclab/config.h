#ifndef ARCLAB_CONFIG_H_
#define ARCLAB_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "arclab/autonet.h"

namespace arclab {

struct ReportConfig {
  std::string output_dir;  // empty: fall back to $ARCLAB_OUT_DIR, then "arclab_out"
  bool loss_trace = true;
  bool fig3 = true;
  bool snapshots = true;
  double histogram_bin_deg = 2.0;
  std::optional<long> negative_pairs;  // absent: min(all, 5 x positives)
};

struct RunConfig {
  SynthSpec dataset;
  double train_fraction = 0.8;
  std::uint64_t split_seed = 11;
  TrainConfig train;
  std::string margin_name = "arcface";  // preset name, or "custom"
  ReportConfig report;
};

// YAML with exactly the sections dataset / train / margin / report. Unknown
// keys, wrong types and bad values raise kConfig with the offending line.
// The margin section holds either `preset: <name>` or explicit m1/m2/m3;
// `s` may be given in both forms.
RunConfig ParseRunConfig(const std::string& text);
RunConfig LoadRunConfig(const std::filesystem::path& path);

}  // namespace arclab

#endif  // ARCLAB_CONFIG_H_
