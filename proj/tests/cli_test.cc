#include "arclab/commands.h"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

namespace arclab {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome Invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "arclab");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = RunCli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> Lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

std::vector<std::string> Split(const std::string& line) {
  std::vector<std::string> cells;
  std::istringstream in(line);
  for (std::string cell; std::getline(in, cell, ',');) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string Slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

class CliDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("arclab_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // A small, fast run.
  fs::path WriteConfig(const std::string& extra_train = "") {
    const fs::path p = dir_ / "run.yaml";
    std::ofstream(p) << "dataset:\n  n_classes: 4\n  samples_per_class: 60\n  input_dim: 6\n"
                     << "train:\n  hidden_dim: 16\n  embedding_dim: 3\n  total_iters: 40\n"
                     << "  lr_drops: [20, 30]\n  batch_size: 64\n" << extra_train
                     << "report:\n  output_dir: " << (dir_ / "from_config").string() << "\n";
    return p;
  }

  fs::path dir_;
};

TEST(CliUsage, NoSubcommandIsUsageError) { EXPECT_EQ(Invoke({}).code, kExitUsage); }

TEST(CliUsage, UnknownFlagIsUsageError) { EXPECT_EQ(Invoke({"curves", "--nope"}).code, kExitUsage); }

TEST(CliUsage, HelpSucceeds) { EXPECT_EQ(Invoke({"--help"}).code, kExitOk); }

TEST(ExitCodes, Mapping) {
  EXPECT_EQ(ExitCodeFor(ErrorKind::kConfig), kExitUsage);
  EXPECT_EQ(ExitCodeFor(ErrorKind::kBadRange), kExitUsage);
  EXPECT_EQ(ExitCodeFor(ErrorKind::kDivergenceDetected), kExitNumerical);
  EXPECT_EQ(ExitCodeFor(ErrorKind::kZeroVector), kExitNumerical);
  EXPECT_EQ(ExitCodeFor(ErrorKind::kIo), kExitIo);
  EXPECT_EQ(ExitCodeFor(ErrorKind::kChecksumMismatch), kExitIo);
}

TEST(Curves, HeaderAndKnownValues) {
  const Outcome r = Invoke({"curves", "--lo", "0", "--hi", "180", "--step", "1"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto lines = Lines(r.out);
  ASSERT_EQ(lines.size(), 182u);
  EXPECT_EQ(lines[0], "theta_deg,softmax,sphereface,arcface,cosface,cm1,cm2");
  const auto at60 = Split(lines[61]);
  EXPECT_EQ(std::stod(at60[0]), 60.0);
  EXPECT_NEAR(std::stod(at60[1]), 0.5, 1e-15);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = Split(lines[i]);
    for (std::size_t c = 2; c < cells.size(); ++c) EXPECT_LE(std::stod(cells[c]), std::stod(cells[1]) + 1e-12);
  }
}

TEST(Curves, BoundaryHasEmptyCellsWhereUndefined) {
  const Outcome r = Invoke({"curves", "--boundary", "--presets", "softmax,arcface", "--lo", "0", "--hi", "180"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto lines = Lines(r.out);
  EXPECT_EQ(lines[0], "theta2_deg,softmax,arcface");
  EXPECT_EQ(Split(lines[1]).back(), "");
  EXPECT_NEAR(std::stod(Split(lines[91])[1]), 90.0, 1e-9);
}

TEST(Curves, BadArgumentsRejected) {
  EXPECT_EQ(Invoke({"curves", "--lo", "90", "--hi", "10"}).code, kExitUsage);
  EXPECT_EQ(Invoke({"curves", "--presets", "bogus"}).code, kExitUsage);
}

TEST_F(CliDir, CurvesToFile) {
  const fs::path out = dir_ / "c.csv";
  const Outcome r = Invoke({"curves", "--out", out.string()});
  ASSERT_EQ(r.code, kExitOk);
  EXPECT_TRUE(r.out.empty());
  EXPECT_EQ(Lines(Slurp(out)).size(), 82u);
}

TEST(Capacity, CircleRowAndOrdering) {
  const Outcome r = Invoke({"capacity", "--d", "128,2", "--n", "100,10,10"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto lines = Lines(r.out);
  ASSERT_EQ(lines.size(), 5u);
  EXPECT_EQ(lines[0], "d,n,radians,degrees");
  EXPECT_EQ(Split(lines[1])[0], "2");
  EXPECT_EQ(Split(lines[1])[1], "10");
  EXPECT_NEAR(std::stod(Split(lines[1])[2]), 0.06283, 5e-6);
  EXPECT_EQ(Split(lines[3])[0], "128");
}

TEST(Capacity, MonteCarloColumns) {
  const Outcome r = Invoke({"capacity", "--d", "2", "--n", "10", "--mc", "--trials", "50"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto lines = Lines(r.out);
  EXPECT_EQ(lines[0], "d,n,radians,degrees,mc_radians,mc_degrees,mc_stddev_radians,mc_trials");
  EXPECT_EQ(Split(lines[1]).back(), "50");
}

TEST(Capacity, RejectsDimensionOne) { EXPECT_NE(Invoke({"capacity", "--d", "1"}).code, kExitOk); }

TEST(ShardBench, MillionClassRowAndEquivalence) {
  const Outcome r = Invoke({"shard-bench"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto lines = Lines(r.out);
  EXPECT_EQ(lines[0], "k,n,per_device_W_MB,per_device_score_MB,comm_MB_per_step,est_samples_per_sec");
  bool saw_eight = false;
  int passes = 0;
  for (const auto& line : lines) {
    if (line.rfind("8,1000000,", 0) == 0) {
      saw_eight = true;
      EXPECT_EQ(std::stod(Split(line)[2]), 256.0);
    }
    if (line.rfind("EQUIV", 0) == 0) {
      EXPECT_NE(line.find("PASS"), std::string::npos) << line;
      ++passes;
    }
  }
  EXPECT_TRUE(saw_eight);
  EXPECT_EQ(passes, 3);
  EXPECT_NE(r.out.find("EQUIV k=1 PASS max_rel_error=0 bitwise=yes"), std::string::npos);
}

TEST(ShardBench, ThreadedAlsoPasses) {
  EXPECT_EQ(Invoke({"shard-bench", "--threaded", "--k", "2,4"}).code, kExitOk);
}

TEST(Gradcheck, PassesAndFailsWhenPerturbed) {
  const Outcome ok = Invoke({"gradcheck", "--instances", "5"});
  EXPECT_EQ(ok.code, kExitOk) << ok.out;
  EXPECT_EQ(Lines(ok.out)[0], "loss_kind,margin,instances,max_rel_error,verdict");
  EXPECT_EQ(ok.out.find("FAIL"), std::string::npos);
  const Outcome bad = Invoke({"gradcheck", "--instances", "2", "--perturb", "1e-3"});
  EXPECT_EQ(bad.code, kExitNumerical);
  EXPECT_NE(bad.out.find("FAIL"), std::string::npos);
}

TEST_F(CliDir, ToyTrainMissingConfigWritesNothing) {
  const fs::path out = dir_ / "out";
  const Outcome r = Invoke({"toy-train", (dir_ / "absent.yaml").string(), "--out-dir", out.string()});
  EXPECT_EQ(r.code, kExitIo);
  EXPECT_FALSE(fs::exists(out));
}

TEST_F(CliDir, ToyTrainBadConfigIsUsageError) {
  const fs::path p = dir_ / "bad.yaml";
  std::ofstream(p) << "train:\n  lr: 0.1\n  speed: 3\n";
  const Outcome r = Invoke({"toy-train", p.string(), "--out-dir", (dir_ / "out").string()});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("line 3"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir_ / "out"));
}

TEST_F(CliDir, ToyTrainWritesArtifactsDeterministically) {
  const fs::path cfg = WriteConfig();
  const Outcome a = Invoke({"toy-train", cfg.string(), "--out-dir", (dir_ / "a").string()});
  const Outcome b = Invoke({"toy-train", cfg.string(), "--out-dir", (dir_ / "b").string()});
  ASSERT_EQ(a.code, kExitOk) << a.err;
  ASSERT_EQ(b.code, kExitOk) << b.err;
  for (const char* name : {"model.ckpt", "loss_trace.csv", "fig3_report.csv", "theta_snapshots.csv"}) {
    const std::string fa = Slurp(dir_ / "a" / name);
    EXPECT_FALSE(fa.empty()) << name;
    EXPECT_EQ(fa, Slurp(dir_ / "b" / name)) << name;
  }
  EXPECT_TRUE(fs::exists(dir_ / "a" / "run.log"));
  EXPECT_EQ(Lines(Slurp(dir_ / "a" / "loss_trace.csv")).size(), 41u);
  EXPECT_FALSE(fs::exists(dir_ / "from_config"));
}

TEST_F(CliDir, ToyTrainUsesConfigDirectoryWithoutFlag) {
  ASSERT_EQ(Invoke({"toy-train", WriteConfig().string()}).code, kExitOk);
  EXPECT_TRUE(fs::exists(dir_ / "from_config" / "model.ckpt"));
}

TEST_F(CliDir, ToyTrainDivergenceExitsNumerical) {
  const fs::path cfg = WriteConfig("  loss_kind: softmax-unnormalized\n");
  const Outcome r = Invoke({"toy-train", cfg.string(), "--lr", "1e8", "--out-dir", (dir_ / "d").string()});
  EXPECT_EQ(r.code, kExitNumerical);
  EXPECT_NE(r.err.find("DivergenceDetected"), std::string::npos) << r.err;
}

TEST_F(CliDir, StatsReportsAnglesInRange) {
  const fs::path cfg = WriteConfig();
  ASSERT_EQ(Invoke({"toy-train", cfg.string(), "--out-dir", (dir_ / "t").string()}).code, kExitOk);
  const Outcome r = Invoke({"stats", "--checkpoint", (dir_ / "t" / "model.ckpt").string(), "--config", cfg.string(),
                         "--out-dir", (dir_ / "s").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto lines = Lines(Slurp(dir_ / "s" / "angle_report.csv"));
  ASSERT_EQ(lines.size(), 2u);
  const auto cells = Split(lines[1]);
  for (int i = 0; i < 4; ++i) {
    EXPECT_GE(std::stod(cells[i]), 0.0);
    EXPECT_LE(std::stod(cells[i]), 180.0);
  }
  const double accuracy = std::stod(cells[4]);
  EXPECT_GE(accuracy, 0.0);
  EXPECT_LE(accuracy, 1.0);
  EXPECT_TRUE(fs::exists(dir_ / "s" / "pair_histogram.csv"));
}

TEST_F(CliDir, StatsMarksMissingCentresForTripletRuns) {
  const fs::path cfg = WriteConfig("  loss_kind: triplet-only\n");
  ASSERT_EQ(Invoke({"toy-train", cfg.string(), "--out-dir", (dir_ / "t").string()}).code, kExitOk);
  const Outcome r = Invoke({"stats", "--checkpoint", (dir_ / "t" / "model.ckpt").string(), "--config", cfg.string(),
                         "--out-dir", (dir_ / "s").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(Lines(r.out)[1].substr(0, 4), "-,-,");
}

TEST_F(CliDir, StatsRejectsCorruptCheckpoint) {
  const fs::path cfg = WriteConfig();
  ASSERT_EQ(Invoke({"toy-train", cfg.string(), "--out-dir", (dir_ / "t").string()}).code, kExitOk);
  const fs::path ckpt = dir_ / "t" / "model.ckpt";
  std::string bytes = Slurp(ckpt);
  bytes[bytes.size() / 2] ^= 0x01;
  std::ofstream(ckpt, std::ios::binary | std::ios::trunc) << bytes;
  const Outcome r = Invoke({"stats", "--checkpoint", ckpt.string(), "--config", cfg.string(), "--out-dir",
                         (dir_ / "s").string()});
  EXPECT_EQ(r.code, kExitIo);
  EXPECT_NE(r.err.find("ChecksumMismatch"), std::string::npos) << r.err;
}

}  // namespace
}  // namespace arclab
