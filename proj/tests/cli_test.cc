#include "tembed/cli.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "tembed/errors.h"
#include "tembed/io.h"

namespace tembed {
namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            ("tembed_cli_test_" +
             std::string(::testing::UnitTest::GetInstance()
                             ->current_test_info()
                             ->name()));
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  ExperimentConfig config() const {
    return ExperimentConfig::parse(R"({
      "task": "classification",
      "data": {"dir": "data",
               "synthetic": {"n_channels": 2, "seed": 5},
               "n_train": 30, "n_test": 12},
      "te": {"dim": 4, "max_time": 48},
      "models": [{"alias": "cat TE", "family": "lstm", "hidden": 3,
                  "head_widths": [4], "te_mode": "cat_te"}],
      "training": {"epochs": 1, "batch_size": 10, "folds": 2,
                   "runs_per_fold": 2},
      "sweep": {"keep_fractions": [1.0, 0.5]},
      "seed": 2,
      "output_dir": "out"
    })",
                                   root_);
  }

  static std::string slurp(const fs::path& p) { return read_file(p); }

  fs::path root_;
  std::ostringstream log_;
};

TEST_F(CliTest, GenIsByteIdenticalAndRefusesOverwrite) {
  const auto cfg = config();
  cmd_gen(cfg, {}, log_);
  const auto files = DataFiles::in(root_ / "data");
  const std::string obs = slurp(files.train_observations);
  const std::string manifest = slurp(files.manifest);
  EXPECT_THROW(cmd_gen(cfg, {}, log_), InputError);
  CommandOptions force;
  force.force = true;
  cmd_gen(cfg, force, log_);
  EXPECT_EQ(slurp(files.train_observations), obs);
  EXPECT_EQ(slurp(files.manifest), manifest);
  EXPECT_NE(log_.str().find("positive rate"), std::string::npos);

  // Label rows match the reported episode counts.
  const std::string labels = slurp(files.train_labels);
  EXPECT_EQ(std::count(labels.begin(), labels.end(), '\n'), 1 + 30);
  EXPECT_NE(manifest.find("\"n_episodes\": 42"), std::string::npos);
}

TEST_F(CliTest, GenSeedOverrideChangesData) {
  const auto cfg = config();
  cmd_gen(cfg, {}, log_);
  CommandOptions other;
  other.out = root_ / "other";
  other.seed = 99;
  cmd_gen(cfg, other, log_);
  EXPECT_NE(slurp(root_ / "data" / "train_observations.csv"),
            slurp(root_ / "other" / "train_observations.csv"));
}

TEST_F(CliTest, TrainPreflightNamesMissingFile) {
  const auto cfg = config();
  cmd_gen(cfg, {}, log_);
  fs::remove(root_ / "data" / "test_labels.csv");
  try {
    cmd_train(cfg, {}, log_);
    FAIL() << "expected pre-flight error";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("test_labels.csv"), std::string::npos)
        << e.what();
  }
}

TEST_F(CliTest, TrainTwiceGivesIdenticalReportAndSweepMatches) {
  const auto cfg = config();
  cmd_gen(cfg, {}, log_);
  cmd_train(cfg, {}, log_);
  const std::string report = slurp(root_ / "out" / "report.jsonl");
  const std::string summary = slurp(root_ / "out" / "summary.csv");
  EXPECT_TRUE(fs::exists(root_ / "out" / "models" / "cat_TE" / "fold0.params"));
  EXPECT_THROW(cmd_train(cfg, {}, log_), InputError);
  CommandOptions force;
  force.force = true;
  cmd_train(cfg, force, log_);
  EXPECT_EQ(slurp(root_ / "out" / "report.jsonl"), report);
  EXPECT_NE(log_.str().find("cat TE,auc_roc,"), std::string::npos);

  cmd_sweep(cfg, {}, log_);
  const std::string sweep = slurp(root_ / "out" / "sweep.csv");
  std::istringstream lines(sweep);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "model,fraction,metric,value,std");
  std::vector<std::string> rows;
  while (std::getline(lines, line)) rows.push_back(line);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0].rfind("cat TE,1,auc_roc,", 0), 0u);
  EXPECT_EQ(rows[2].rfind("cat TE,0.5,auc_roc,", 0), 0u);
  // Fraction 1.0 reproduces the trained test metric.
  const auto mean_of = [](const std::string& row, int field) {
    std::vector<std::string> parts;
    std::stringstream ss(row);
    std::string p;
    while (std::getline(ss, p, ',')) parts.push_back(p);
    return std::stod(parts.at(field));
  };
  std::istringstream summary_lines(summary);
  std::getline(summary_lines, line);
  std::getline(summary_lines, line);
  EXPECT_EQ(line.rfind("cat TE,auc_roc,", 0), 0u);
  EXPECT_DOUBLE_EQ(mean_of(rows[0], 3), mean_of(line, 2));
}

TEST_F(CliTest, SweepWithoutModelsFails) {
  const auto cfg = config();
  cmd_gen(cfg, {}, log_);
  EXPECT_THROW(cmd_sweep(cfg, {}, log_), InputError);
}

TEST_F(CliTest, SweepRejectsBadFractions) {
  const auto cfg = config();
  cmd_gen(cfg, {}, log_);
  CommandOptions o;
  o.keep_fractions = std::vector<double>{0.5, 0.5};
  EXPECT_THROW(cmd_sweep(cfg, o, log_), ConfigError);
  o.keep_fractions = std::vector<double>{0.0};
  EXPECT_THROW(cmd_sweep(cfg, o, log_), ConfigError);
}

TEST_F(CliTest, EncodeAppendsEmbeddingColumns) {
  const auto in = root_ / "t.csv";
  std::ofstream(in) << "time_hours\n0\n1\n";
  const auto cfg = EncoderConfig::temporal(4, 48.0);
  cmd_encode(in, root_ / "o.csv", cfg, false);
  const std::string out = slurp(root_ / "o.csv");
  std::istringstream lines(out);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "time_hours,te_0,te_1,te_2,te_3");
  std::getline(lines, line);
  EXPECT_EQ(line, "0,0,1,0,1");
  std::getline(lines, line);
  const auto v = te(1.0, cfg);
  std::string expect = "1";
  for (int k = 0; k < 4; ++k) expect += "," + format_double(v[k]);
  EXPECT_EQ(line, expect);
  double parsed = 0;
  ASSERT_TRUE(parse_double(format_double(v[2]), parsed));
  EXPECT_EQ(parsed, v[2]);
  EXPECT_THROW(cmd_encode(in, root_ / "o.csv", cfg, false), InputError);
}

TEST_F(CliTest, EncodeEmptyAndBadInput) {
  const auto cfg = EncoderConfig::temporal(2, 48.0);
  std::ofstream(root_ / "empty.csv").close();
  cmd_encode(root_ / "empty.csv", root_ / "e.csv", cfg, false);
  EXPECT_EQ(slurp(root_ / "e.csv"), "time_hours,te_0,te_1\n");
  std::ofstream(root_ / "bad.csv") << "t\n1\nabc\n";
  try {
    cmd_encode(root_ / "bad.csv", root_ / "b.csv", cfg, false);
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find(":3"), std::string::npos) << e.what();
  }
  EXPECT_FALSE(fs::exists(root_ / "b.csv"));
}

TEST(AliasDirTest, SafeNames) {
  EXPECT_EQ(alias_dir_name("catTE + LSTM"), "catTE___LSTM");
  EXPECT_EQ(alias_dir_name("a/b"), "a_b");
}

}  // namespace
}  // namespace tembed
