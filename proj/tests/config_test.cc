#include "tembed/config.h"

#include <gtest/gtest.h>

#include "tembed/errors.h"

namespace tembed {
namespace {

const char* kMinimal = R"({
  "task": "regression",
  "data": {"dir": "data", "synthetic": {"task": "elapsed_regression"},
           "n_train": 10, "n_test": 5},
  "models": [{"alias": "LR", "family": "linreg"},
             {"alias": "SA", "family": "sa_lstm", "param_budget": 15500,
              "te_mode": "add_te"}],
  "output_dir": "out"
})";

std::string message_of(const std::string& text) {
  try {
    ExperimentConfig::parse(text, "/base");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(ExperimentConfigTest, ParsesAndResolvesPaths) {
  const auto cfg = ExperimentConfig::parse(kMinimal, "/base");
  EXPECT_EQ(cfg.task, Task::kRegression);
  EXPECT_EQ(cfg.data_dir, std::filesystem::path("/base/data"));
  EXPECT_EQ(cfg.output_dir, std::filesystem::path("/base/out"));
  ASSERT_TRUE(cfg.synthetic.has_value());
  EXPECT_EQ(cfg.synthetic->task, SynthTask::kElapsedRegression);
  EXPECT_EQ(cfg.n_train, 10);
  ASSERT_EQ(cfg.models.size(), 2u);
  EXPECT_EQ(cfg.models[1].param_budget, 15500);
  EXPECT_EQ(cfg.folds, 5);
  EXPECT_EQ(cfg.runs_per_fold, 10);
  EXPECT_EQ(cfg.hyper.batch_size, 100);
  EXPECT_EQ(cfg.keep_fractions.size(), 10u);
}

TEST(ExperimentConfigTest, ResolvesBudgetedHidden) {
  const auto cfg = ExperimentConfig::parse(kMinimal, "/base");
  const auto spec =
      resolve_model(cfg.models[1], Schema::all_real(18), cfg);
  EXPECT_GT(spec.hidden, 0);
  EXPECT_EQ(spec.hidden % 2, 0);
  EXPECT_EQ(spec.te_cfg->dim, spec.hidden);
  EXPECT_LE(count_params(spec, 18), 15500);
}

TEST(ExperimentConfigTest, ReportsEveryProblemAtOnce) {
  const std::string msg = message_of(R"({
    "task": "regression",
    "bogus": 1,
    "training": {"epochs": "many", "lr": 0.1, "momentum": 0.9},
    "models": [{"alias": "A", "family": "gru"}]
  })");
  EXPECT_NE(msg.find("bogus"), std::string::npos) << msg;
  EXPECT_NE(msg.find("training.epochs"), std::string::npos) << msg;
  EXPECT_NE(msg.find("momentum"), std::string::npos) << msg;
  EXPECT_NE(msg.find("gru"), std::string::npos) << msg;
}

TEST(ExperimentConfigTest, RejectsInvalidModels) {
  EXPECT_NE(message_of(R"({"task": "classification",
      "data": {"dir": "d"},
      "models": [{"alias": "L", "family": "linreg"}]})"),
            "");
  EXPECT_NE(message_of(R"({"task": "classification",
      "data": {"dir": "d"},
      "models": [{"alias": "L", "family": "lstm"}]})"),
            "");
  EXPECT_NE(message_of(R"({"task": "classification", "models": []})"), "");
  EXPECT_NE(message_of("not json"), "");
  EXPECT_NE(message_of(R"({"models": [{"alias": "L", "family": "mlp"}]})")
                .find("task"),
            std::string::npos);
}

TEST(ExperimentConfigTest, DuplicateAliasesRejected) {
  EXPECT_NE(message_of(R"({"task": "classification", "data": {"dir": "d"},
      "models": [{"alias": "A", "family": "mlp"},
                 {"alias": "A", "family": "logreg"}]})"),
            "");
}

TEST(ExperimentConfigTest, CvOptionsCarryTraining) {
  auto cfg = ExperimentConfig::parse(R"({"task": "classification",
      "data": {"dir": "d"},
      "training": {"lr": 0.002, "epochs": 3, "folds": 4, "runs_per_fold": 2},
      "models": [{"alias": "M", "family": "mlp"}], "seed": 9})",
                                     "/");
  const auto o = cfg.cv_options("M");
  EXPECT_EQ(o.folds, 4);
  EXPECT_EQ(o.runs_per_fold, 2);
  EXPECT_EQ(o.hyper.epochs, 3);
  EXPECT_EQ(o.hyper.lr, 0.002);
  EXPECT_EQ(o.base_seed, 9u);
  EXPECT_EQ(o.alias, "M");
}

TEST(DataFilesTest, Layout) {
  const auto f = DataFiles::in("/d");
  EXPECT_EQ(f.train_labels, std::filesystem::path("/d/train_labels.csv"));
  EXPECT_EQ(f.manifest, std::filesystem::path("/d/manifest.json"));
}

}  // namespace
}  // namespace tembed
