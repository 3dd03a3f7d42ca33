#include "tembed/models.h"

#include <cmath>

#include <gtest/gtest.h>

#include "tembed/errors.h"
#include "tembed/rng.h"

namespace tembed {
namespace {

using Eigen::MatrixXd;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

SequenceBatch random_batch(int batch, int steps, int features, uint64_t seed,
                           int te_dim = 0) {
  CounterRng rng(seed);
  SequenceBatch b;
  for (int t = 0; t < steps; ++t) {
    MatrixXd x(batch, features);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    b.x.push_back(x);
    if (te_dim > 0) {
      MatrixXd e(batch, te_dim);
      for (Eigen::Index i = 0; i < e.size(); ++i) e.data()[i] = rng.normal();
      b.te.push_back(e);
    }
  }
  return b;
}

TEST(ModelSpecTest, InvariantsEnforced) {
  ModelSpec s = ModelSpec::linear(Task::kRegression);
  s.family = Family::kLogReg;
  EXPECT_THROW(s.validate(), ConfigError);
  EXPECT_THROW(ModelSpec::lstm(Task::kClassification, 0).validate(),
               ConfigError);
  ModelSpec a = ModelSpec::lstm(Task::kClassification, 8);
  a.attention = AttentionSpec{};
  EXPECT_THROW(a.validate(), ConfigError);
  ModelSpec add = ModelSpec::sa_lstm(Task::kClassification, 8, TeMode::kAddTe);
  EXPECT_NO_THROW(add.validate());
  add.te_cfg = EncoderConfig::temporal(16, 48.0);
  EXPECT_THROW(add.validate(), ConfigError);
  EXPECT_THROW(ModelSpec::mlp(Task::kRegression, TeMode::kAddTe).validate(),
               ConfigError);
  ModelSpec cat = ModelSpec::lstm(Task::kClassification, 8, TeMode::kCatTe);
  cat.te_cfg.reset();
  EXPECT_THROW(cat.validate(), ConfigError);
}

TEST(ModelSpecTest, NamesRoundTrip) {
  for (Family f : {Family::kLinReg, Family::kLogReg, Family::kMlp,
                   Family::kLstm, Family::kSaLstm}) {
    EXPECT_EQ(parse_family(family_name(f)), f);
  }
  for (TeMode m :
       {TeMode::kNone, TeMode::kMask, TeMode::kCatTe, TeMode::kAddTe}) {
    EXPECT_EQ(parse_te_mode(te_mode_name(m)), m);
  }
  EXPECT_THROW(parse_family("gru"), ConfigError);
  EXPECT_THROW(parse_te_mode("sum"), ConfigError);
}

TEST(InitParamsTest, SameSeedIdentical) {
  const auto spec = ModelSpec::sa_lstm(Task::kClassification, 6);
  EXPECT_TRUE(init_params(spec, 5, 42) == init_params(spec, 5, 42));
  EXPECT_FALSE(init_params(spec, 5, 42) == init_params(spec, 5, 43));
}

TEST(InitParamsTest, BoundsAndSpecialBiases) {
  const auto spec = ModelSpec::lstm(Task::kRegression, 4);
  const ParamSet p = init_params(spec, 6, 1);
  EXPECT_LE(p["lstm.Wx"].cwiseAbs().maxCoeff(), 1.0 / std::sqrt(10.0));
  EXPECT_LE(p["head0.W"].cwiseAbs().maxCoeff(), 1.0 / std::sqrt(4.0));
  EXPECT_EQ(p["lstm.b"].middleRows(4, 4), MatrixXd::Ones(4, 1));
  EXPECT_EQ(p["out.b"](0, 0), 1.0);
  EXPECT_EQ(p.total_size(), count_params(spec, 6));
}

TEST(ForwardTest, ZeroWeightLogRegGivesHalfHalf) {
  const auto spec = ModelSpec::linear(Task::kClassification);
  ParamSet p = init_params(spec, 6, 3);
  for (auto& t : p) t.value.setZero();
  const auto tr = forward(spec, p, random_batch(3, 2, 3, 1));
  for (int i = 0; i < 3; ++i) {
    EXPECT_DOUBLE_EQ(tr.output(i, 0), 0.5);
    EXPECT_DOUBLE_EQ(tr.output(i, 1), 0.5);
  }
}

TEST(ForwardTest, OneStepLstmByHand) {
  ModelSpec spec = ModelSpec::lstm(Task::kRegression, 1);
  spec.head_widths = {};
  ParamSet p = init_params(spec, 1, 0);
  p["lstm.Wx"] << 0.5, -0.25, 1.5, 0.75;
  p["lstm.Wh"].setConstant(0.3);
  p["lstm.b"] << 0.1, 1.0, -0.2, 0.0;
  p["out.W"] << 2.0;
  p["out.b"] << 0.5;
  SequenceBatch b;
  b.x.push_back(MatrixXd::Constant(1, 1, 2.0));
  const auto tr = forward(spec, p, b);
  const double i = sigmoid(1.1);
  const double g = std::tanh(2.8);
  const double o = sigmoid(1.5);
  const double h = o * std::tanh(i * g);
  EXPECT_NEAR(tr.h[1](0, 0), h, 1e-15);
  EXPECT_NEAR(tr.output(0, 0), 2.0 * h + 0.5, 1e-15);
}

TEST(ForwardTest, AttentionRowsSumToOne) {
  const auto spec = ModelSpec::sa_lstm(Task::kClassification, 5);
  const ParamSet p = init_params(spec, 3, 8);
  const auto tr = forward(spec, p, random_batch(4, 6, 3, 2));
  ASSERT_EQ(tr.attention.size(), 4u);
  for (const auto& a : tr.attention) {
    EXPECT_EQ(a.rows(), 8);
    EXPECT_EQ(a.cols(), 6);
    EXPECT_LT((a.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
  }
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(tr.output.row(i).sum(), 1.0, 1e-12);
  }
}

TEST(ForwardTest, RegressionOutputIsNonNegative) {
  const auto spec = ModelSpec::mlp(Task::kRegression);
  ParamSet p = init_params(spec, 8, 4);
  p["out.b"].setConstant(-100.0);
  const auto tr = forward(spec, p, random_batch(5, 2, 4, 3));
  EXPECT_EQ(tr.output.minCoeff(), 0.0);
}

TEST(ForwardTest, AddTeRequiresStepEmbeddings) {
  const auto spec = ModelSpec::sa_lstm(Task::kClassification, 4, TeMode::kAddTe);
  const ParamSet p = init_params(spec, 3, 1);
  EXPECT_THROW(forward(spec, p, random_batch(2, 3, 3, 1)), InputError);
  EXPECT_THROW(forward(spec, p, random_batch(2, 3, 3, 1, 6)), InputError);
  EXPECT_NO_THROW(forward(spec, p, random_batch(2, 3, 3, 1, 4)));
}

TEST(ForwardTest, WrongInputWidthRejected) {
  const auto spec = ModelSpec::lstm(Task::kClassification, 4);
  const ParamSet p = init_params(spec, 3, 1);
  EXPECT_THROW(forward(spec, p, random_batch(2, 3, 5, 1)), InputError);
}

TEST(ForwardTest, NonFiniteActivationNamesLayer) {
  const auto spec = ModelSpec::mlp(Task::kRegression);
  ParamSet p = init_params(spec, 4, 1);
  p["dense1.W"](0, 0) = INFINITY;
  try {
    forward(spec, p, random_batch(2, 1, 4, 1));
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("dense1"), std::string::npos);
  }
}

TEST(LossTest, PenaltyOfDuplicatedAttentionRows) {
  MatrixXd a(2, 2);
  a << 1, 0, 1, 0;
  EXPECT_DOUBLE_EQ(attention_penalty(a), 2.0);
  const auto spec = ModelSpec::sa_lstm(Task::kClassification, 4);
  ForwardTrace tr;
  tr.family = Family::kSaLstm;
  tr.batch = 1;
  tr.logits = MatrixXd::Zero(1, 2);
  tr.penalty = attention_penalty(a);
  const std::vector<double> y = {1.0};
  EXPECT_NEAR(loss(spec, tr, y), std::log(2.0) + 2.0 * 1e-4, 1e-15);
}

TEST(LossTest, PerfectPredictionsHaveZeroLossAndHeadGradient) {
  const auto spec = ModelSpec::linear(Task::kRegression);
  ParamSet p = init_params(spec, 4, 2);
  p["out.W"].setZero();
  p["out.b"].setConstant(3.0);
  const auto tr = forward(spec, p, random_batch(2, 2, 2, 5));
  const std::vector<double> y = {3.0, 3.0};
  EXPECT_EQ(loss(spec, tr, y), 0.0);
  const ParamSet g = backward(spec, p, tr, y);
  EXPECT_EQ(g["out.W"].cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(g["out.b"].cwiseAbs().maxCoeff(), 0.0);
}

TEST(LossTest, ClassIndexOutOfRange) {
  const auto spec = ModelSpec::linear(Task::kClassification);
  const ParamSet p = init_params(spec, 2, 2);
  const auto tr = forward(spec, p, random_batch(1, 1, 2, 5));
  const std::vector<double> y = {2.0};
  EXPECT_THROW(loss(spec, tr, y), InputError);
}

TEST(CountParamsTest, Examples) {
  EXPECT_EQ(count_params(ModelSpec::linear(Task::kRegression), 10), 11);
  ModelSpec bare = ModelSpec::lstm(Task::kRegression, 34);
  bare.head_widths = {};
  // Recurrent part 19,720 plus the 35-parameter output layer.
  EXPECT_EQ(count_params(bare, 110), 19720 + 35);
  // Head [32,32,16] over h=34 with 59 inputs.
  EXPECT_EQ(count_params(ModelSpec::lstm(Task::kClassification, 34), 59),
            15522);
}

TEST(CountParamsTest, MatchesInitializedSize) {
  for (const auto& spec :
       {ModelSpec::linear(Task::kClassification),
        ModelSpec::mlp(Task::kRegression, TeMode::kMask),
        ModelSpec::lstm(Task::kClassification, 8, TeMode::kAddTe),
        ModelSpec::sa_lstm(Task::kRegression, 5, TeMode::kCatTe)}) {
    EXPECT_EQ(init_params(spec, 9, 0).total_size(), count_params(spec, 9));
  }
}

TEST(BudgetSolverTest, LargestFittingHidden) {
  const auto spec = ModelSpec::lstm(Task::kClassification, 1);
  const int h = solve_hidden_for_budget(spec, 59, 15522);
  EXPECT_EQ(h, 34);
  ModelSpec at = spec;
  at.hidden = h + 1;
  EXPECT_GT(count_params(at, 59), 15522);
  EXPECT_EQ(solve_hidden_for_budget(spec, 59, 15521), 33);
}

TEST(BudgetSolverTest, MonotoneInInputWidth) {
  const auto spec = ModelSpec::sa_lstm(Task::kRegression, 1);
  int prev = solve_hidden_for_budget(spec, 1, 20000);
  for (int w = 2; w <= 200; w += 7) {
    const int h = solve_hidden_for_budget(spec, w, 20000);
    EXPECT_LE(h, prev) << w;
    prev = h;
  }
}

TEST(BudgetSolverTest, Errors) {
  EXPECT_THROW(
      solve_hidden_for_budget(ModelSpec::mlp(Task::kRegression), 10, 1000),
      ConfigError);
  EXPECT_THROW(
      solve_hidden_for_budget(ModelSpec::lstm(Task::kRegression, 1), 10, 50),
      ConfigError);
}

}  // namespace
}  // namespace tembed
