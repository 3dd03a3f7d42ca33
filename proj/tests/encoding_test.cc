#include "tembed/encoding.h"

#include <cmath>
#include <thread>

#include <gtest/gtest.h>

#include "tembed/errors.h"
#include "tembed/rng.h"

namespace tembed {
namespace {

const EncoderConfig kTe48 = EncoderConfig::temporal(4, 48.0);

TEST(EncoderConfigTest, RejectsOddOrTinyDimension) {
  EXPECT_THROW(EncoderConfig::temporal(3, 48.0).validate(), ConfigError);
  EXPECT_THROW(EncoderConfig::temporal(0, 48.0).validate(), ConfigError);
  EXPECT_THROW(EncoderConfig::temporal(4, 0.0).validate(), ConfigError);
  EXPECT_THROW(pe(1, EncoderConfig::positional(5)), ConfigError);
  EXPECT_NO_THROW(EncoderConfig::temporal(2, 1.0).validate());
}

TEST(PositionalEmbeddingTest, OriginIsSinZeroCosOne) {
  const auto v = pe(0, EncoderConfig::positional(4));
  EXPECT_EQ(v, (Eigen::Vector4d(0, 1, 0, 1)));
}

TEST(PositionalEmbeddingTest, PositionOne) {
  const auto v = pe(1, EncoderConfig::positional(2));
  EXPECT_NEAR(v[0], 0.8414709848078965, 1e-15);
  EXPECT_NEAR(v[1], 0.5403023058681398, 1e-15);
}

// Positions past the longest wavelength alias earlier ones; the values are
// still the plain sinusoids.
TEST(PositionalEmbeddingTest, LargePositionIsPlainSinusoid) {
  const auto v = pe(10000, EncoderConfig::positional(2));
  EXPECT_NEAR(v[0], -0.30561438888825215, 1e-12);
  EXPECT_NEAR(v[1], -0.9521553682590148, 1e-12);
}

TEST(PositionalEmbeddingTest, MatchesTimeEmbeddingWithBase10000) {
  const auto pcfg = EncoderConfig::positional(16);
  const auto tcfg = EncoderConfig::temporal(16, 10000.0);
  for (long long n : {0LL, 1LL, 7LL, 123LL, 9999LL}) {
    EXPECT_EQ(pe(n, pcfg), te(static_cast<double>(n), tcfg)) << n;
  }
}

TEST(TimeEmbeddingTest, OriginIsSinZeroCosOne) {
  EXPECT_EQ(te(0.0, kTe48), (Eigen::Vector4d(0, 1, 0, 1)));
}

TEST(TimeEmbeddingTest, OneHourWithMaxTime48) {
  const auto v = te(1.0, kTe48);
  EXPECT_NEAR(v[0], 0.8414709848078965, 1e-15);
  EXPECT_NEAR(v[1], 0.5403023058681398, 1e-15);
  EXPECT_NEAR(v[2], 0.1438369169841342, 1e-15);
  EXPECT_NEAR(v[3], 0.989601405270071, 1e-15);
}

TEST(TimeEmbeddingTest, SquaredNormIsHalfDim) {
  for (double t : {0.0, 0.3, 17.0, 47.9, 1234.5}) {
    EXPECT_NEAR(te(t, kTe48).squaredNorm(), 2.0, 1e-12);
  }
}

TEST(TimeEmbeddingTest, NonFiniteTimeIsInputError) {
  EXPECT_THROW(te(std::nan(""), kTe48), InputError);
  EXPECT_THROW(te(INFINITY, kTe48), InputError);
}

TEST(TimeEmbeddingTest, PositionalConfigRejected) {
  EXPECT_THROW(te(1.0, EncoderConfig::positional(4)), ConfigError);
  EXPECT_THROW(pe(1, kTe48), ConfigError);
}

TEST(TimeEmbeddingTest, TimesBeyondMaxTimeAliasWithWarning) {
  const auto before = aliased_time_count();
  EXPECT_NO_THROW(te(100.0, kTe48));
  EXPECT_GT(aliased_time_count(), before);
}

TEST(TimeEmbeddingBatchTest, EmptyInputKeepsColumns) {
  const auto m = te_batch({}, kTe48);
  EXPECT_EQ(m.rows(), 0);
  EXPECT_EQ(m.cols(), 4);
}

TEST(TimeEmbeddingBatchTest, RowsMatchSingleCalls) {
  const std::vector<double> times = {0.0, 1.0, 0.0};
  const auto m = te_batch(times, kTe48);
  ASSERT_EQ(m.rows(), 3);
  for (int j = 0; j < 3; ++j) {
    EXPECT_EQ(Eigen::VectorXd(m.row(j).transpose()), te(times[j], kTe48));
  }
  EXPECT_EQ(m.row(0), m.row(2));
}

TEST(TimeEmbeddingBatchTest, ErrorNamesRow) {
  const std::vector<double> times = {0.0, std::nan("")};
  try {
    te_batch(times, kTe48);
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos);
  }
}

TEST(ShiftMapTest, ZeroShiftIsIdentity) {
  const auto v = te(5.25, kTe48);
  EXPECT_EQ(shift_map(0.0, kTe48).apply(v), v);
}

TEST(ShiftMapTest, AdvancesEmbedding) {
  const auto cfg = EncoderConfig::temporal(32, 48.0);
  CounterRng rng(11);
  for (int i = 0; i < 200; ++i) {
    const double t = rng.uniform(0.0, 48.0);
    const double k = rng.uniform(0.0, 48.0);
    const auto shifted = shift_map(k, cfg).apply(te(t, cfg));
    EXPECT_LT((shifted - te(t + k, cfg)).lpNorm<Eigen::Infinity>(), 1e-9);
  }
}

TEST(ShiftMapTest, NegativeShiftInverts) {
  const auto cfg = EncoderConfig::temporal(8, 48.0);
  const auto v = te(13.0, cfg);
  const auto round_trip =
      shift_map(-7.5, cfg).apply(shift_map(7.5, cfg).apply(v));
  EXPECT_LT((round_trip - v).lpNorm<Eigen::Infinity>(), 1e-14);
}

TEST(ShiftMapTest, MatrixFormAgreesWithApply) {
  const auto cfg = EncoderConfig::temporal(8, 48.0);
  const auto map = shift_map(3.25, cfg);
  const auto v = te(2.0, cfg);
  EXPECT_LT((map.matrix() * v - map.apply(v)).lpNorm<Eigen::Infinity>(), 1e-15);
  // Rotation blocks: orthogonal.
  EXPECT_TRUE((map.matrix() * map.matrix().transpose())
                  .isApprox(Eigen::MatrixXd::Identity(8, 8), 1e-14));
}

TEST(EstimateDeltaTest, EqualEmbeddingsGiveZero) {
  const auto cfg = EncoderConfig::temporal(32, 48.0);
  EXPECT_NEAR(estimate_delta(te(9.0, cfg), te(9.0, cfg), cfg), 0.0, 1e-12);
}

TEST(EstimateDeltaTest, OneHour) {
  const auto cfg = EncoderConfig::temporal(32, 48.0);
  EXPECT_NEAR(estimate_delta(te(0.0, cfg), te(1.0, cfg), cfg), 1.0, 1e-6);
}

TEST(EstimateDeltaTest, FractionalTimes) {
  const auto cfg = EncoderConfig::temporal(32, 48.0);
  EXPECT_NEAR(estimate_delta(te(3.5, cfg), te(40.25, cfg), cfg), 36.75, 1e-5);
  EXPECT_NEAR(estimate_delta(te(40.25, cfg), te(3.5, cfg), cfg), -36.75, 1e-5);
}

TEST(EstimateDeltaTest, RoundTripProperty) {
  for (int dim : {8, 16, 32, 64}) {
    const auto cfg = EncoderConfig::temporal(dim, 48.0);
    CounterRng rng(static_cast<uint64_t>(dim));
    for (int i = 0; i < 500; ++i) {
      const double t = rng.uniform(0.0, 48.0);
      const double d = rng.uniform(-0.9 * 48.0, 0.9 * 48.0);
      EXPECT_NEAR(estimate_delta(te(t, cfg), te(t + d, cfg), cfg), d, 1e-5)
          << "dim=" << dim << " t=" << t << " d=" << d;
    }
  }
}

TEST(EstimateDeltaTest, RangeLimitIsPiOverCoarsestFrequency) {
  const auto cfg = EncoderConfig::temporal(32, 48.0);
  EXPECT_NEAR(cfg.delta_range_limit(), 118.38959441455036, 1e-9);
  EXPECT_THROW(estimate_delta(te(0, cfg), te(1, cfg), cfg, 200.0),
               AmbiguityError);
  EXPECT_NO_THROW(estimate_delta(te(0, cfg), te(1, cfg), cfg, 48.0));
}

TEST(EstimateDeltaTest, RejectsInvalidEmbeddings) {
  const auto cfg = EncoderConfig::temporal(4, 48.0);
  Eigen::VectorXd bad = te(1.0, cfg);
  bad *= 1.01;
  EXPECT_THROW(estimate_delta(te(0.0, cfg), bad, cfg), InputError);
  EXPECT_THROW(estimate_delta(te(0.0, cfg), Eigen::VectorXd::Zero(4), cfg),
               InputError);
}

TEST(EncodingPurityTest, ConcurrentCallsAreBitIdentical) {
  const auto cfg = EncoderConfig::temporal(64, 48.0);
  const auto expected = te(12.345, cfg);
  std::vector<std::thread> threads;
  std::vector<int> mismatches(4, 0);
  for (int w = 0; w < 4; ++w) {
    threads.emplace_back([&, w] {
      for (int i = 0; i < 1000; ++i) {
        if (te(12.345, cfg) != expected) ++mismatches[w];
      }
    });
  }
  for (auto& t : threads) t.join();
  for (int m : mismatches) EXPECT_EQ(m, 0);
}

}  // namespace
}  // namespace tembed
