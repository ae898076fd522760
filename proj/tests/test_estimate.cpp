#include <gtest/gtest.h>

#include <cmath>

#include <boost/math/special_functions/beta.hpp>

#include "ptcert/classifier.hpp"
#include "ptcert/estimate.hpp"
#include "ptcert/point_cloud.hpp"
#include "ptcert/rng.hpp"
#include "ptcert/sampling.hpp"

using namespace ptcert;

namespace {

// 50-digit reference values computed with an independent arbitrary-precision
// incomplete-beta implementation.
constexpr double kLowerN100Ny90 = 0.77532988016777492529661981740954844902766661338061;
constexpr double kUpperN100Ni10 = 0.22467011983222507470338018259045155097233338661938;
constexpr double kUpperN100Ni0 = 0.06674569920300895646790338831635159279774514800264;
constexpr double kTauPow = 0.93325430079699104353209661168364840720225485199736;

PointCloud oracle_five() {
  return PointCloud::from_flat(3, {1, 0, 0, 2, 0, 0, 3, 0, 0, -1, 0, 0, -2, 0, 0});
}

}  // namespace

TEST(IncompleteBeta, MatchesBoostAcrossShapes) {
  for (double a : {0.5, 1.0, 2.0, 7.5, 31.0, 90.0, 400.0, 9990.0}) {
    for (double b : {0.5, 1.0, 3.0, 11.0, 120.0, 5000.0}) {
      for (double x : {1e-6, 0.01, 0.2, 0.5, 0.77, 0.95, 0.999}) {
        const double ref = boost::math::ibeta(a, b, x);
        EXPECT_NEAR(regularized_incomplete_beta(x, a, b), ref, 1e-12 + 1e-11 * ref)
            << "a=" << a << " b=" << b << " x=" << x;
      }
    }
  }
}

TEST(IncompleteBeta, Endpoints) {
  EXPECT_EQ(regularized_incomplete_beta(0.0, 2, 3), 0.0);
  EXPECT_EQ(regularized_incomplete_beta(1.0, 2, 3), 1.0);
  EXPECT_THROW(regularized_incomplete_beta(0.5, 0.0, 1.0), std::invalid_argument);
}

TEST(BetaInv, SpecExamples) {
  EXPECT_NEAR(beta_inv_cdf(0.5, 1, 1), 0.5, 1e-12);
  for (double a : {2.0, 7.0, 31.0}) EXPECT_NEAR(beta_inv_cdf(0.5, a, a), 0.5, 1e-12) << a;
  EXPECT_NEAR(beta_inv_cdf(0.001, 100, 1), kTauPow, 1e-12);
}

TEST(BetaInv, RejectsBadArguments) {
  for (double tau : {0.0, 1.0, -0.1, 1.5, std::nan("")}) {
    EXPECT_THROW(beta_inv_cdf(tau, 1, 1), std::invalid_argument) << tau;
  }
  EXPECT_THROW(beta_inv_cdf(0.5, 0, 1), std::invalid_argument);
  EXPECT_THROW(beta_inv_cdf(0.5, 1, -1), std::invalid_argument);
}

TEST(BetaInv, RoundTripAndMonotone) {
  for (double mu : {0.7, 1.0, 4.0, 50.0, 901.0}) {
    for (double nu : {0.9, 1.0, 6.0, 100.0, 1200.0}) {
      double prev = 0.0;
      for (int i = 1; i < 40; ++i) {
        const double tau = i / 40.0;
        const double x = beta_inv_cdf(tau, mu, nu);
        EXPECT_NEAR(regularized_incomplete_beta(x, mu, nu), tau, 1e-10);
        EXPECT_NEAR(boost::math::ibeta(mu, nu, x), tau, 1e-10);
        EXPECT_GE(x, prev);
        prev = x;
      }
    }
  }
}

TEST(ClopperPearson, ClosedFormsAndGoldens) {
  EXPECT_NEAR(clopper_pearson_lower(90, 100, 0.001), kLowerN100Ny90, 1e-13);
  EXPECT_NEAR(clopper_pearson_upper(10, 100, 0.001), kUpperN100Ni10, 1e-13);
  EXPECT_NEAR(clopper_pearson_upper(0, 100, 0.001), kUpperN100Ni0, 1e-13);
  EXPECT_NEAR(clopper_pearson_lower(100, 100, 0.001), kTauPow, 1e-13);
  EXPECT_EQ(clopper_pearson_lower(0, 100, 0.001), 0.0);
  EXPECT_EQ(clopper_pearson_upper(100, 100, 0.001), 1.0);
  // Lower and upper are mirror images under relabelling successes/failures.
  for (std::uint64_t s = 0; s <= 50; s += 5) {
    EXPECT_NEAR(clopper_pearson_lower(s, 50, 0.01), 1.0 - clopper_pearson_upper(50 - s, 50, 0.01),
                1e-12);
  }
}

TEST(ProbBounds, AllVotesOnOneLabel) {
  const auto b = prob_bounds({{100, 0, 0}, 100}, 0.003);
  EXPECT_EQ(b.top, 0u);
  EXPECT_EQ(b.runner_up, 1u);
  EXPECT_NEAR(b.p_y_lower, kTauPow, 1e-13);
  EXPECT_NEAR(b.p_e_upper, kUpperN100Ni0, 1e-13);
  EXPECT_EQ(b.num_classes, 3u);
}

TEST(ProbBounds, TiesAndMinRule) {
  const auto tie = prob_bounds({{50, 50}, 100}, 0.001);
  EXPECT_EQ(tie.top, 0u);
  EXPECT_EQ(tie.runner_up, 1u);
  EXPECT_LT(tie.p_y_lower, 0.5);
  EXPECT_GT(tie.p_e_upper, 0.5);
  EXPECT_LE(tie.p_e_upper, 1.0 - tie.p_y_lower);

  const auto late = prob_bounds({{0, 3, 7, 7}, 17}, 0.01);
  EXPECT_EQ(late.top, 2u);
  EXPECT_EQ(late.runner_up, 3u);
}

TEST(ProbBounds, GoldenNinetyTen) {
  const auto b = prob_bounds({{90, 10, 0}, 100}, 0.003);
  EXPECT_EQ(b.top, 0u);
  EXPECT_EQ(b.runner_up, 1u);
  EXPECT_NEAR(b.p_y_lower, kLowerN100Ny90, 1e-13);
  EXPECT_NEAR(b.p_e_upper, std::min(kUpperN100Ni10, 1.0 - kLowerN100Ny90), 1e-13);
}

TEST(ProbBounds, InvariantsOverManyCountVectors) {
  SplitMix64 rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t c = 2 + rng.below(6);
    VoteCounts v{std::vector<std::uint64_t>(c, 0), 1 + rng.below(500)};
    for (std::uint64_t j = 0; j < v.total; ++j) ++v.counts[rng.below(c)];
    const auto b = prob_bounds(v, 0.001 + 0.1 * rng.uniform());
    EXPECT_NE(b.top, b.runner_up);
    EXPECT_GE(b.p_y_lower, 0.0);
    EXPECT_LE(b.p_y_lower, 1.0);
    EXPECT_GE(b.p_e_upper, 0.0);
    EXPECT_LE(b.p_e_upper, 1.0 - b.p_y_lower);
  }
}

TEST(ProbBounds, RejectsBadInput) {
  EXPECT_THROW(prob_bounds({{1, 1}, 2}, 0.0), std::invalid_argument);
  EXPECT_THROW(prob_bounds({{1, 1}, 2}, 1.0), std::invalid_argument);
  EXPECT_THROW(prob_bounds({{0, 0}, 0}, 0.1), std::invalid_argument);
  EXPECT_THROW(prob_bounds({{1, 1}, 3}, 0.1), std::invalid_argument);
  EXPECT_THROW(prob_bounds({{2}, 2}, 0.1), std::invalid_argument);
}

TEST(CountVotes, ConstantAndConservation) {
  const auto cloud = generate_synthetic(Shape::kCross, 40, 2);
  const auto subs = subsample_batch(cloud, {8, 50, 1});
  const auto v = count_votes(ConstantClassifier(2, 4), subs);
  EXPECT_EQ(v.counts, (std::vector<std::uint64_t>{0, 0, 50, 0}));
  EXPECT_EQ(v.total, 50u);
  const auto m = count_votes(MajorityXSignClassifier(), subs);
  EXPECT_EQ(m.counts[0] + m.counts[1], 50u);
  EXPECT_THROW(count_votes(ConstantClassifier(0, 2), {}), std::invalid_argument);
}

TEST(CountVotes, MatchesExactProbabilityOnFivePointCloud) {
  const std::uint64_t draws = 100000;
  const auto subs = subsample_batch(oracle_five(), {2, draws, 2024});
  const auto v = count_votes(MajorityXSignClassifier(), subs);
  const double p = 0.9, sigma = std::sqrt(p * (1 - p) / draws);
  EXPECT_NEAR(static_cast<double>(v.counts[1]) / draws, p, 4 * sigma);
}

TEST(CountVotes, WorkerCountInvariantAndErrorIndex) {
  const auto cloud = generate_synthetic(Shape::kTwoClusters, 64, 5);
  const auto subs = subsample_batch(cloud, {9, 3000, 8});
  const MajorityXSignClassifier model;
  const auto ref = count_votes_serial(model, subs);
  for (int w : {1, 2, 4}) EXPECT_EQ(count_votes(model, subs, w).counts, ref.counts);

  // A classifier failing on specific subsamples reports the smallest index.
  FunctionClassifier flaky(2, 3, [&](const PointCloud& c) -> Label {
    if (c == subs[17] || c == subs[2500]) throw std::runtime_error("boom");
    return 0;
  });
  for (int w : {1, 3}) {
    try {
      count_votes(flaky, subs, w);
      FAIL();
    } catch (const std::runtime_error& e) {
      EXPECT_NE(std::string(e.what()).find("subsample 17"), std::string::npos) << e.what();
    }
  }
}

TEST(Coverage, LowerBoundHoldsOnSmallGrid) {
  // Reduced version of the acceptance coverage check, exercised per build.
  const double tail = 0.01 / 10;
  SplitMix64 rng(12);
  for (double p : {0.1, 0.5, 0.9}) {
    const std::uint64_t n = 100, reps = 2000;
    std::uint64_t covered = 0;
    for (std::uint64_t r = 0; r < reps; ++r) {
      std::uint64_t s = 0;
      for (std::uint64_t i = 0; i < n; ++i) s += rng.uniform() < p;
      covered += clopper_pearson_lower(s, n, tail) <= p;
    }
    const double q = 1 - tail, sigma = std::sqrt(q * (1 - q) / reps);
    EXPECT_GE(static_cast<double>(covered) / reps, q - 3 * sigma) << p;
  }
}
