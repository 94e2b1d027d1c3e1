#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "rscale/io.hpp"
#include "rscale/smoothing.hpp"

using namespace rscale;

namespace {

GradeObservations make(std::initializer_list<std::pair<Count, Count>> rows) {
  GradeObservations obs;
  int i = 0;
  for (auto [n, d] : rows) obs.grades.push_back({"g" + std::to_string(i++), n, d});
  return obs;
}

GradeObservations fitch() { return io::ingest_grades(RSCALE_DATA_DIR "/fitch_1990_2023.csv"); }
GradeObservations expert_ra() {
  return io::ingest_grades(RSCALE_DATA_DIR "/expert_ra_2001_2024.csv");
}

bool feasible(const std::vector<double>& p, double eps, double floor) {
  if (p[0] < floor * (1 - 1e-12)) return false;
  for (std::size_t i = 0; i + 1 < p.size(); ++i)
    if (p[i + 1] < p[i] * std::exp(eps) * (1 - 1e-12)) return false;
  return p.back() < 1.0;
}

}  // namespace

TEST(Smoothing, RejectsInvalidInput) {
  GradeObservations empty;
  EXPECT_THROW(smooth_monotone(empty, 0.1, 0.0005), Error);
  EXPECT_THROW(smooth_monotone(make({{10, 11}}), 0.1, 0.0005), Error);
  EXPECT_THROW(smooth_monotone(make({{0, 0}}), 0.1, 0.0005), Error);
  auto dup = make({{10, 1}, {10, 2}});
  dup.grades[1].label = dup.grades[0].label;
  try {
    smooth_monotone(dup, 0.1, 0.0005);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "smoothing.invalid_input");
  }
  EXPECT_THROW(smooth_monotone(make({{10, 1}}), -0.1, 0.0005), Error);
}

TEST(Smoothing, DegenerateWithoutDefaultsOrFloor) {
  try {
    smooth_monotone(make({{100, 0}}), 0.1, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "smoothing.degenerate");
  }
  // A grade without defaults pools with a worse one that has some.
  const auto s = smooth_monotone(make({{100, 1}, {100, 0}}), 0.1, 0.0);
  EXPECT_NEAR(s.p_star[1] / s.p_star[0], std::exp(0.1), 1e-12);
}

TEST(Smoothing, InactiveConstraintsReturnRawRates) {
  const auto obs = make({{1000, 2}, {1000, 10}, {1000, 60}});
  const auto s = smooth_monotone(obs, 0.1, 0.0005);
  EXPECT_NEAR(s.p_star[0], 0.002, 1e-12);
  EXPECT_NEAR(s.p_star[1], 0.010, 1e-12);
  EXPECT_NEAR(s.p_star[2], 0.060, 1e-12);
}

TEST(Smoothing, PooledPairMatchesOneDimensionalOptimum) {
  const auto obs = make({{400, 8}, {600, 6}});
  const double eps = 0.1;
  const auto s = smooth_monotone(obs, eps, 0.0);
  EXPECT_NEAR(s.p_star[1], s.p_star[0] * std::exp(eps), 1e-12);
  // Maximize LL(p, p e^eps) over p by golden section.
  auto ll = [&](double p) {
    const double q = p * std::exp(eps);
    return 8 * std::log(p) + 392 * std::log1p(-p) + 6 * std::log(q) + 594 * std::log1p(-q);
  };
  double a = 1e-4, b = 0.05;
  const double r = (std::sqrt(5.0) - 1) / 2;
  for (int i = 0; i < 200; ++i) {
    const double c = b - r * (b - a), d = a + r * (b - a);
    if (ll(c) > ll(d)) b = d; else a = c;
  }
  EXPECT_NEAR(s.p_star[0], 0.5 * (a + b), 1e-9);
}

TEST(Smoothing, FloorBinds) {
  const auto s = smooth_monotone(make({{1000, 0}, {1000, 0}, {1000, 50}}), 0.1, 0.0005);
  EXPECT_DOUBLE_EQ(s.p_star[0], 0.0005);
  EXPECT_NEAR(s.p_star[1], 0.0005 * std::exp(0.1), 1e-15);
  EXPECT_NEAR(s.p_star[2], 0.05, 1e-12);
}

TEST(Smoothing, BeatsRandomFeasiblePoints) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> nd(20, 400);
  for (int trial = 0; trial < 30; ++trial) {
    GradeObservations obs;
    for (int i = 0; i < 4; ++i) {
      const Count n = nd(rng);
      obs.grades.push_back({"g" + std::to_string(i), n,
                            std::uniform_int_distribution<Count>(0, n / 5)(rng)});
    }
    obs.grades[3].d = std::max<Count>(obs.grades[3].d, 1);
    const double eps = 0.2, floor = 0.001;
    const auto s = smooth_monotone(obs, eps, floor);
    ASSERT_TRUE(feasible(s.p_star, eps, floor));
    const double best = log_likelihood(obs, s.p_star);
    EXPECT_LT(kkt_residual(obs, s), 1e-6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 2000; ++k) {
      std::vector<double> p(4);
      p[0] = floor * std::exp(u(rng) * 4);
      for (int i = 1; i < 4; ++i) p[i] = std::min(0.99, p[i - 1] * std::exp(eps + u(rng) * 1.5));
      if (!feasible(p, eps, floor)) continue;
      EXPECT_LE(log_likelihood(obs, p), best + 1e-9);
    }
  }
}

TEST(Smoothing, BoundariesAreGeometricMidpoints) {
  const auto s = smooth_monotone(expert_ra(), 0.1, 0.0005);
  ASSERT_EQ(s.size(), 18u);
  EXPECT_EQ(s.p_lo[0], 0.0);
  EXPECT_EQ(s.p_hi.back(), 1.0);
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    EXPECT_NEAR(s.p_hi[i], std::sqrt(s.p_star[i] * s.p_star[i + 1]), 1e-15);
    EXPECT_EQ(s.p_lo[i + 1], s.p_hi[i]);
    EXPECT_NEAR(s.log_increments[i], std::log(s.p_star[i]) - std::log(s.p_star[i + 1]), 1e-12);
  }
}

TEST(Smoothing, FitchChainSitsOnTheFloor) {
  const auto obs = fitch();
  const auto s = smooth_monotone(obs, 0.1, 0.0005);
  for (std::size_t i = 0; i < 9; ++i)
    EXPECT_NEAR(s.p_star[i], 0.0005 * std::exp(0.1 * static_cast<double>(i)), 1e-15) << i;
  for (std::size_t i = 9; i < 17; ++i) {
    const double dr = static_cast<double>(obs.grades[i].d) / static_cast<double>(obs.grades[i].n);
    EXPECT_NEAR(s.p_star[i], dr, 1e-10) << i;
  }
  EXPECT_LT(kkt_residual(obs, s), 1e-6);
}

TEST(Smoothing, ExpertRaSatisfiesOptimality) {
  const auto obs = expert_ra();
  const auto s = smooth_monotone(obs, 0.1, 0.0005);
  EXPECT_TRUE(feasible(s.p_star, 0.1, 0.0005));
  EXPECT_LT(kkt_residual(obs, s), 1e-6);
  // A perturbation along the chain must not improve the likelihood.
  auto p = s.p_star;
  for (double& x : p) x *= 1.001;
  EXPECT_LE(log_likelihood(obs, p), log_likelihood(obs, s.p_star));
}

TEST(Report, FitchTotals) {
  const auto obs = fitch();
  const auto s = smooth_monotone(obs, 0.1, 0.0005);
  const auto r = distinguishability_report(s, obs, 0.05);
  EXPECT_EQ(r.total_n, 2543710);
  EXPECT_NEAR(r.total_dr, 0.00781, 0.00001);
  EXPECT_NEAR(r.mean_p_star, 0.00799, 0.00001);
  ASSERT_EQ(r.rows.size(), 17u);
  for (const auto& row : r.rows) {
    ASSERT_TRUE(row.m_alpha.has_value());
    EXPECT_EQ(row.distinguishable(), row.n >= *row.m_alpha);
  }
  for (std::size_t i = 0; i < 9; ++i) EXPECT_FALSE(r.rows[i].distinguishable()) << i;
}
