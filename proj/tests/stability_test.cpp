#include <gtest/gtest.h>

#include <random>

#include "stabsel/stability.hpp"

using namespace stabsel;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

// Synthetic estimates with prescribed psi values and influence vectors chosen
// so the pairwise variances come out as requested relative to the benchmark.
std::vector<EffectEstimate> synthetic_estimates(const std::vector<double>& psi,
                                                const std::vector<double>& sd_vs_benchmark,
                                                int n = 16) {
  const int J = static_cast<int>(psi.size());
  std::vector<EffectEstimate> estimates(J);
  // Alternating +/- unit pattern with mean zero.
  Vector pattern(n);
  for (int i = 0; i < n; ++i) pattern[i] = (i % 2 == 0) ? 1.0 : -1.0;
  const double pattern_var = 1.0 * n / (n - 1);  // sample variance of the pattern
  for (int j = 0; j < J; ++j) {
    estimates[j].orbit_index = j + 1;
    estimates[j].psi_hat = psi[j];
    const double target_var = sd_vs_benchmark[j] * sd_vs_benchmark[j];
    estimates[j].influence = std::sqrt(target_var / pattern_var) * pattern;
    estimates[j].kind = EstimatorKind::doubly_robust_standardization;
  }
  // Benchmark influence is zero so Var(psi_j - psi_J) = target variance.
  estimates[J - 1].influence = Vector::Zero(n);
  return estimates;
}

}  // namespace

TEST(QFromDifferences, UnitWeightsTextbookWindow) {
  // Window differences 1..5 with unit weights: mean 3, Q = 4+1+0+1+4 = 10.
  const std::vector<double> d = {1, 2, 3, 4, 5};
  const std::vector<double> var(5, 1.0);
  const auto q = q_from_differences(d, var, 5, /*benchmark=*/99);
  ASSERT_EQ(q.size(), 1u);
  EXPECT_NEAR(q.at(3), 10.0, 1e-12);
}

TEST(QFromDifferences, AllEqualDifferencesGiveZero) {
  const std::vector<double> d(7, 2.5);
  const std::vector<double> var(7, 0.3);
  const auto q = q_from_differences(d, var, 5, 99);
  for (const auto& [orbit, value] : q) EXPECT_NEAR(value, 0.0, 1e-12);
}

TEST(QFromDifferences, DefinedExactlyWhereWindowFits) {
  const std::vector<double> d(10, 0.0);
  const std::vector<double> var(10, 1.0);
  const auto q5 = q_from_differences(d, var, 5, 10);
  ASSERT_EQ(q5.size(), 6u);  // orbits 3..8
  EXPECT_TRUE(q5.count(3) && q5.count(8));
  EXPECT_FALSE(q5.count(2) || q5.count(9));
  const auto q3 = q_from_differences(d, var, 3, 10);
  EXPECT_EQ(q3.size(), 8u);  // orbits 2..9
}

TEST(QFromDifferences, TermByTermOracleOnTenOrbits) {
  // Ten-orbit instance recomputed term by term.
  const std::vector<double> d = {0.9, -0.4, 0.7, 0.2, -0.1, 0.05, 0.3, -0.2, 0.1, 0.0};
  const std::vector<double> var = {0.8, 0.5, 0.6, 0.3, 0.25, 0.2, 0.35, 0.3, 0.4, 0.0};
  const int J = 10, width = 5, h = 2, benchmark = 10;
  const auto q = q_from_differences(d, var, width, benchmark);
  for (int j = 1 + h; j <= J - h; ++j) {
    double wsum = 0.0, dbar = 0.0;
    for (int k = j - h; k <= j + h; ++k) {
      if (k == benchmark || var[k - 1] <= 0.0) continue;
      wsum += 1.0 / var[k - 1];
      dbar += d[k - 1] / var[k - 1];
    }
    dbar /= wsum;
    double expected = 0.0;
    for (int k = j - h; k <= j + h; ++k) {
      if (k == benchmark || var[k - 1] <= 0.0) continue;
      expected += (d[k - 1] - dbar) * (d[k - 1] - dbar) / var[k - 1];
    }
    ASSERT_TRUE(q.count(j));
    EXPECT_NEAR(q.at(j), expected, 1e-10) << "orbit " << j;
  }
}

TEST(QFromDifferences, BenchmarkWeightIsZero) {
  // A window touching the benchmark produces the same Q as the window with
  // that orbit removed.
  const std::vector<double> d = {0.5, 0.3, 0.2, 0.1, 0.0};
  std::vector<double> var = {0.2, 0.4, 0.3, 0.5, 1e9};  // huge variance at J
  const auto with_huge = q_from_differences(d, var, 5, /*benchmark=*/5);
  var[4] = 1e-9;  // tiny variance at J: weight would dominate if not zeroed
  const auto with_tiny = q_from_differences(d, var, 5, 5);
  ASSERT_EQ(with_huge.size(), 1u);
  EXPECT_NEAR(with_huge.at(3), with_tiny.at(3), 1e-9);
}

TEST(QFromDifferences, ZeroVarianceOrbitExcluded) {
  const std::vector<double> d = {1.0, 2.0, 3.0, 4.0, 5.0};
  std::vector<double> var = {1.0, 0.0, 1.0, 1.0, 1.0};  // orbit 2 would blow up
  const auto q = q_from_differences(d, var, 5, 99);
  // Unit weights on the remaining orbits {1,3,4,5}: mean 3.25.
  const double m = (1 + 3 + 4 + 5) / 4.0;
  const double expected = (1 - m) * (1 - m) + (3 - m) * (3 - m) + (4 - m) * (4 - m) + (5 - m) * (5 - m);
  EXPECT_NEAR(q.at(3), expected, 1e-12);
}

TEST(SelectStableOrbit, SmallestOrbitWinsTies) {
  EXPECT_EQ(select_stable_orbit({{3, 5.0}, {4, 1.2}, {5, 1.2}}), 4);
  EXPECT_EQ(select_stable_orbit({{7, 0.4}}), 7);
  EXPECT_THROW(select_stable_orbit({}), Error);
}

TEST(StdDiffTrajectory, ShapeAndBenchmarkHole) {
  const auto estimates = synthetic_estimates({1.0, 0.8, 0.5, 0.2, 0.0},
                                             {0.5, 0.4, 0.3, 0.2, 0.0});
  const auto traj = std_diff_trajectory(estimates, 5);
  ASSERT_EQ(traj.size(), 5u);
  EXPECT_FALSE(traj[4].has_value());
  for (int j = 0; j < 4; ++j) ASSERT_TRUE(traj[j].has_value());
  // Entry 1: (1.0 - 0.0) / 0.5 = 2 up to the sample-variance scaling below.
  const DiffVariance dv = diff_variance(estimates[0], estimates[4]);
  EXPECT_NEAR(*traj[0], *dv.std_diff, 1e-12);
}

TEST(StdDiffTrajectory, TwoOrbits) {
  const auto estimates = synthetic_estimates({0.7, 0.0}, {0.3, 0.0});
  const auto traj = std_diff_trajectory(estimates, 2);
  ASSERT_EQ(traj.size(), 2u);
  EXPECT_TRUE(traj[0].has_value());
  EXPECT_FALSE(traj[1].has_value());
}

TEST(AssessStability, SelectsCalmRegion) {
  // Early orbits fluctuate, middle orbits settle near the benchmark; the
  // minimal-Q orbit must sit in the settled region.
  const std::vector<double> psi = {3.0, -2.0, 2.5, 0.52, 0.50, 0.49, 0.51, 0.50, 1.8, 0.5};
  const std::vector<double> sd = {0.9, 0.8, 0.7, 0.3, 0.3, 0.3, 0.3, 0.3, 0.6, 0.0};
  const auto estimates = synthetic_estimates(psi, sd, 24);
  StabilityOptions opts;
  opts.window_width = 5;
  const StabilityReport report = assess_stability(estimates, opts);
  EXPECT_GE(report.selected_orbit, 4);
  EXPECT_LE(report.selected_orbit, 7);
  EXPECT_EQ(report.benchmark, 10);
  EXPECT_EQ(report.window_width, 5);
}

TEST(AssessStability, WindowShrinksWhenJIsSmall) {
  const auto estimates = synthetic_estimates({1.0, 0.6, 0.0}, {0.4, 0.3, 0.0});
  StabilityOptions opts;
  opts.window_width = 5;
  const StabilityReport report = assess_stability(estimates, opts);
  EXPECT_EQ(report.window_width, 3);
  ASSERT_FALSE(report.notes.empty());
  EXPECT_NE(report.notes[0].find("shrunk"), std::string::npos);
}

TEST(AssessStability, DegenerateTwoOrbitTrajectory) {
  const auto estimates = synthetic_estimates({0.9, 0.0}, {0.5, 0.0});
  StabilityOptions opts;
  opts.window_width = 3;
  const StabilityReport report = assess_stability(estimates, opts);
  EXPECT_EQ(report.window_width, 1);
  EXPECT_EQ(report.selected_orbit, 1);
}

TEST(AssessStability, ConfigurableBenchmark) {
  const auto estimates = synthetic_estimates({1.0, 0.8, 0.5, 0.2, 0.1, 0.0},
                                             {0.5, 0.4, 0.3, 0.2, 0.2, 0.0});
  StabilityOptions opts;
  opts.window_width = 3;
  opts.benchmark = 5;
  const StabilityReport report = assess_stability(estimates, opts);
  EXPECT_EQ(report.benchmark, 5);
  EXPECT_FALSE(report.std_diffs[4].has_value());
}

TEST(AssessStability, OutcomeScalingLeavesStdDiffsAndSelectionAlone) {
  // Multiplying all outcomes by c scales every psi and influence by c; the
  // standardized differences and the Q argmin are unchanged.
  const std::vector<double> psi = {1.2, 0.4, 0.7, 0.3, 0.32, 0.31, 0.3, 0.0};
  const std::vector<double> sd = {0.6, 0.5, 0.4, 0.25, 0.25, 0.25, 0.25, 0.0};
  auto estimates = synthetic_estimates(psi, sd, 20);
  const StabilityReport base = assess_stability(estimates);

  const double c = 3.7;
  auto scaled = estimates;
  for (auto& e : scaled) {
    e.psi_hat *= c;
    e.influence *= c;
  }
  const StabilityReport after = assess_stability(scaled);
  EXPECT_EQ(base.selected_orbit, after.selected_orbit);
  for (size_t j = 0; j < base.std_diffs.size(); ++j) {
    if (!base.std_diffs[j]) continue;
    EXPECT_NEAR(*base.std_diffs[j], *after.std_diffs[j], 1e-9);
  }
  for (const auto& [orbit, q] : base.q_values)
    EXPECT_NEAR(after.q_values.at(orbit), q, 1e-9 * std::max(1.0, q));
}

TEST(AssessStability, ShiftingAllEstimatesLeavesQAlone) {
  const std::vector<double> psi = {1.2, 0.4, 0.7, 0.3, 0.32, 0.31, 0.3, 0.0};
  const std::vector<double> sd = {0.6, 0.5, 0.4, 0.25, 0.25, 0.25, 0.25, 0.0};
  auto estimates = synthetic_estimates(psi, sd, 20);
  const StabilityReport base = assess_stability(estimates);
  for (auto& e : estimates) e.psi_hat += 11.0;
  const StabilityReport shifted = assess_stability(estimates);
  for (const auto& [orbit, q] : base.q_values)
    EXPECT_NEAR(shifted.q_values.at(orbit), q, 1e-9 * std::max(1.0, q));
  EXPECT_EQ(base.selected_orbit, shifted.selected_orbit);
}

TEST(AssessStability, DeterministicSelection) {
  const std::vector<double> psi = {0.9, 0.1, 0.5, 0.2, 0.21, 0.22, 0.2, 0.0};
  const std::vector<double> sd = {0.6, 0.5, 0.4, 0.3, 0.3, 0.3, 0.3, 0.0};
  const auto estimates = synthetic_estimates(psi, sd, 12);
  const StabilityReport a = assess_stability(estimates);
  const StabilityReport b = assess_stability(estimates);
  EXPECT_EQ(a.selected_orbit, b.selected_orbit);
  EXPECT_EQ(a.q_values, b.q_values);
}
