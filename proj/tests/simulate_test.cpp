#include <gtest/gtest.h>

#include "stabsel/simulate.hpp"

using namespace stabsel;

TEST(ScenarioRegistry, SixteenNamedScenarios) {
  const auto all = scenario_registry();
  ASSERT_EQ(all.size(), 16u);
  const Scenario base = find_scenario("base_p25_iv2_cont");
  EXPECT_EQ(base.n, 80);
  EXPECT_EQ(base.p, 25);
  EXPECT_FALSE(base.collider_mode);
  EXPECT_EQ(base.s3, (std::vector<int>{4, 5}));
  const Scenario iv4 = find_scenario("collider_p60_iv4_bin");
  EXPECT_EQ(iv4.p, 60);
  EXPECT_TRUE(iv4.collider_mode);
  EXPECT_EQ(iv4.s3, (std::vector<int>{4, 5, 6, 7}));
  EXPECT_EQ(iv4.outcome_kind, OutcomeKind::binary);
  EXPECT_THROW(find_scenario("nope"), ContractError);
}

TEST(Generate, StandardNormalCovariates) {
  Scenario sc = find_scenario("base_p25_iv2_cont");
  sc.n = 10000;
  Rng rng(42);
  const GeneratedData gen = generate(sc, rng);
  ASSERT_EQ(gen.data.n_units(), 10000);
  for (int s : {0, 3, 10, 24}) {
    const Vector col = gen.data.covariates.col(s);
    EXPECT_NEAR(std::sqrt(sample_variance(col)), 1.0, 0.1) << "covariate " << s;
    EXPECT_NEAR(col.mean(), 0.0, 0.05);
  }
}

TEST(Generate, ColliderCovariatesHaveUnitVariance) {
  Scenario sc = find_scenario("collider_p25_iv2_cont");
  sc.n = 10000;
  Rng rng(43);
  const GeneratedData gen = generate(sc, rng);
  for (int s : sc.s3) {
    const Vector col = gen.data.covariates.col(s);
    EXPECT_NEAR(sample_variance(col), 1.0, 0.05) << "collider covariate " << s;
  }
  // The two collider covariates share latent factors, so they correlate.
  const Vector c1 = gen.data.covariates.col(4), c2 = gen.data.covariates.col(5);
  const double corr = ((c1.array() - c1.mean()) * (c2.array() - c2.mean())).sum() /
                      (10000 * std::sqrt(sample_variance(c1) * sample_variance(c2)));
  EXPECT_NEAR(corr, 0.5, 0.05);
}

TEST(Generate, BinaryOutcomeMeanMatchesMonteCarloOracle) {
  Scenario sc = find_scenario("base_p25_iv2_bin");
  sc.n = 20000;
  Rng rng(44);
  const GeneratedData gen = generate(sc, rng);

  // Oracle: E[expit(Y*)] with Y* = 0.8*(L1+L2+L3+L4) ~ N(0, 4*0.64) by
  // direct Monte Carlo integration with an independent sampler.
  std::mt19937_64 g2(999);
  std::normal_distribution<double> normal;
  double oracle = 0.0;
  const int m = 200000;
  const double sd = std::sqrt(4 * 0.64);
  for (int i = 0; i < m; ++i) oracle += expit(sd * normal(g2));
  oracle /= m;
  EXPECT_NEAR(gen.data.outcome.mean(), oracle, 0.02);
}

TEST(Generate, TruePropensityScoresDriveTreatment) {
  Scenario sc = find_scenario("base_p25_iv2_cont");
  sc.n = 20000;
  Rng rng(45);
  const GeneratedData gen = generate(sc, rng);
  // Group by bands of the true PS and compare treated fractions.
  for (double lo : {0.1, 0.3, 0.5, 0.7}) {
    double sum = 0.0;
    int count = 0;
    for (int i = 0; i < sc.n; ++i) {
      if (gen.true_ps[i] >= lo && gen.true_ps[i] < lo + 0.2) {
        sum += gen.data.treatment[i];
        ++count;
      }
    }
    if (count > 300) EXPECT_NEAR(sum / count, lo + 0.1, 0.05);
  }
}

TEST(Generate, ReproducibleFromSeed) {
  const Scenario sc = find_scenario("base_p25_iv2_cont");
  Rng r1(7), r2(7);
  const GeneratedData a = generate(sc, r1);
  const GeneratedData b = generate(sc, r2);
  EXPECT_EQ((a.data.covariates - b.data.covariates).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((a.data.outcome - b.data.outcome).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((a.data.treatment - b.data.treatment).cwiseAbs().maxCoeff(), 0.0);
}

TEST(RunStudy, TargetPsAggregatesAndReproducibility) {
  const Scenario sc = find_scenario("base_p25_iv2_cont");
  StudyOptions opts;
  opts.n_draws = 200;
  const StudyResult s1 = run_study(sc, 30, StudyMethod::target_ps, 2025, opts);
  EXPECT_EQ(s1.replicates.size(), 30u);
  EXPECT_EQ(s1.n_failed, 0);
  // The target subset is fixed at the four signal covariates.
  EXPECT_DOUBLE_EQ(s1.prob_both, 1.0);
  EXPECT_DOUBLE_EQ(s1.mean_selected_size, 4.0);

  const StudyResult s2 = run_study(sc, 30, StudyMethod::target_ps, 2025, opts);
  for (size_t rep = 0; rep < s1.replicates.size(); ++rep) {
    EXPECT_DOUBLE_EQ(s1.replicates[rep].p_value, s2.replicates[rep].p_value);
    EXPECT_DOUBLE_EQ(s1.replicates[rep].effect_estimate, s2.replicates[rep].effect_estimate);
  }
  EXPECT_DOUBLE_EQ(s1.type1_rate, s2.type1_rate);
}

TEST(RunStudy, ThreadCountDoesNotChangeResults) {
  const Scenario sc = find_scenario("base_p25_iv2_cont");
  StudyOptions opts;
  opts.n_draws = 100;
  opts.threads = 1;
  const StudyResult serial = run_study(sc, 12, StudyMethod::empty_ps, 5, opts);
  opts.threads = 4;
  const StudyResult parallel = run_study(sc, 12, StudyMethod::empty_ps, 5, opts);
  for (size_t rep = 0; rep < serial.replicates.size(); ++rep)
    EXPECT_DOUBLE_EQ(serial.replicates[rep].p_value, parallel.replicates[rep].p_value);
}

TEST(RunStudy, StabilityPipelineSmoke) {
  Scenario sc = find_scenario("base_p25_iv2_cont");
  StudyOptions opts;
  opts.n_draws = 100;
  const StudyResult study = run_study(sc, 3, StudyMethod::stability_pipeline, 11, opts);
  EXPECT_EQ(study.n_failed, 0);
  for (const auto& rep : study.replicates) {
    EXPECT_GE(rep.selected_subset.size(), 3u);   // width-5 windows start at orbit 3
    EXPECT_LE(rep.selected_subset.size(), 23u);  // and end at orbit J-2
    EXPECT_GT(rep.p_value, 0.0);
    EXPECT_LE(rep.p_value, 1.0);
  }
}

TEST(Scenario, EmptyPsUsesOneStratum) {
  const Scenario sc = find_scenario("base_p25_iv2_cont");
  StudyOptions opts;
  opts.n_draws = 50;
  const StudyResult study = run_study(sc, 5, StudyMethod::empty_ps, 99, opts);
  for (const auto& rep : study.replicates) EXPECT_TRUE(rep.selected_subset.empty());
}
