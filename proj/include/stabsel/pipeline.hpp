#ifndef STABSEL_PIPELINE_HPP
#define STABSEL_PIPELINE_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stabsel/core.hpp"
#include "stabsel/effect.hpp"
#include "stabsel/matching.hpp"
#include "stabsel/ordering.hpp"
#include "stabsel/randtest.hpp"
#include "stabsel/stability.hpp"

namespace stabsel {

struct PipelineConfig {
  int window_width = 5;
  std::optional<int> benchmark_orbit;  // defaults to the largest orbit
  long n_draws = 1000;                 // randomization draws
  double alpha = 0.05;
  EstimatorKind estimator_kind = EstimatorKind::doubly_robust_standardization;
  std::vector<int> pinned_high;
  std::vector<int> pinned_low;
  std::uint64_t seed = 0;              // randomization-test seed
  double weight_warn_threshold = 50.0;
  DistanceKind distance = DistanceKind::abs_logit_ps;
  int threads = 1;

  void validate() const {
    if (window_width < 3 || window_width % 2 == 0)
      throw ContractError("pipeline: window width must be odd and at least 3");
    if (n_draws < 1) throw ContractError("pipeline: need at least one randomization draw");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ContractError("pipeline: alpha must be in (0,1)");
  }
};

struct PipelineReport {
  CovariateOrdering ordering;
  std::vector<EffectEstimate> orbit_estimates;  // orbit 1..J
  StabilityReport stability;
  std::vector<int> selected_subset;  // 0-based column indices, ordering prefix
  std::vector<std::string> selected_labels;
  double psi_hat = 0.0;  // marginal effect at the selected orbit
  double se_hat = 0.0;   // influence-function standard error
  FullMatch match;
  RandTestResult rand_test;
  std::vector<std::string> notes;
};

// End-to-end run: priority ordering, per-orbit marginal effects, stability
// selection, full matching on the selected propensity score, then the
// randomization test of the sharp null.
inline PipelineReport run_pipeline(const Dataset& data, const PipelineConfig& config = {}) {
  config.validate();
  data.validate();

  PipelineReport report;
  OrderingConfig ocfg;
  ocfg.pinned_high = config.pinned_high;
  ocfg.pinned_low = config.pinned_low;
  ocfg.threads = config.threads;
  report.ordering = order_covariates(data, ocfg);
  const auto subsets = nested_subsets(report.ordering);
  const int J = static_cast<int>(subsets.size());

  report.orbit_estimates.resize(J);
  parallel_for_index(J, config.threads, [&](Eigen::Index j) {
    const auto& subset = subsets[j];
    report.orbit_estimates[j] =
        config.estimator_kind == EstimatorKind::ols_linear
            ? ols_effect(data, subset, static_cast<int>(j) + 1)
            : dr_effect(data, subset, static_cast<int>(j) + 1);
  });
  for (const auto& e : report.orbit_estimates)
    if (e.kind == EstimatorKind::doubly_robust_standardization &&
        e.max_weight > config.weight_warn_threshold)
      report.notes.push_back("orbit " + std::to_string(e.orbit_index) +
                             ": max inverse-probability weight " + fmt_g17(e.max_weight));

  StabilityOptions sopts;
  sopts.window_width = config.window_width;
  sopts.benchmark = config.benchmark_orbit;
  report.stability = assess_stability(report.orbit_estimates, sopts);
  for (const auto& note : report.stability.notes) report.notes.push_back(note);

  report.selected_subset = subsets[report.stability.selected_orbit - 1];
  for (int k : report.selected_subset)
    report.selected_labels.push_back(data.covariate_labels[k]);
  const EffectEstimate& chosen = report.orbit_estimates[report.stability.selected_orbit - 1];
  report.psi_hat = chosen.psi_hat;
  report.se_hat = influence_se(chosen);

  const PsFit psfit = ps_for_subset(data, report.selected_subset);
  if (psfit.fit.separation_warning)
    report.notes.push_back("selected propensity model shows separation; "
                           "scores clipped for matching distances");
  MatchOptions mopts;
  mopts.distance = config.distance;
  report.match = full_match(psfit.ps, data.treatment, mopts);
  report.rand_test = randomization_pvalue(report.match.strata, data.treatment, data.outcome,
                                          config.n_draws, config.seed);
  return report;
}

}  // namespace stabsel

#endif  // STABSEL_PIPELINE_HPP
