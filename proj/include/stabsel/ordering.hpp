#ifndef STABSEL_ORDERING_HPP
#define STABSEL_ORDERING_HPP

#include <algorithm>
#include <set>
#include <vector>

#include "stabsel/core.hpp"
#include "stabsel/glm.hpp"

namespace stabsel {

// One forward-selection step: the covariate admitted at this orbit together
// with the association evidence it was admitted on.
struct OrbitSelection {
  int orbit = 0;           // 1-based orbit index j
  int covariate = -1;      // 0-based column index k*
  double pv_treatment = 1.0;
  double pv_outcome = 1.0;
  double conditional_effect = 0.0;  // treatment coefficient in the orbit's outcome model
  bool fit_failed = false;          // candidate was collinear; p-values set to 1
};

struct CovariateOrdering {
  std::vector<int> order;  // 0-based column indices, decreasing adjustment priority
  std::vector<OrbitSelection> per_orbit;
  std::vector<int> pinned_high;
  std::vector<int> pinned_low;
};

struct OrderingConfig {
  std::vector<int> pinned_high;  // forced to the front, internally ordered by evidence
  std::vector<int> pinned_low;   // forced to the back
  int threads = 1;               // candidate evaluations within an orbit are independent
};

namespace detail {

struct CandidateScore {
  double pv_treatment = 1.0;
  double pv_outcome = 1.0;
  double conditional_effect = 0.0;
  bool failed = false;

  double min_p() const { return std::min(pv_treatment, pv_outcome); }
  double partner_p() const { return std::max(pv_treatment, pv_outcome); }
};

// Builds [1, covariates(sel...), candidate?, treatment?].
inline DesignMatrix build_design(const Dataset& data, const std::vector<int>& selected,
                                 int candidate, bool with_treatment) {
  const Eigen::Index n = data.n_units();
  const Eigen::Index q =
      1 + static_cast<Eigen::Index>(selected.size()) + (candidate >= 0 ? 1 : 0) + (with_treatment ? 1 : 0);
  DesignMatrix X;
  X.values.resize(n, q);
  X.column_labels.reserve(q);
  X.values.col(0).setOnes();
  X.column_labels.push_back("(intercept)");
  Eigen::Index c = 1;
  for (int idx : selected) {
    X.values.col(c++) = data.covariates.col(idx);
    X.column_labels.push_back(data.covariate_labels[idx]);
  }
  if (candidate >= 0) {
    X.values.col(c++) = data.covariates.col(candidate);
    X.column_labels.push_back(data.covariate_labels[candidate]);
  }
  if (with_treatment) {
    X.values.col(c++) = data.treatment;
    X.column_labels.push_back("(treatment)");
  }
  return X;
}

// Fits the orbit's treatment and outcome models for one candidate and tests
// the candidate's coefficient in each. A collinear candidate carries no new
// information; both p-values are set to 1 so it drifts to the back.
inline CandidateScore score_candidate(const Dataset& data, const std::vector<int>& selected,
                                      int candidate) {
  CandidateScore s;
  try {
    const DesignMatrix Xa = build_design(data, selected, candidate, false);
    const FittedGlm fit_a = fit_logistic(data.treatment, Xa);
    s.pv_treatment = wald_test(fit_a, Xa.q() - 1).p_value;

    const DesignMatrix Xy = build_design(data, selected, candidate, true);
    const FittedGlm fit_y = data.outcome_kind == OutcomeKind::binary
                                ? fit_logistic(data.outcome, Xy)
                                : fit_linear(data.outcome, Xy);
    s.pv_outcome = wald_test(fit_y, Xy.q() - 2).p_value;  // candidate column, treatment is last
    s.conditional_effect = fit_y.coefficients[Xy.q() - 1];
  } catch (const SingularDesignError&) {
    s = CandidateScore{};
    s.failed = true;
  }
  return s;
}

// Smaller min p-value wins; ties broken by the other association's p-value,
// then by column index.
inline bool candidate_precedes(const CandidateScore& a, int ka, const CandidateScore& b, int kb) {
  if (a.min_p() != b.min_p()) return a.min_p() < b.min_p();
  if (a.partner_p() != b.partner_p()) return a.partner_p() < b.partner_p();
  return ka < kb;
}

}  // namespace detail

// Forward double-selection ordering: at each orbit every remaining candidate's
// treatment- and outcome-association p-values are evaluated conditional on the
// already-selected covariates, and the candidate with the smallest minimum
// p-value is admitted. Pinned-high covariates are consumed first, pinned-low
// last, each group internally ordered by the same rule.
inline CovariateOrdering order_covariates(const Dataset& data, const OrderingConfig& config = {}) {
  data.validate();
  const int J = static_cast<int>(data.n_covariates());
  if (data.n_units() <= J + 2)
    throw Error("order_covariates: need n > J + 2 observations to fit the largest orbit");

  std::set<int> high(config.pinned_high.begin(), config.pinned_high.end());
  std::set<int> low(config.pinned_low.begin(), config.pinned_low.end());
  for (int k : high)
    if (k < 0 || k >= J) throw ContractError("order_covariates: pinned_high index out of range");
  for (int k : low) {
    if (k < 0 || k >= J) throw ContractError("order_covariates: pinned_low index out of range");
    if (high.count(k)) throw ContractError("order_covariates: covariate pinned both high and low");
  }

  CovariateOrdering result;
  result.pinned_high = config.pinned_high;
  result.pinned_low = config.pinned_low;

  std::vector<int> remaining(J);
  for (int k = 0; k < J; ++k) remaining[k] = k;
  std::vector<int> selected;
  selected.reserve(J);

  for (int j = 1; j <= J; ++j) {
    // Candidate pool for this orbit: pinned-high first, then unpinned, then pinned-low.
    std::vector<int> pool;
    for (int tier = 0; tier < 3 && pool.empty(); ++tier) {
      for (int k : remaining) {
        const bool in_tier = (tier == 0) ? high.count(k) > 0
                             : (tier == 1) ? (high.count(k) == 0 && low.count(k) == 0)
                                           : low.count(k) > 0;
        if (in_tier) pool.push_back(k);
      }
    }

    std::vector<detail::CandidateScore> scores(pool.size());
    parallel_for_index(static_cast<Eigen::Index>(pool.size()), config.threads, [&](Eigen::Index c) {
      scores[c] = detail::score_candidate(data, selected, pool[c]);
    });

    int best = -1;
    bool all_failed = true;
    for (size_t c = 0; c < pool.size(); ++c) {
      all_failed = all_failed && scores[c].failed;
      if (best < 0 || detail::candidate_precedes(scores[c], pool[c], scores[best], pool[best]))
        best = static_cast<int>(c);
    }
    if (best < 0) throw Error("order_covariates: no candidates left to evaluate");
    if (all_failed)
      throw Error("order_covariates: all candidates unfittable at orbit " + std::to_string(j));

    const int kstar = pool[best];
    OrbitSelection sel;
    sel.orbit = j;
    sel.covariate = kstar;
    sel.pv_treatment = scores[best].pv_treatment;
    sel.pv_outcome = scores[best].pv_outcome;
    sel.conditional_effect = scores[best].conditional_effect;
    sel.fit_failed = scores[best].failed;
    result.per_orbit.push_back(sel);
    result.order.push_back(kstar);
    selected.push_back(kstar);
    remaining.erase(std::find(remaining.begin(), remaining.end(), kstar));
  }
  return result;
}

// Nested covariate subsets induced by the ordering: subset j holds the first
// j covariates.
inline std::vector<std::vector<int>> nested_subsets(const CovariateOrdering& ordering) {
  std::vector<std::vector<int>> subsets;
  subsets.reserve(ordering.order.size());
  std::vector<int> cur;
  for (int k : ordering.order) {
    cur.push_back(k);
    subsets.push_back(cur);
  }
  return subsets;
}

}  // namespace stabsel

#endif  // STABSEL_ORDERING_HPP
