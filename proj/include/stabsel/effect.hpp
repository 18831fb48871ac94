#ifndef STABSEL_EFFECT_HPP
#define STABSEL_EFFECT_HPP

#include <cmath>
#include <optional>
#include <vector>

#include "stabsel/core.hpp"
#include "stabsel/glm.hpp"
#include "stabsel/ordering.hpp"

namespace stabsel {

enum class EstimatorKind { doubly_robust_standardization, ols_linear };

// Marginal treatment-effect estimate for one covariate subset together with
// the per-unit influence values its asymptotic variance is built from.
struct EffectEstimate {
  int orbit_index = 0;
  double psi_hat = 0.0;
  Vector influence;  // centered: sums to zero by construction
  EstimatorKind kind = EstimatorKind::doubly_robust_standardization;
  Vector weights_used;     // inverse-probability weights; empty for ols_linear
  double max_weight = 0.0;

  Eigen::Index n() const { return influence.size(); }
};

struct DiffVariance {
  int orbit_j = 0;
  int orbit_k = 0;
  double variance = 0.0;                 // of sqrt(n) * (psi_j - psi_k)
  std::optional<double> std_diff;        // undefined when variance is zero and j != k
};

// Inverse probability of treatment weights: 1/ps for treated units,
// 1/(1-ps) for controls. Every weight is at least 1.
inline Vector ipt_weights(const Vector& treatment, const Vector& ps) {
  if (treatment.size() != ps.size())
    throw ContractError("ipt_weights: length mismatch");
  Vector w(ps.size());
  for (Eigen::Index i = 0; i < ps.size(); ++i) {
    const double p = ps[i];
    if (!(p > 0.0 && p < 1.0) || !std::isfinite(p))
      throw NonfiniteWeightError(
          "ipt_weights: propensity score at unit " + std::to_string(i) +
              " is outside (0,1); weight would be non-finite",
          static_cast<int>(i));
    w[i] = treatment[i] > 0.5 ? 1.0 / p : 1.0 / (1.0 - p);
  }
  return w;
}

namespace detail {

inline void check_influence_centered(const Vector& influence) {
  const double scale = influence.cwiseAbs().maxCoeff();
  const double m = influence.mean();
  if (std::abs(m) > 1e-8 * std::max(1.0, scale))
    throw Error("effect: influence values do not average to zero");
}

}  // namespace detail

// Doubly robust standardization: logistic propensity score on the subset,
// outcome regression on (subset, treatment) fitted with the inverse
// probability weights, then the augmented estimator of E(Y^1) - E(Y^0).
inline EffectEstimate dr_effect(const Dataset& data, const std::vector<int>& subset,
                                int orbit_index = -1) {
  data.validate();
  const Eigen::Index n = data.n_units();

  const DesignMatrix Xps = detail::build_design(data, subset, -1, false);
  const FittedGlm ps_fit = fit_logistic(data.treatment, Xps);
  const Vector ps = fitted_response(ps_fit, Xps.values);
  const Vector w = ipt_weights(data.treatment, ps);

  DesignMatrix Xout = detail::build_design(data, subset, -1, true);
  const bool binary_y = data.outcome_kind == OutcomeKind::binary;
  const FittedGlm out_fit = binary_y ? fit_logistic(data.outcome, Xout, w)
                                     : fit_linear(data.outcome, Xout, w);

  const Vector m_obs = fitted_response(out_fit, Xout.values);
  Xout.values.col(Xout.q() - 1).setOnes();
  const Vector m1 = fitted_response(out_fit, Xout.values);
  Xout.values.col(Xout.q() - 1).setZero();
  const Vector m0 = fitted_response(out_fit, Xout.values);

  Vector contrib(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double sign = 2.0 * data.treatment[i] - 1.0;
    contrib[i] = sign * w[i] * (data.outcome[i] - m_obs[i]) + m1[i] - m0[i];
  }

  EffectEstimate e;
  e.orbit_index = orbit_index >= 0 ? orbit_index : static_cast<int>(subset.size());
  e.psi_hat = contrib.mean();
  e.influence = contrib.array() - e.psi_hat;
  e.kind = EstimatorKind::doubly_robust_standardization;
  e.weights_used = w;
  e.max_weight = w.maxCoeff();
  detail::check_influence_centered(e.influence);
  return e;
}

// All-linear variant: OLS coefficient of treatment in the outcome regression,
// with the influence function built from the treatment- and outcome-model
// residuals.
inline EffectEstimate ols_effect(const Dataset& data, const std::vector<int>& subset,
                                 int orbit_index = -1) {
  data.validate();
  const Eigen::Index n = data.n_units();

  const DesignMatrix Xa = detail::build_design(data, subset, -1, false);
  const FittedGlm a_fit = fit_linear(data.treatment, Xa);
  const Vector res_a = data.treatment - linear_predictor(a_fit, Xa.values);

  const DesignMatrix Xy = detail::build_design(data, subset, -1, true);
  const FittedGlm y_fit = fit_linear(data.outcome, Xy);
  const Vector res_y = data.outcome - linear_predictor(y_fit, Xy.values);

  const double denom = data.treatment.dot(res_a) / static_cast<double>(n);
  if (std::abs(denom) < 1e-12)
    throw Error("ols_effect: treatment is collinear with the covariate subset (degenerate design)");

  EffectEstimate e;
  e.orbit_index = orbit_index >= 0 ? orbit_index : static_cast<int>(subset.size());
  e.psi_hat = y_fit.coefficients[Xy.q() - 1];
  e.influence = res_a.cwiseProduct(res_y) / denom;
  e.kind = EstimatorKind::ols_linear;
  e.max_weight = 0.0;
  detail::check_influence_centered(e.influence);
  return e;
}

// Variance of sqrt(n) * (psi_j - psi_k) from the paired influence values, and
// the standardized difference between the two estimates. Pairing unit i's
// influence values across orbits is what captures the cross-orbit correlation.
inline DiffVariance diff_variance(const EffectEstimate& e_j, const EffectEstimate& e_k) {
  if (e_j.n() != e_k.n())
    throw ContractError("diff_variance: estimates computed on different sample sizes");
  if (e_j.kind != e_k.kind)
    throw ContractError("diff_variance: estimates of mixed estimator kinds");
  const Eigen::Index n = e_j.n();
  if (n < 2) throw ContractError("diff_variance: need at least two units");

  DiffVariance d;
  d.orbit_j = e_j.orbit_index;
  d.orbit_k = e_k.orbit_index;
  d.variance = (e_j.influence - e_k.influence).squaredNorm() / static_cast<double>(n - 1);
  if (d.variance > 0.0)
    d.std_diff = (e_j.psi_hat - e_k.psi_hat) / std::sqrt(d.variance / static_cast<double>(n));
  return d;
}

// Sandwich-style variance of a single estimate (the j = k degenerate form of
// the paired variance with a zero benchmark influence).
inline double own_variance(const EffectEstimate& e) {
  const Eigen::Index n = e.n();
  if (n < 2) throw ContractError("own_variance: need at least two units");
  return e.influence.squaredNorm() / static_cast<double>(n - 1);
}

inline double influence_se(const EffectEstimate& e) {
  return std::sqrt(own_variance(e) / static_cast<double>(e.n()));
}

}  // namespace stabsel

#endif  // STABSEL_EFFECT_HPP
