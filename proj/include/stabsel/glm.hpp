#ifndef STABSEL_GLM_HPP
#define STABSEL_GLM_HPP

#include <algorithm>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "stabsel/core.hpp"

namespace stabsel {

enum class Link { identity, logit };

// Model matrix with an explicit intercept in the first column.
struct DesignMatrix {
  Matrix values;  // n x q, first column all ones
  std::vector<std::string> column_labels;

  Eigen::Index n() const { return values.rows(); }
  Eigen::Index q() const { return values.cols(); }
};

struct FittedGlm {
  Link link = Link::identity;
  Vector coefficients;
  Matrix covariance;  // model-based: (X'WX)^{-1} sigma2 (identity), inverse information (logit)
  bool converged = false;
  int iterations = 0;
  double deviance = 0.0;
  bool separation_warning = false;  // logit only; fit is usable but capped
  double dispersion = 1.0;          // sigma2 for identity, fixed 1 for logit
};

struct WaldTest {
  double estimate = 0.0;
  double std_error = 0.0;
  double z = 0.0;
  double p_value = 1.0;
  bool degenerate = false;  // zero standard error
};

struct GlmOptions {
  int max_iter = 50;
  double tol = 1e-8;             // max absolute coefficient change
  double separation_cap = 10.0;  // |coef| beyond this with non-convergence flags separation
  double rank_tol = 1e-10;       // relative pivot tolerance for rank detection
};

namespace detail {

inline void check_design(const DesignMatrix& X) {
  const Eigen::Index n = X.n(), q = X.q();
  if (q < 1) throw ContractError("design: at least the intercept column is required");
  if (X.column_labels.size() != static_cast<size_t>(q))
    throw ContractError("design: label count does not match columns");
  if (n < q) throw ContractError("design: fewer rows than columns");
  if ((X.values.col(0).array() != 1.0).any())
    throw ContractError("design: first column must be the intercept (all ones)");
  for (Eigen::Index j = 1; j < q; ++j)
    if ((X.values.col(j).array() == 0.0).all())
      throw SingularDesignError("design: column '" + X.column_labels[j] + "' is identically zero",
                                {X.column_labels[j]});
}

// Rank check on rows with positive weight; throws naming the columns that a
// column-pivoted QR leaves outside the leading rank pivots.
inline void check_full_rank(const Matrix& A, const std::vector<std::string>& labels,
                            double rank_tol) {
  Eigen::ColPivHouseholderQR<Matrix> qr(A);
  qr.setThreshold(rank_tol);
  const Eigen::Index rank = qr.rank();
  if (rank == A.cols()) return;
  std::vector<std::string> bad;
  const auto& perm = qr.colsPermutation().indices();
  for (Eigen::Index j = rank; j < A.cols(); ++j) bad.push_back(labels[perm[j]]);
  std::ostringstream msg;
  msg << "singular design: rank " << rank << " < " << A.cols() << "; offending column(s):";
  for (const auto& b : bad) msg << " '" << b << "'";
  throw SingularDesignError(msg.str(), bad);
}

inline Vector resolve_weights(const std::optional<Vector>& weights, Eigen::Index n) {
  if (!weights) return Vector::Ones(n);
  if (weights->size() != n) throw ContractError("weights: length does not match rows");
  if ((weights->array() < 0.0).any() || !weights->allFinite())
    throw ContractError("weights: must be finite and nonnegative");
  return *weights;
}

inline double binomial_deviance(const Vector& y, const Vector& p, const Vector& w) {
  double dev = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double pi = std::clamp(p[i], 1e-300, 1.0 - 1e-16);
    dev += w[i] * (y[i] > 0.5 ? -2.0 * std::log(pi) : -2.0 * std::log1p(-pi));
  }
  return dev;
}

}  // namespace detail

// Weighted least squares. Coefficients solve the (weighted) normal equations;
// covariance is model-based (X'WX)^{-1} sigma2 with sigma2 = RSS_w / (n - q).
inline FittedGlm fit_linear(const Vector& y, const DesignMatrix& X,
                            const std::optional<Vector>& weights = std::nullopt,
                            const GlmOptions& opts = {}) {
  detail::check_design(X);
  const Eigen::Index n = X.n(), q = X.q();
  if (y.size() != n) throw ContractError("fit_linear: response length does not match design");
  const Vector w = detail::resolve_weights(weights, n);

  const Vector sw = w.array().sqrt();
  const Matrix A = sw.asDiagonal() * X.values;
  const Vector b = sw.cwiseProduct(y);
  detail::check_full_rank(A, X.column_labels, opts.rank_tol);

  Eigen::ColPivHouseholderQR<Matrix> qr(A);
  qr.setThreshold(opts.rank_tol);
  const Vector beta = qr.solve(b);

  const double rss = (b - A * beta).squaredNorm();
  const double sigma2 = (n > q) ? rss / static_cast<double>(n - q) : 0.0;

  // (X'WX)^{-1} = P R^{-1} R^{-T} P' from the pivoted QR factors.
  const Matrix R = qr.matrixR().topLeftCorner(q, q).template triangularView<Eigen::Upper>();
  const Matrix Rinv = R.template triangularView<Eigen::Upper>().solve(Matrix::Identity(q, q));
  Matrix inv_xtwx = Rinv * Rinv.transpose();
  const auto& P = qr.colsPermutation();
  inv_xtwx = P * inv_xtwx * P.transpose();

  FittedGlm fit;
  fit.link = Link::identity;
  fit.coefficients = beta;
  fit.covariance = 0.5 * sigma2 * (inv_xtwx + inv_xtwx.transpose());
  fit.converged = true;
  fit.iterations = 1;
  fit.deviance = rss;
  fit.dispersion = sigma2;
  return fit;
}

// Logistic regression by iteratively reweighted least squares with
// step-halving on deviance increase. Optional prior weights enter the score
// and information as a common factor. Separation is flagged, not fatal.
inline FittedGlm fit_logistic(const Vector& y, const DesignMatrix& X,
                              const std::optional<Vector>& weights = std::nullopt,
                              const GlmOptions& opts = {}) {
  detail::check_design(X);
  const Eigen::Index n = X.n(), q = X.q();
  if (y.size() != n) throw ContractError("fit_logistic: response length does not match design");
  const Vector w = detail::resolve_weights(weights, n);

  double w0 = 0.0, w1 = 0.0, wsum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (y[i] != 0.0 && y[i] != 1.0)
      throw ContractError("fit_logistic: response must be coded 0/1");
    if (w[i] > 0.0) {
      (y[i] > 0.5 ? w1 : w0) += w[i];
      wsum += w[i];
    }
  }
  if (w0 == 0.0 || w1 == 0.0)
    throw DegenerateResponseError("fit_logistic: response contains a single class");

  {
    const Vector sw = w.array().sqrt();
    const Matrix A = sw.asDiagonal() * X.values;
    detail::check_full_rank(A, X.column_labels, opts.rank_tol);
  }

  Vector beta = Vector::Zero(q);
  beta[0] = logit(std::clamp(w1 / wsum, 1e-6, 1.0 - 1e-6));

  Vector eta = X.values * beta;
  Vector p = eta.unaryExpr([](double e) { return expit(e); });
  double dev = detail::binomial_deviance(y, p, w);

  bool converged = false;
  int it = 0;
  Matrix info(q, q);
  for (; it < opts.max_iter; ++it) {
    const Vector wirls =
        (w.array() * p.array() * (1.0 - p.array())).max(1e-12).matrix();
    const Vector score = X.values.transpose() * (w.cwiseProduct(y - p));
    info.noalias() = X.values.transpose() * wirls.asDiagonal() * X.values;
    Vector delta = info.ldlt().solve(score);

    // Step-halving: keep the Newton direction but shrink until the deviance
    // does not increase.
    Vector beta_new = beta + delta;
    Vector eta_new = X.values * beta_new;
    Vector p_new = eta_new.unaryExpr([](double e) { return expit(e); });
    double dev_new = detail::binomial_deviance(y, p_new, w);
    int halvings = 0;
    while (dev_new > dev + 1e-10 && halvings < 30) {
      delta *= 0.5;
      beta_new = beta + delta;
      eta_new = X.values * beta_new;
      p_new = eta_new.unaryExpr([](double e) { return expit(e); });
      dev_new = detail::binomial_deviance(y, p_new, w);
      ++halvings;
    }

    const double max_change = delta.cwiseAbs().maxCoeff();
    beta = beta_new;
    eta.swap(eta_new);
    p.swap(p_new);
    dev = dev_new;
    if (max_change < opts.tol) {
      converged = true;
      ++it;
      break;
    }
  }

  const Vector wirls_final =
      (w.array() * p.array() * (1.0 - p.array())).max(1e-12).matrix();
  info.noalias() = X.values.transpose() * wirls_final.asDiagonal() * X.values;
  Matrix cov = info.ldlt().solve(Matrix::Identity(q, q));

  FittedGlm fit;
  fit.link = Link::logit;
  fit.coefficients = beta;
  fit.covariance = 0.5 * (cov + cov.transpose());
  fit.converged = converged;
  fit.iterations = it;
  fit.deviance = dev;
  fit.dispersion = 1.0;
  fit.separation_warning =
      !converged && beta.cwiseAbs().maxCoeff() > opts.separation_cap;
  return fit;
}

inline Vector linear_predictor(const FittedGlm& fit, const Matrix& X) {
  return X * fit.coefficients;
}

inline Vector fitted_response(const FittedGlm& fit, const Matrix& X) {
  Vector eta = linear_predictor(fit, X);
  if (fit.link == Link::identity) return eta;
  return eta.unaryExpr([](double e) { return expit(e); });
}

// Two-sided Wald test of a single coefficient against zero, standard-normal
// reference.
inline WaldTest wald_test(const FittedGlm& fit, Eigen::Index coef_index) {
  if (coef_index < 0 || coef_index >= fit.coefficients.size())
    throw ContractError("wald_test: coefficient index out of range");
  WaldTest t;
  t.estimate = fit.coefficients[coef_index];
  const double var = fit.covariance(coef_index, coef_index);
  t.std_error = var > 0.0 ? std::sqrt(var) : 0.0;
  if (t.std_error > 0.0) {
    t.z = t.estimate / t.std_error;
    t.p_value = normal_two_sided_p(t.z);
  } else {
    t.degenerate = true;
    t.z = t.estimate != 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    t.p_value = t.estimate != 0.0 ? 0.0 : 1.0;
  }
  return t;
}

}  // namespace stabsel

#endif  // STABSEL_GLM_HPP
