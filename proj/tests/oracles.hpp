// Test-only oracles, independent of the library implementation paths they
// check: quadrature normal CDF, Kolmogorov-Smirnov tail, brute-force full
// matching over set partitions, and a tiny Newton logistic solver.

#ifndef STABSEL_TESTS_ORACLES_HPP
#define STABSEL_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace oracles {

// Standard-normal upper tail by Simpson quadrature of the density on [0, z]
// (plus symmetry), nothing shared with std::erfc.
inline double normal_upper_tail(double z) {
  const double az = std::abs(z);
  const int steps = 4000;
  const double h = az / steps;
  double integral = 0.0;
  const auto phi = [](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); };
  for (int i = 0; i < steps; ++i) {
    const double a = i * h, b = (i + 1) * h;
    integral += (b - a) / 6.0 * (phi(a) + 4.0 * phi(0.5 * (a + b)) + phi(b));
  }
  const double upper_abs = 0.5 - integral;
  return z >= 0 ? upper_abs : 1.0 - upper_abs;
}

inline double two_sided_normal_p(double z) { return 2.0 * normal_upper_tail(std::abs(z)); }

// Asymptotic Kolmogorov distribution tail: P(sqrt(n) D > x).
inline double kolmogorov_tail(double x) {
  if (x <= 0.0) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-16) break;
  }
  return std::min(1.0, std::max(0.0, 2.0 * sum));
}

// KS p-value of a sample against a given CDF.
inline double ks_test_p(std::vector<double> sample, const std::function<double(double)>& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max(d, std::abs(f - static_cast<double>(i) / n));
    d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
  }
  return kolmogorov_tail(std::sqrt(n) * d);
}

inline double standard_normal_cdf(double x) { return 1.0 - normal_upper_tail(x); }

// Exhaustive optimal full matching: minimum over all set partitions whose
// blocks each contain at least one treated and one control unit, of the total
// treated-control pair distance within blocks. Feasible for n <= 9 or so.
inline double brute_force_full_match(const std::vector<double>& score,
                                     const std::vector<int>& treated_flag,
                                     const std::function<double(double, double)>& dist) {
  const int n = static_cast<int>(score.size());
  std::vector<int> block(n, -1);
  double best = std::numeric_limits<double>::infinity();

  const std::function<void(int, int)> recurse = [&](int unit, int n_blocks) {
    if (unit == n) {
      // Every block needs both classes.
      std::vector<int> has_t(n_blocks, 0), has_c(n_blocks, 0);
      for (int i = 0; i < n; ++i) (treated_flag[i] ? has_t : has_c)[block[i]] = 1;
      for (int b = 0; b < n_blocks; ++b)
        if (!has_t[b] || !has_c[b]) return;
      double total = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
          if (block[i] == block[j] && treated_flag[i] != treated_flag[j])
            total += dist(score[i], score[j]);
      best = std::min(best, total);
      return;
    }
    for (int b = 0; b <= n_blocks; ++b) {
      block[unit] = b;
      recurse(unit + 1, std::max(n_blocks, b + 1));
    }
    block[unit] = -1;
  };
  recurse(0, 0);
  return best;
}

// Newton-Raphson logistic MLE on a small dense design; independent of the
// library's IRLS path.
inline Eigen::VectorXd newton_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                       const Eigen::VectorXd& w) {
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(X.cols());
  for (int it = 0; it < 200; ++it) {
    const Eigen::VectorXd eta = X * beta;
    Eigen::VectorXd p(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) p[i] = 1.0 / (1.0 + std::exp(-eta[i]));
    const Eigen::VectorXd grad = X.transpose() * (w.cwiseProduct(y - p));
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(X.cols(), X.cols());
    for (Eigen::Index i = 0; i < eta.size(); ++i)
      hess += w[i] * p[i] * (1.0 - p[i]) * X.row(i).transpose() * X.row(i);
    const Eigen::VectorXd step = hess.fullPivLu().solve(grad);
    beta += step;
    if (step.cwiseAbs().maxCoeff() < 1e-12) break;
  }
  return beta;
}

}  // namespace oracles

#endif  // STABSEL_TESTS_ORACLES_HPP
