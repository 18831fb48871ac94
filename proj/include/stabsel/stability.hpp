#ifndef STABSEL_STABILITY_HPP
#define STABSEL_STABILITY_HPP

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stabsel/core.hpp"
#include "stabsel/effect.hpp"

namespace stabsel {

struct StabilityOptions {
  int window_width = 5;               // odd, >= 3; shrunk when J is too small
  std::optional<int> benchmark;       // 1-based orbit; defaults to J
};

// Trajectory diagnostics of the per-orbit estimates against the benchmark:
// standardized differences, windowed inverse-variance Q, and the selected
// orbit. Vectors are indexed by orbit - 1.
struct StabilityReport {
  int J = 0;
  int benchmark = 0;
  int window_width = 0;  // effective width after any shrink
  std::vector<double> differences;               // psi_j - psi_benchmark
  std::vector<double> variances;                 // Var(psi_j - psi_benchmark), unscaled
  std::vector<std::optional<double>> std_diffs;  // undefined at the benchmark / zero variance
  std::map<int, double> q_values;                // orbit -> Q, where the window fits
  int selected_orbit = 0;
  std::vector<std::string> notes;
};

// Windowed inverse-variance Q computed from raw differences and their
// variances. The benchmark orbit carries weight zero; so does any orbit with
// zero or non-finite variance (its 1/variance weight would be infinite).
// Defined for every center whose full window lies inside 1..J.
inline std::map<int, double> q_from_differences(const std::vector<double>& differences,
                                                const std::vector<double>& variances,
                                                int window_width, int benchmark) {
  const int J = static_cast<int>(differences.size());
  if (static_cast<int>(variances.size()) != J)
    throw ContractError("q_from_differences: differences/variances length mismatch");
  if (window_width < 1 || window_width % 2 == 0)
    throw ContractError("q_from_differences: window width must be odd and positive");
  const int h = (window_width - 1) / 2;

  std::map<int, double> q;
  for (int j = 1 + h; j <= J - h; ++j) {
    double wsum = 0.0, dsum = 0.0;
    for (int k = j - h; k <= j + h; ++k) {
      const double var = variances[k - 1];
      if (k == benchmark || !(var > 0.0) || !std::isfinite(var)) continue;
      const double w = 1.0 / var;
      wsum += w;
      dsum += w * differences[k - 1];
    }
    if (wsum <= 0.0) continue;  // every weight vanished; Q undefined here
    const double dbar = dsum / wsum;
    double qj = 0.0;
    for (int k = j - h; k <= j + h; ++k) {
      const double var = variances[k - 1];
      if (k == benchmark || !(var > 0.0) || !std::isfinite(var)) continue;
      const double dev = differences[k - 1] - dbar;
      qj += (1.0 / var) * dev * dev;
    }
    q[j] = qj;
  }
  return q;
}

// Smallest orbit attaining the minimal Q among the defined values.
inline int select_stable_orbit(const std::map<int, double>& q_values) {
  int best = -1;
  double best_q = std::numeric_limits<double>::infinity();
  for (const auto& [orbit, q] : q_values) {
    if (q < best_q) {
      best_q = q;
      best = orbit;
    }
  }
  if (best < 0) throw Error("select_stable_orbit: no orbit has a defined Q value");
  return best;
}

// Standardized differences of every orbit against the benchmark (entry for
// the benchmark itself is undefined).
inline std::vector<std::optional<double>> std_diff_trajectory(
    const std::vector<EffectEstimate>& estimates, int benchmark) {
  const int J = static_cast<int>(estimates.size());
  if (benchmark < 1 || benchmark > J)
    throw ContractError("std_diff_trajectory: benchmark orbit out of range");
  std::vector<std::optional<double>> out(J);
  for (int j = 1; j <= J; ++j) {
    if (j == benchmark) continue;
    out[j - 1] = diff_variance(estimates[j - 1], estimates[benchmark - 1]).std_diff;
  }
  return out;
}

inline std::map<int, double> cochran_q(const std::vector<EffectEstimate>& estimates,
                                       int window_width, int benchmark) {
  const int J = static_cast<int>(estimates.size());
  std::vector<double> diffs(J), vars(J);
  for (int j = 1; j <= J; ++j) {
    const DiffVariance dv = diff_variance(estimates[j - 1], estimates[benchmark - 1]);
    diffs[j - 1] = estimates[j - 1].psi_hat - estimates[benchmark - 1].psi_hat;
    vars[j - 1] = dv.variance / static_cast<double>(estimates[j - 1].n());
  }
  return q_from_differences(diffs, vars, window_width, benchmark);
}

// Full trajectory assessment: standardized differences against the benchmark,
// windowed Q values, and the selected orbit. Shrinks the window to the
// largest odd width that fits when J is small, and records the substitution.
inline StabilityReport assess_stability(const std::vector<EffectEstimate>& estimates,
                                        const StabilityOptions& options = {}) {
  const int J = static_cast<int>(estimates.size());
  if (J < 2) throw ContractError("assess_stability: need at least two orbits");
  StabilityReport report;
  report.J = J;
  report.benchmark = options.benchmark.value_or(J);
  if (report.benchmark < 1 || report.benchmark > J)
    throw ContractError("assess_stability: benchmark orbit out of range");

  int width = options.window_width;
  if (width < 1 || width % 2 == 0)
    throw ContractError("assess_stability: window width must be odd and positive");
  if (width > J) {
    width = (J % 2 == 1) ? J : J - 1;
    report.notes.push_back("window width shrunk to " + std::to_string(width) +
                           " (only " + std::to_string(J) + " orbits)");
  }
  report.window_width = width;

  report.differences.resize(J);
  report.variances.resize(J);
  report.std_diffs.resize(J);
  for (int j = 1; j <= J; ++j) {
    const DiffVariance dv = diff_variance(estimates[j - 1], estimates[report.benchmark - 1]);
    report.differences[j - 1] =
        estimates[j - 1].psi_hat - estimates[report.benchmark - 1].psi_hat;
    report.variances[j - 1] = dv.variance / static_cast<double>(estimates[j - 1].n());
    if (j != report.benchmark) {
      report.std_diffs[j - 1] = dv.std_diff;
      if (!dv.std_diff)
        report.notes.push_back("orbit " + std::to_string(j) +
                               ": zero-variance difference, standardized value undefined");
    }
  }

  report.q_values =
      q_from_differences(report.differences, report.variances, width, report.benchmark);
  report.selected_orbit = select_stable_orbit(report.q_values);
  return report;
}

}  // namespace stabsel

#endif  // STABSEL_STABILITY_HPP
