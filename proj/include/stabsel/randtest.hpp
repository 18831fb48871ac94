#ifndef STABSEL_RANDTEST_HPP
#define STABSEL_RANDTEST_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "stabsel/core.hpp"
#include "stabsel/matching.hpp"

namespace stabsel {

struct RandTestResult {
  double observed_stat = 0.0;
  double p_value = 1.0;
  long draws = 0;                 // Monte Carlo draws, or |Omega| for the exact test
  std::uint64_t seed = 0;         // 0 for the exact test
  std::vector<int> per_stratum_treated_counts;
  bool exact = false;
};

// Stratum-size-weighted sum of treated outcomes:
//   n^{-1} sum_r n_r sum_{i in stratum r} A_i Y_i.
inline double test_statistic(const std::vector<std::vector<int>>& strata, const Vector& treatment,
                             const Vector& y) {
  if (treatment.size() != y.size()) throw ContractError("test_statistic: length mismatch");
  const double n = static_cast<double>(y.size());
  double stat = 0.0;
  for (const auto& stratum : strata) {
    double s = 0.0;
    for (int i : stratum)
      if (treatment[i] > 0.5) s += y[i];
    stat += static_cast<double>(stratum.size()) * s;
  }
  return stat / n;
}

namespace detail {

struct StratumInfo {
  std::vector<int> units;
  int n_treated = 0;
};

inline std::vector<StratumInfo> stratum_info(const std::vector<std::vector<int>>& strata,
                                             const Vector& treatment, Eigen::Index n) {
  std::vector<bool> seen(n, false);
  std::vector<StratumInfo> info;
  info.reserve(strata.size());
  for (const auto& stratum : strata) {
    StratumInfo s;
    s.units = stratum;
    for (int i : stratum) {
      if (i < 0 || i >= n || seen[i])
        throw ContractError("randtest: strata must partition the units");
      seen[i] = true;
      if (treatment[i] > 0.5) ++s.n_treated;
    }
    info.push_back(std::move(s));
  }
  for (Eigen::Index i = 0; i < n; ++i)
    if (!seen[i]) throw ContractError("randtest: strata must cover every unit");
  return info;
}

}  // namespace detail

// Monte Carlo randomization p-value for the sharp null of no individual
// effect: re-draws which units are treated within each stratum, holding the
// per-stratum treated counts fixed, and compares |statistic| values. The
// observed assignment is counted in the reference set, so
// p = (1 + #extreme) / (C + 1) and the test is valid at any C.
inline RandTestResult randomization_pvalue(const std::vector<std::vector<int>>& strata,
                                           const Vector& treatment, const Vector& y, long n_draws,
                                           std::uint64_t seed) {
  if (n_draws < 1) throw ContractError("randomization_pvalue: need at least one draw");
  const Eigen::Index n = y.size();
  auto info = detail::stratum_info(strata, treatment, n);

  RandTestResult result;
  result.observed_stat = test_statistic(strata, treatment, y);
  result.draws = n_draws;
  result.seed = seed;
  for (const auto& s : info) result.per_stratum_treated_counts.push_back(s.n_treated);

  const double obs_abs = std::abs(result.observed_stat);
  Rng rng(seed);
  long extreme = 0;
  std::vector<int> pool;
  for (long c = 0; c < n_draws; ++c) {
    double stat = 0.0;
    for (const auto& s : info) {
      pool = s.units;
      double treated_sum = 0.0;
      // Partial Fisher-Yates: the first n_treated slots become the draw.
      for (int t = 0; t < s.n_treated; ++t) {
        const auto j = t + static_cast<int>(rng.below(pool.size() - t));
        std::swap(pool[t], pool[j]);
        treated_sum += y[pool[t]];
      }
      stat += static_cast<double>(s.units.size()) * treated_sum;
    }
    stat /= static_cast<double>(n);
    if (std::abs(stat) >= obs_abs) ++extreme;
  }
  result.p_value = static_cast<double>(1 + extreme) / static_cast<double>(n_draws + 1);
  return result;
}

// Exact randomization p-value over the full assignment set
// Omega = prod_r C(n_r, t_r), feasible only when |Omega| stays within the cap.
inline RandTestResult exact_pvalue(const std::vector<std::vector<int>>& strata,
                                   const Vector& treatment, const Vector& y,
                                   double max_assignments = 1e6) {
  const Eigen::Index n = y.size();
  if (strata.empty() || n == 0) throw ContractError("exact_pvalue: no strata");
  auto info = detail::stratum_info(strata, treatment, n);

  double n_assignments = 1.0;
  for (const auto& s : info) {
    const int nr = static_cast<int>(s.units.size());
    double combos = 1.0;
    for (int i = 0; i < s.n_treated; ++i)
      combos = combos * static_cast<double>(nr - i) / static_cast<double>(i + 1);
    n_assignments *= std::round(combos);
    if (n_assignments > max_assignments)
      throw Error("exact_pvalue: |Omega| exceeds " + std::to_string(max_assignments) +
                  " assignments; use randomization_pvalue (Monte Carlo) instead");
  }

  // Per-stratum treated-outcome sums over all within-stratum choices.
  std::vector<std::vector<double>> stratum_sums;
  for (const auto& s : info) {
    const int nr = static_cast<int>(s.units.size());
    const int tr = s.n_treated;
    std::vector<double> sums;
    std::vector<int> comb(tr);
    for (int i = 0; i < tr; ++i) comb[i] = i;
    while (true) {
      double total = 0.0;
      for (int i : comb) total += y[s.units[i]];
      sums.push_back(total * static_cast<double>(nr));
      int pos = tr - 1;
      while (pos >= 0 && comb[pos] == nr - tr + pos) --pos;
      if (pos < 0) break;
      ++comb[pos];
      for (int i = pos + 1; i < tr; ++i) comb[i] = comb[i - 1] + 1;
    }
    stratum_sums.push_back(std::move(sums));
  }

  RandTestResult result;
  result.observed_stat = test_statistic(strata, treatment, y);
  result.exact = true;
  result.draws = static_cast<long>(n_assignments);
  for (const auto& s : info) result.per_stratum_treated_counts.push_back(s.n_treated);
  const double obs_abs = std::abs(result.observed_stat);

  long extreme = 0;
  std::vector<double> partial(stratum_sums.size() + 1, 0.0);
  std::vector<size_t> choice(stratum_sums.size(), 0);
  // Depth-first product over the per-stratum choices.
  size_t depth = 0;
  while (true) {
    if (depth == stratum_sums.size()) {
      if (std::abs(partial[depth] / static_cast<double>(n)) >= obs_abs) ++extreme;
      // Backtrack to the next leaf.
      while (depth > 0) {
        --depth;
        if (++choice[depth] < stratum_sums[depth].size()) break;
        choice[depth] = 0;
        if (depth == 0) {
          result.p_value = static_cast<double>(extreme) / n_assignments;
          return result;
        }
      }
      // Loop re-descends from the updated level.
    }
    partial[depth + 1] = partial[depth] + stratum_sums[depth][choice[depth]];
    ++depth;
  }
}

}  // namespace stabsel

#endif  // STABSEL_RANDTEST_HPP
