#ifndef STABSEL_MATCHING_HPP
#define STABSEL_MATCHING_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "stabsel/core.hpp"
#include "stabsel/effect.hpp"
#include "stabsel/glm.hpp"
#include "stabsel/min_cost_flow.hpp"

namespace stabsel {

enum class DistanceKind { abs_logit_ps, abs_ps };

// Optimal full matching: a partition of the sample into strata, each holding
// at least one treated and at least one control unit and never two or more of
// both, minimizing the total treated-control distance within strata.
struct FullMatch {
  std::vector<std::vector<int>> strata;  // sorted unit indices; strata ordered by first member
  std::vector<int> stratum_of;           // unit -> stratum id
  double total_distance = 0.0;
  DistanceKind distance_kind = DistanceKind::abs_logit_ps;
};

struct MatchOptions {
  DistanceKind distance = DistanceKind::abs_logit_ps;
  int max_controls_per_treated = 0;  // 0 = unconstrained
  int max_treated_per_control = 0;   // 0 = unconstrained
  double ps_clip = 1e-6;             // applied to the logit transform only
  double cost_scale = 1e6;           // distances are rounded to integer costs at this scale
};

struct PsFit {
  Vector ps;      // fitted treatment probabilities
  FittedGlm fit;  // carries separation_warning when the fit is capped
};

// Fitted logistic propensity scores on the given covariate subset (intercept
// always included; empty subset gives the sample treated fraction).
inline PsFit ps_for_subset(const Dataset& data, const std::vector<int>& subset) {
  data.validate();
  const DesignMatrix X = detail::build_design(data, subset, -1, false);
  PsFit out;
  out.fit = fit_logistic(data.treatment, X);
  out.ps = fitted_response(out.fit, X.values);
  return out;
}

namespace detail {

inline double match_distance(double ps_a, double ps_b, DistanceKind kind, double clip) {
  if (kind == DistanceKind::abs_ps) return std::abs(ps_a - ps_b);
  const auto clipped_logit = [clip](double p) { return logit(std::clamp(p, clip, 1.0 - clip)); };
  return std::abs(clipped_logit(ps_a) - clipped_logit(ps_b));
}

}  // namespace detail

// Solves the optimal full matching as a minimum-cost edge cover of the
// treated-control bipartite graph: every treated unit must send at least one
// unit of flow, every control must receive at least one, and each selected
// treated-control pair becomes a within-stratum link. Lower bounds are
// removed by the standard excess/deficit transformation, after which costs
// live only on the pair arcs and stay nonnegative.
inline FullMatch full_match(const Vector& ps, const Vector& treatment,
                            const MatchOptions& opts = {}) {
  const Eigen::Index n = ps.size();
  if (treatment.size() != n) throw ContractError("full_match: length mismatch");
  std::vector<int> treated, control;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(ps[i]) || ps[i] <= 0.0 || ps[i] >= 1.0)
      throw Error("full_match: propensity score at unit " + std::to_string(i) +
                  " is not inside (0,1)");
    (treatment[i] > 0.5 ? treated : control).push_back(static_cast<int>(i));
  }
  const int nt = static_cast<int>(treated.size());
  const int nc = static_cast<int>(control.size());
  if (nt == 0 || nc == 0)
    throw DegenerateResponseError("full_match: both treatment classes are required");

  std::vector<double> dist(static_cast<size_t>(nt) * nc);
  std::vector<std::int64_t> cost(dist.size());
  for (int t = 0; t < nt; ++t)
    for (int c = 0; c < nc; ++c) {
      const double d =
          detail::match_distance(ps[treated[t]], ps[control[c]], opts.distance, opts.ps_clip);
      if (!std::isfinite(d)) throw Error("full_match: non-finite pair distance");
      dist[static_cast<size_t>(t) * nc + c] = d;
      cost[static_cast<size_t>(t) * nc + c] = std::llround(d * opts.cost_scale);
    }

  const int cap_t = opts.max_controls_per_treated > 0 ? opts.max_controls_per_treated : nc;
  const int cap_c = opts.max_treated_per_control > 0 ? opts.max_treated_per_control : nt;

  // Nodes: 0 super-source, 1 super-sink, 2 source-side hub, 3 sink-side hub,
  // then treated, then control.
  const int kSuper = 0, kSuperSink = 1, kHubS = 2, kHubK = 3;
  const auto t_node = [&](int t) { return 4 + t; };
  const auto c_node = [&](int c) { return 4 + nt + c; };
  MinCostFlow network(4 + nt + nc);

  for (int t = 0; t < nt; ++t) {
    network.add_arc(kSuper, t_node(t), 1, 0);          // forced unit from the lower bound
    network.add_arc(kHubS, t_node(t), cap_t - 1, 0);   // remaining capacity
  }
  network.add_arc(kSuper, kHubK, nc, 0);
  network.add_arc(kHubS, kSuperSink, nt, 0);
  std::vector<int> pair_arcs(dist.size());
  for (int t = 0; t < nt; ++t)
    for (int c = 0; c < nc; ++c)
      pair_arcs[static_cast<size_t>(t) * nc + c] =
          network.add_arc(t_node(t), c_node(c), 1, cost[static_cast<size_t>(t) * nc + c]);
  for (int c = 0; c < nc; ++c) {
    network.add_arc(c_node(c), kSuperSink, 1, 0);
    network.add_arc(c_node(c), kHubK, cap_c - 1, 0);
  }
  network.add_arc(kHubK, kHubS, static_cast<std::int64_t>(nt) + nc, 0);

  const auto [flow, total_cost] = network.solve(kSuper, kSuperSink, nt + nc);
  (void)total_cost;
  if (flow != nt + nc)
    throw Error("full_match: ratio constraints leave no feasible full matching");

  // Selected treated-control links, then prune: while an edge has degree >= 2
  // at both endpoints it is redundant and (in an optimal cover) free to drop.
  // Afterwards every component is a star, which is exactly the minimal
  // full-matching structure.
  struct Edge {
    int t, c;
    double d;
  };
  std::vector<Edge> edges;
  std::vector<int> deg_t(nt, 0), deg_c(nc, 0);
  for (int t = 0; t < nt; ++t)
    for (int c = 0; c < nc; ++c)
      if (network.flow_on(pair_arcs[static_cast<size_t>(t) * nc + c]) > 0) {
        edges.push_back({t, c, dist[static_cast<size_t>(t) * nc + c]});
        ++deg_t[t];
        ++deg_c[c];
      }
  std::vector<size_t> order(edges.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return edges[a].d > edges[b].d; });
  std::vector<bool> kept(edges.size(), true);
  bool changed = true;
  while (changed) {
    changed = false;
    for (size_t idx : order) {
      if (!kept[idx]) continue;
      const Edge& e = edges[idx];
      if (deg_t[e.t] >= 2 && deg_c[e.c] >= 2) {
        kept[idx] = false;
        --deg_t[e.t];
        --deg_c[e.c];
        changed = true;
      }
    }
  }

  // Strata = connected components of the kept links.
  std::vector<int> comp(n, -1);
  {
    std::vector<std::vector<int>> adj(n);
    for (size_t idx = 0; idx < edges.size(); ++idx) {
      if (!kept[idx]) continue;
      const int u = treated[edges[idx].t], v = control[edges[idx].c];
      adj[u].push_back(v);
      adj[v].push_back(u);
    }
    int next = 0;
    std::vector<int> stack;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (comp[i] >= 0) continue;
      comp[i] = next;
      stack.push_back(static_cast<int>(i));
      while (!stack.empty()) {
        const int u = stack.back();
        stack.pop_back();
        for (int v : adj[u])
          if (comp[v] < 0) {
            comp[v] = next;
            stack.push_back(v);
          }
      }
      ++next;
    }
    FullMatch match;
    match.distance_kind = opts.distance;
    match.stratum_of = comp;
    match.strata.resize(next);
    for (Eigen::Index i = 0; i < n; ++i) match.strata[comp[i]].push_back(static_cast<int>(i));
    for (size_t idx = 0; idx < edges.size(); ++idx)
      if (kept[idx]) match.total_distance += edges[idx].d;

    for (const auto& stratum : match.strata) {
      int st = 0, sc = 0;
      for (int u : stratum) (treatment[u] > 0.5 ? st : sc)++;
      if (st < 1 || sc < 1)
        throw Error("full_match: internal error, stratum lacks a treated or control unit");
      if (st >= 2 && sc >= 2)
        throw Error("full_match: internal error, stratum is not minimal");
    }
    return match;
  }
}

}  // namespace stabsel

#endif  // STABSEL_MATCHING_HPP
