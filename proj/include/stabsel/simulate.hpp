#ifndef STABSEL_SIMULATE_HPP
#define STABSEL_SIMULATE_HPP

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <string>
#include <vector>

#include "stabsel/core.hpp"
#include "stabsel/pipeline.hpp"

namespace stabsel {

// Data-generating scenario: covariates are partitioned into confounders (s1),
// outcome-only predictors (s2), instruments or colliders (s3), and noise (s4).
// In collider mode the s3 covariates are driven by two latent factors that
// separately push treatment and outcome, so adjusting for them biases the
// effect estimate.
struct Scenario {
  std::string name;
  int n = 80;
  int p = 25;
  std::vector<int> s1{0, 1};  // confounders (0-based indices)
  std::vector<int> s2{2, 3};  // outcome-only predictors
  std::vector<int> s3{4, 5};  // instruments, or colliders in collider mode
  double gamma_confounder = 1.0;
  double gamma_instrument = 1.6;
  double beta_signal = 0.8;
  OutcomeKind outcome_kind = OutcomeKind::continuous;
  double outcome_sd = 4.0;
  bool collider_mode = false;
  double nu = 2.0;     // latent-factor loading on treatment and outcome
  double beta0 = 0.0;  // outcome intercept in collider mode
};

struct GeneratedData {
  Dataset data;
  Vector true_ps;  // the generating treatment probabilities
  int redraws = 0; // degenerate single-class treatment draws discarded
};

// All sixteen registry scenarios: {base, collider} x {p=25, 60} x
// {|s3|=2, 4} x {continuous, binary}.
inline std::vector<Scenario> scenario_registry() {
  std::vector<Scenario> all;
  for (const bool collider : {false, true})
    for (const int p : {25, 60})
      for (const int n_s3 : {2, 4})
        for (const OutcomeKind kind : {OutcomeKind::continuous, OutcomeKind::binary}) {
          Scenario sc;
          sc.p = p;
          sc.collider_mode = collider;
          sc.outcome_kind = kind;
          sc.s3.clear();
          for (int s = 4; s < 4 + n_s3; ++s) sc.s3.push_back(s);
          sc.name = std::string(collider ? "collider" : "base") + "_p" + std::to_string(p) +
                    "_iv" + std::to_string(n_s3) + "_" +
                    (kind == OutcomeKind::continuous ? "cont" : "bin");
          all.push_back(sc);
        }
  return all;
}

inline Scenario find_scenario(const std::string& name) {
  const auto all = scenario_registry();
  for (const auto& sc : all)
    if (sc.name == name) return sc;
  std::string msg = "unknown scenario '" + name + "'; available:";
  for (const auto& sc : all) msg += " " + sc.name;
  throw ContractError(msg);
}

inline GeneratedData generate(const Scenario& scenario, Rng& rng) {
  const int n = scenario.n, p = scenario.p;
  const auto in = [](const std::vector<int>& set, int s) {
    return std::find(set.begin(), set.end(), s) != set.end();
  };

  GeneratedData out;
  for (int attempt = 0;; ++attempt) {
    Matrix L(n, p);
    Vector u1 = Vector::Zero(n), u2 = Vector::Zero(n);
    if (scenario.collider_mode) {
      for (int i = 0; i < n; ++i) {
        u1[i] = rng.normal() * 0.25;  // N(0, 1/16)
        u2[i] = rng.normal() * 0.25;
      }
    }
    for (int i = 0; i < n; ++i)
      for (int s = 0; s < p; ++s) {
        if (scenario.collider_mode && in(scenario.s3, s)) {
          L(i, s) = 2.0 * u1[i] + 2.0 * u2[i] + rng.normal() * std::sqrt(0.5);
        } else {
          L(i, s) = rng.normal();
        }
      }

    Vector ps(n), treatment(n), ystar(n);
    for (int i = 0; i < n; ++i) {
      double eta = scenario.collider_mode ? scenario.nu * u1[i] : 0.0;
      double mu = scenario.beta0 + (scenario.collider_mode ? scenario.nu * u2[i] : 0.0);
      for (int s = 0; s < p; ++s) {
        if (in(scenario.s1, s)) eta += scenario.gamma_confounder * L(i, s);
        if (!scenario.collider_mode && in(scenario.s3, s)) eta += scenario.gamma_instrument * L(i, s);
        if (in(scenario.s1, s) || in(scenario.s2, s)) mu += scenario.beta_signal * L(i, s);
      }
      ps[i] = expit(eta);
      treatment[i] = rng.bernoulli(ps[i]) ? 1.0 : 0.0;
      ystar[i] = mu;
    }

    Vector y(n);
    if (scenario.outcome_kind == OutcomeKind::continuous) {
      for (int i = 0; i < n; ++i) y[i] = ystar[i] + scenario.outcome_sd * rng.normal();
    } else {
      for (int i = 0; i < n; ++i) y[i] = rng.bernoulli(expit(ystar[i])) ? 1.0 : 0.0;
    }

    const double tsum = treatment.sum();
    if (tsum == 0.0 || tsum == static_cast<double>(n)) {
      out.redraws = attempt + 1;
      continue;  // single treatment class; the null-effect mechanism allows a redraw
    }

    out.data.covariates = std::move(L);
    out.data.covariate_labels.clear();
    for (int s = 0; s < p; ++s) out.data.covariate_labels.push_back("L" + std::to_string(s + 1));
    out.data.treatment = std::move(treatment);
    out.data.outcome = std::move(y);
    out.data.outcome_kind = scenario.outcome_kind;
    out.true_ps = std::move(ps);
    return out;
  }
}

enum class StudyMethod { stability_pipeline, target_ps, empty_ps };

inline std::string method_name(StudyMethod m) {
  switch (m) {
    case StudyMethod::stability_pipeline: return "stability";
    case StudyMethod::target_ps: return "target_ps";
    case StudyMethod::empty_ps: return "empty_ps";
  }
  return "?";
}

struct ReplicateResult {
  std::vector<int> selected_subset;
  bool both_confounders = false;
  bool at_least_one = false;
  double p_value = 1.0;
  double effect_estimate = 0.0;
  double se_estimate = 0.0;
  bool failed = false;
  std::string error;
};

struct StudyOptions {
  long n_draws = 1000;
  double alpha = 0.05;
  int window_width = 5;
  int threads = 1;
  double max_failure_rate = 0.02;
};

struct StudyResult {
  Scenario scenario;
  StudyMethod method = StudyMethod::stability_pipeline;
  std::uint64_t master_seed = 0;
  double alpha = 0.05;
  std::vector<ReplicateResult> replicates;
  int n_failed = 0;
  long total_redraws = 0;

  // Aggregates over non-failed replicates.
  double prob_both = 0.0;
  double prob_at_least_one = 0.0;
  double mean_selected_size = 0.0;
  double type1_rate = 0.0;
  double mean_effect = 0.0;
  double ese_effect = 0.0;  // empirical SD of the effect estimates
  double mean_se = 0.0;
  double ase_se = 0.0;      // SD of the standard-error estimates
};

namespace detail {

inline ReplicateResult run_replicate(const Scenario& scenario, StudyMethod method,
                                     std::uint64_t replicate_seed, const StudyOptions& opts,
                                     long* redraws) {
  Rng rng(replicate_seed);
  const GeneratedData gen = generate(scenario, rng);
  if (redraws) *redraws = gen.redraws;
  const std::uint64_t test_seed = derive_seed(replicate_seed, 1);

  ReplicateResult r;
  try {
    if (method == StudyMethod::stability_pipeline) {
      PipelineConfig cfg;
      cfg.window_width = opts.window_width;
      cfg.n_draws = opts.n_draws;
      cfg.alpha = opts.alpha;
      cfg.seed = test_seed;
      cfg.threads = 1;
      const PipelineReport report = run_pipeline(gen.data, cfg);
      r.selected_subset = report.selected_subset;
      r.p_value = report.rand_test.p_value;
      r.effect_estimate = report.psi_hat;
      r.se_estimate = report.se_hat;
    } else {
      std::vector<int> subset;
      if (method == StudyMethod::target_ps) {
        subset = scenario.s1;
        subset.insert(subset.end(), scenario.s2.begin(), scenario.s2.end());
        std::sort(subset.begin(), subset.end());
      }
      r.selected_subset = subset;
      const EffectEstimate e = dr_effect(gen.data, subset);
      r.effect_estimate = e.psi_hat;
      r.se_estimate = influence_se(e);
      std::vector<std::vector<int>> strata;
      if (method == StudyMethod::target_ps) {
        const PsFit psfit = ps_for_subset(gen.data, subset);
        strata = full_match(psfit.ps, gen.data.treatment).strata;
      } else {
        // No covariates: every unit is exchangeable in one stratum.
        strata.emplace_back();
        for (Eigen::Index i = 0; i < gen.data.n_units(); ++i)
          strata[0].push_back(static_cast<int>(i));
      }
      r.p_value = randomization_pvalue(strata, gen.data.treatment, gen.data.outcome,
                                       opts.n_draws, test_seed)
                      .p_value;
    }
    for (int k : r.selected_subset) {
      if (std::find(scenario.s1.begin(), scenario.s1.end(), k) != scenario.s1.end())
        r.at_least_one = true;
    }
    r.both_confounders = true;
    for (int k : scenario.s1)
      if (std::find(r.selected_subset.begin(), r.selected_subset.end(), k) ==
          r.selected_subset.end())
        r.both_confounders = false;
  } catch (const std::exception& ex) {
    r.failed = true;
    r.error = ex.what();
  }
  return r;
}

}  // namespace detail

// Replicate study: per-replicate seeds are derived from the master seed by
// replicate index, so results are reproducible bit-for-bit under any thread
// count. Replicates that fail are excluded from the aggregates; more than
// max_failure_rate of them failing aborts the study.
inline StudyResult run_study(const Scenario& scenario, int n_replicates, StudyMethod method,
                             std::uint64_t master_seed, const StudyOptions& opts = {}) {
  if (n_replicates < 1) throw ContractError("run_study: need at least one replicate");
  StudyResult study;
  study.scenario = scenario;
  study.method = method;
  study.master_seed = master_seed;
  study.alpha = opts.alpha;
  study.replicates.resize(n_replicates);
  std::vector<long> redraws(n_replicates, 0);

  parallel_for_index(n_replicates, opts.threads, [&](Eigen::Index rep) {
    study.replicates[rep] = detail::run_replicate(scenario, method,
                                                  derive_seed(master_seed, rep), opts,
                                                  &redraws[rep]);
  });

  int ok = 0;
  double sum_eff = 0.0, sum_eff2 = 0.0, sum_se = 0.0, sum_se2 = 0.0;
  for (int rep = 0; rep < n_replicates; ++rep) {
    const ReplicateResult& r = study.replicates[rep];
    study.total_redraws += redraws[rep];
    if (r.failed) {
      ++study.n_failed;
      continue;
    }
    ++ok;
    study.prob_both += r.both_confounders ? 1.0 : 0.0;
    study.prob_at_least_one += r.at_least_one ? 1.0 : 0.0;
    study.mean_selected_size += static_cast<double>(r.selected_subset.size());
    study.type1_rate += r.p_value <= opts.alpha ? 1.0 : 0.0;
    sum_eff += r.effect_estimate;
    sum_eff2 += r.effect_estimate * r.effect_estimate;
    sum_se += r.se_estimate;
    sum_se2 += r.se_estimate * r.se_estimate;
  }
  if (study.n_failed > opts.max_failure_rate * n_replicates)
    throw Error("run_study: " + std::to_string(study.n_failed) + " of " +
                std::to_string(n_replicates) + " replicates failed (first error: " +
                [&] {
                  for (const auto& r : study.replicates)
                    if (r.failed) return r.error;
                  return std::string();
                }() +
                ")");
  if (ok == 0) throw Error("run_study: no successful replicates");

  const double m = static_cast<double>(ok);
  study.prob_both /= m;
  study.prob_at_least_one /= m;
  study.mean_selected_size /= m;
  study.type1_rate /= m;
  study.mean_effect = sum_eff / m;
  study.ese_effect = ok > 1 ? std::sqrt(std::max(0.0, (sum_eff2 - sum_eff * sum_eff / m) / (m - 1.0))) : 0.0;
  study.mean_se = sum_se / m;
  study.ase_se = ok > 1 ? std::sqrt(std::max(0.0, (sum_se2 - sum_se * sum_se / m) / (m - 1.0))) : 0.0;
  return study;
}

}  // namespace stabsel

#endif  // STABSEL_SIMULATE_HPP
