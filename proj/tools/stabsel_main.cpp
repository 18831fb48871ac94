// Command-line front end: covariate ordering, effect trajectories, stability
// selection, full matching, randomization tests, the end-to-end pipeline, and
// the simulation-study harness.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "stabsel/stabsel.hpp"

namespace {

using namespace stabsel;

struct DataArgs {
  std::string path;
  std::string treatment_column;
  std::string outcome_column;
  std::string outcome_kind = "continuous";
};

struct CommonArgs {
  DataArgs data;
  std::string config_path;
  int window_width = 5;
  long n_draws = 1000;
  double alpha = 0.05;
  std::optional<int> benchmark_orbit;
  std::vector<std::string> pinned_high;
  std::vector<std::string> pinned_low;
  std::uint64_t seed = 0;
  bool seed_given = false;
  double weight_warn = 50.0;
  std::string distance = "abs_logit_ps";
};

void add_data_options(CLI::App* cmd, DataArgs& args) {
  cmd->add_option("--data", args.path, "input CSV file (header row required)")->required();
  cmd->add_option("--treatment", args.treatment_column, "treatment column name (0/1)")->required();
  cmd->add_option("--outcome", args.outcome_column, "outcome column name")->required();
  cmd->add_option("--outcome-kind", args.outcome_kind, "continuous or binary")
      ->check(CLI::IsMember({"continuous", "binary"}));
}

void add_pipeline_options(CLI::App* cmd, CommonArgs& args, bool need_seed) {
  cmd->add_option("--config", args.config_path, "JSON config file; flags override its values");
  cmd->add_option("--window", args.window_width, "stability window width (odd, >= 3)");
  cmd->add_option("--draws", args.n_draws, "randomization draws C");
  cmd->add_option("--alpha", args.alpha, "significance level");
  cmd->add_option("--benchmark", args.benchmark_orbit, "benchmark orbit (default: largest)");
  cmd->add_option("--pin-high", args.pinned_high, "covariate labels forced to the front");
  cmd->add_option("--pin-low", args.pinned_low, "covariate labels forced to the back");
  cmd->add_option("--weight-warn", args.weight_warn, "warn when a weight exceeds this");
  cmd->add_option("--distance", args.distance, "matching distance")
      ->check(CLI::IsMember({"abs_logit_ps", "abs_ps"}));
  auto* seed_opt = cmd->add_option("--seed", args.seed, "randomization-test seed");
  if (need_seed) seed_opt->required();
  cmd->callback([&args, cmd] { args.seed_given = cmd->count("--seed") > 0; });
}

// Config-file values fill in anything the command line left at its default.
void apply_config_file(const CLI::App* cmd, CommonArgs& args) {
  if (args.config_path.empty()) return;
  std::ifstream in(args.config_path);
  if (!in) throw Error("cannot open config '" + args.config_path + "'");
  nlohmann::json cfg = nlohmann::json::parse(in);
  const auto flag_given = [&](const std::string& name) { return cmd->count(name) > 0; };
  if (cfg.contains("window_width") && !flag_given("--window"))
    args.window_width = cfg["window_width"].get<int>();
  if (cfg.contains("draws") && !flag_given("--draws")) args.n_draws = cfg["draws"].get<long>();
  if (cfg.contains("alpha") && !flag_given("--alpha")) args.alpha = cfg["alpha"].get<double>();
  if (cfg.contains("benchmark_orbit") && !flag_given("--benchmark"))
    args.benchmark_orbit = cfg["benchmark_orbit"].get<int>();
  if (cfg.contains("pinned_high") && !flag_given("--pin-high"))
    args.pinned_high = cfg["pinned_high"].get<std::vector<std::string>>();
  if (cfg.contains("pinned_low") && !flag_given("--pin-low"))
    args.pinned_low = cfg["pinned_low"].get<std::vector<std::string>>();
  if (cfg.contains("seed") && !flag_given("--seed")) {
    args.seed = cfg["seed"].get<std::uint64_t>();
    args.seed_given = true;
  }
  if (cfg.contains("weight_warn_threshold") && !flag_given("--weight-warn"))
    args.weight_warn = cfg["weight_warn_threshold"].get<double>();
  if (cfg.contains("distance") && !flag_given("--distance"))
    args.distance = cfg["distance"].get<std::string>();
}

Dataset load_dataset(const DataArgs& args, std::vector<std::string>* log = nullptr) {
  const OutcomeKind kind =
      args.outcome_kind == "binary" ? OutcomeKind::binary : OutcomeKind::continuous;
  IngestResult ingest = ingest_csv(args.path, args.treatment_column, args.outcome_column, kind);
  for (const auto& line : ingest.log) {
    if (log) log->push_back(line);
    std::cerr << "ingest: " << line << "\n";
  }
  return std::move(ingest.data);
}

std::vector<int> labels_to_indices(const Dataset& data, const std::vector<std::string>& labels) {
  std::vector<int> idx;
  for (const auto& label : labels) {
    bool found = false;
    for (Eigen::Index k = 0; k < data.n_covariates(); ++k)
      if (data.covariate_labels[k] == label) {
        idx.push_back(static_cast<int>(k));
        found = true;
        break;
      }
    if (!found) throw Error("unknown covariate label '" + label + "'");
  }
  return idx;
}

std::vector<int> parse_subset(const Dataset& data, const std::string& spec) {
  std::vector<int> subset;
  std::stringstream ss(spec);
  std::string token;
  while (std::getline(ss, token, ',')) {
    if (token.empty()) continue;
    try {
      const int k = std::stoi(token);
      if (k < 0 || k >= data.n_covariates()) throw Error("covariate index out of range: " + token);
      subset.push_back(k);
    } catch (const std::invalid_argument&) {
      subset.push_back(labels_to_indices(data, {token})[0]);
    }
  }
  return subset;
}

PipelineConfig make_config(const Dataset& data, const CommonArgs& args) {
  PipelineConfig cfg;
  cfg.window_width = args.window_width;
  cfg.n_draws = args.n_draws;
  cfg.alpha = args.alpha;
  cfg.benchmark_orbit = args.benchmark_orbit;
  cfg.pinned_high = labels_to_indices(data, args.pinned_high);
  cfg.pinned_low = labels_to_indices(data, args.pinned_low);
  cfg.seed = args.seed;
  cfg.weight_warn_threshold = args.weight_warn;
  cfg.distance = args.distance == "abs_ps" ? DistanceKind::abs_ps : DistanceKind::abs_logit_ps;
  cfg.threads = env_thread_count();
  return cfg;
}

void write_or_print(const std::string& out_path, const std::string& content) {
  if (out_path.empty()) {
    std::cout << content;
  } else {
    write_text_file(out_path, content);
    std::cerr << "wrote " << out_path << "\n";
  }
}

int run_order(const CommonArgs& args, const std::string& out_path) {
  const Dataset data = load_dataset(args.data);
  OrderingConfig ocfg;
  ocfg.pinned_high = labels_to_indices(data, args.pinned_high);
  ocfg.pinned_low = labels_to_indices(data, args.pinned_low);
  ocfg.threads = env_thread_count();
  const CovariateOrdering ordering = order_covariates(data, ocfg);
  std::ostringstream out;
  out << "orbit,covariate,label,pv_treatment,pv_outcome,conditional_effect\n";
  for (const auto& sel : ordering.per_orbit)
    out << sel.orbit << ',' << sel.covariate << ','
        << csv_escape(data.covariate_labels[sel.covariate]) << ',' << fmt_g17(sel.pv_treatment)
        << ',' << fmt_g17(sel.pv_outcome) << ',' << fmt_g17(sel.conditional_effect) << '\n';
  write_or_print(out_path, out.str());
  return 0;
}

PipelineReport run_trace_internal(const Dataset& data, const CommonArgs& args) {
  PipelineConfig cfg = make_config(data, args);
  // Ordering, per-orbit estimates, and stability only; reuse the pipeline up
  // to selection by running it with a single draw when no test is wanted.
  return run_pipeline(data, cfg);
}

int run_trace(const CommonArgs& args, const std::string& out_path) {
  const Dataset data = load_dataset(args.data);
  const PipelineReport report = run_trace_internal(data, args);
  std::ostringstream out;
  write_trajectory_csv(out, report, data);
  write_or_print(out_path, out.str());
  return 0;
}

int run_select(const CommonArgs& args, const std::string& out_path) {
  const Dataset data = load_dataset(args.data);
  const PipelineReport report = run_trace_internal(data, args);
  nlohmann::json j = {{"selected_orbit", report.stability.selected_orbit},
                      {"window_width", report.stability.window_width},
                      {"benchmark_orbit", report.stability.benchmark},
                      {"selected_subset", report.selected_subset},
                      {"selected_labels", report.selected_labels}};
  write_or_print(out_path, j.dump(2) + "\n");
  return 0;
}

int run_match(const CommonArgs& args, const std::string& subset_spec,
              const std::string& out_path) {
  const Dataset data = load_dataset(args.data);
  const std::vector<int> subset = parse_subset(data, subset_spec);
  const PsFit psfit = ps_for_subset(data, subset);
  if (psfit.fit.separation_warning)
    std::cerr << "warning: propensity model shows separation; scores clipped for distances\n";
  MatchOptions mopts;
  mopts.distance = args.distance == "abs_ps" ? DistanceKind::abs_ps : DistanceKind::abs_logit_ps;
  const FullMatch match = full_match(psfit.ps, data.treatment, mopts);
  std::ostringstream out;
  write_strata_csv(out, match);
  write_or_print(out_path, out.str());
  std::cerr << match.strata.size() << " strata, total distance " << match.total_distance << "\n";
  return 0;
}

int run_test(const CommonArgs& args, const std::string& subset_spec, const std::string& out_path) {
  const Dataset data = load_dataset(args.data);
  const std::vector<int> subset = parse_subset(data, subset_spec);
  const PsFit psfit = ps_for_subset(data, subset);
  MatchOptions mopts;
  mopts.distance = args.distance == "abs_ps" ? DistanceKind::abs_ps : DistanceKind::abs_logit_ps;
  const FullMatch match = full_match(psfit.ps, data.treatment, mopts);
  const RandTestResult result =
      randomization_pvalue(match.strata, data.treatment, data.outcome, args.n_draws, args.seed);
  nlohmann::json j = {{"p_value", result.p_value},
                      {"observed_stat", result.observed_stat},
                      {"draws", result.draws},
                      {"seed", result.seed},
                      {"n_strata", match.strata.size()}};
  write_or_print(out_path, j.dump(2) + "\n");
  return 0;
}

int run_full_pipeline(const CommonArgs& args, const std::string& out_dir) {
  std::vector<std::string> ingest_log;
  const Dataset data = load_dataset(args.data, &ingest_log);
  PipelineConfig cfg = make_config(data, args);
  const PipelineReport report = run_pipeline(data, cfg);

  nlohmann::json j = report_to_json(report, data);
  j["ingest_log"] = ingest_log;
  if (out_dir.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::filesystem::create_directories(out_dir);
    write_text_file(out_dir + "/report.json", j.dump(2) + "\n");
    std::ostringstream traj;
    write_trajectory_csv(traj, report, data);
    write_text_file(out_dir + "/trajectory.csv", traj.str());
    std::ostringstream strata;
    write_strata_csv(strata, report.match);
    write_text_file(out_dir + "/strata.csv", strata.str());
    std::cerr << "wrote " << out_dir << "/report.json, trajectory.csv, strata.csv\n";
  }
  return 0;
}

int run_simulate(const std::string& scenario_name, int n_replicates, std::uint64_t seed,
                 const std::string& out_dir, const std::string& method_spec, long n_draws,
                 int window_width, double alpha) {
  const Scenario scenario = find_scenario(scenario_name);
  StudyOptions opts;
  opts.n_draws = n_draws;
  opts.alpha = alpha;
  opts.window_width = window_width;
  opts.threads = env_thread_count();

  std::vector<StudyMethod> methods;
  if (method_spec == "all") {
    methods = {StudyMethod::stability_pipeline, StudyMethod::target_ps, StudyMethod::empty_ps};
  } else if (method_spec == "stability") {
    methods = {StudyMethod::stability_pipeline};
  } else if (method_spec == "target") {
    methods = {StudyMethod::target_ps};
  } else if (method_spec == "empty") {
    methods = {StudyMethod::empty_ps};
  } else {
    throw Error("unknown method '" + method_spec + "' (stability, target, empty, all)");
  }

  std::filesystem::create_directories(out_dir);
  for (const StudyMethod method : methods) {
    const StudyResult study = run_study(scenario, n_replicates, method, seed, opts);
    const std::string stem = out_dir + "/" + scenario.name + "_" + method_name(method);
    std::ostringstream agg;
    write_study_csv(agg, study);
    write_text_file(stem + "_study.csv", agg.str());
    std::ostringstream reps;
    write_replicates_csv(reps, study);
    write_text_file(stem + "_replicates.csv", reps.str());
    write_text_file(stem + "_manifest.json",
                    study_manifest(study, opts.n_draws, opts.window_width).dump(2) + "\n");
    std::cout << scenario.name << " " << method_name(method) << ": P(both)=" << study.prob_both
              << " mean_size=" << study.mean_selected_size << " type1=" << study.type1_rate
              << " mean_effect=" << study.mean_effect << " ese=" << study.ese_effect
              << (study.n_failed ? " failed=" + std::to_string(study.n_failed) : "") << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stabsel: confounder selection targeting stable treatment-effect estimators"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string out_path, out_dir, subset_spec;

  auto* order_cmd = app.add_subcommand("order", "double-selection covariate ordering");
  add_data_options(order_cmd, args.data);
  add_pipeline_options(order_cmd, args, false);
  order_cmd->add_option("--out", out_path, "output CSV (default: stdout)");

  auto* trace_cmd = app.add_subcommand("trace", "per-orbit estimates, std. differences, and Q");
  add_data_options(trace_cmd, args.data);
  add_pipeline_options(trace_cmd, args, false);
  trace_cmd->add_option("--out", out_path, "output CSV (default: stdout)");

  auto* select_cmd = app.add_subcommand("select", "stability-selected orbit and subset");
  add_data_options(select_cmd, args.data);
  add_pipeline_options(select_cmd, args, false);
  select_cmd->add_option("--out", out_path, "output JSON (default: stdout)");

  auto* match_cmd = app.add_subcommand("match", "optimal full matching on a propensity score");
  add_data_options(match_cmd, args.data);
  match_cmd->add_option("--subset", subset_spec, "covariate indices or labels, comma separated")
      ->required();
  match_cmd->add_option("--distance", args.distance, "abs_logit_ps or abs_ps")
      ->check(CLI::IsMember({"abs_logit_ps", "abs_ps"}));
  match_cmd->add_option("--out", out_path, "output strata CSV (default: stdout)");

  auto* test_cmd = app.add_subcommand("test", "randomization test of the sharp null");
  add_data_options(test_cmd, args.data);
  test_cmd->add_option("--subset", subset_spec, "covariate indices or labels, comma separated")
      ->required();
  test_cmd->add_option("--draws", args.n_draws, "randomization draws C");
  test_cmd->add_option("--distance", args.distance, "abs_logit_ps or abs_ps")
      ->check(CLI::IsMember({"abs_logit_ps", "abs_ps"}));
  test_cmd->add_option("--seed", args.seed, "randomization seed")->required();
  test_cmd->add_option("--out", out_path, "output JSON (default: stdout)");

  auto* pipeline_cmd = app.add_subcommand("pipeline", "end-to-end analysis");
  add_data_options(pipeline_cmd, args.data);
  add_pipeline_options(pipeline_cmd, args, false);
  pipeline_cmd->add_option("--out-dir", out_dir, "directory for report.json + CSVs");

  std::string scenario_name, method_spec = "stability";
  int n_replicates = 1000;
  auto* sim_cmd = app.add_subcommand("simulate", "replicate study on a generated scenario");
  sim_cmd->add_option("--scenario", scenario_name, "scenario name (see --list)")->required();
  sim_cmd->add_option("--replicates", n_replicates, "number of replicates");
  sim_cmd->add_option("--seed", args.seed, "master seed")->required();
  sim_cmd->add_option("--out-dir", out_dir, "output directory")->required();
  sim_cmd->add_option("--method", method_spec, "stability, target, empty, or all");
  sim_cmd->add_option("--draws", args.n_draws, "randomization draws C");
  sim_cmd->add_option("--window", args.window_width, "stability window width");
  sim_cmd->add_option("--alpha", args.alpha, "significance level");

  auto* list_cmd = app.add_subcommand("scenarios", "list the simulation scenario registry");

  CLI11_PARSE(app, argc, argv);

  try {
    if (list_cmd->parsed()) {
      for (const auto& sc : scenario_registry()) std::cout << sc.name << "\n";
      return 0;
    }
    for (CLI::App* cmd : {order_cmd, trace_cmd, select_cmd, pipeline_cmd})
      if (cmd->parsed()) apply_config_file(cmd, args);
    if (order_cmd->parsed()) return run_order(args, out_path);
    if (trace_cmd->parsed()) return run_trace(args, out_path);
    if (select_cmd->parsed()) return run_select(args, out_path);
    if (match_cmd->parsed()) return run_match(args, subset_spec, out_path);
    if (test_cmd->parsed()) return run_test(args, subset_spec, out_path);
    if (pipeline_cmd->parsed()) return run_full_pipeline(args, out_dir);
    if (sim_cmd->parsed())
      return run_simulate(scenario_name, n_replicates, args.seed, out_dir, method_spec,
                          args.n_draws, args.window_width, args.alpha);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 0;
}
