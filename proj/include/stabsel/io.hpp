#ifndef STABSEL_IO_HPP
#define STABSEL_IO_HPP

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "stabsel/core.hpp"
#include "stabsel/glm.hpp"
#include "stabsel/pipeline.hpp"
#include "stabsel/simulate.hpp"

namespace stabsel {

// ---------------------------------------------------------------------------
// CSV primitives (RFC-4180 style: quoted fields, embedded commas/newlines)
// ---------------------------------------------------------------------------

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false, any_field = false, done_header = false;
  const auto flush_field = [&] {
    record.push_back(field);
    field.clear();
    any_field = true;
  };
  const auto flush_record = [&] {
    if (!any_field && record.empty()) return;  // skip blank lines
    flush_field();
    if (!done_header) {
      table.header = record;
      done_header = true;
    } else {
      table.rows.push_back(record);
    }
    record.clear();
    any_field = false;
    field.clear();
  };

  char c;
  while (in.get(c)) {
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      flush_field();
    } else if (c == '\n') {
      if (!field.empty() && field.back() == '\r') field.pop_back();
      flush_record();
    } else {
      field.push_back(c);
    }
  }
  if (!field.empty() || any_field) flush_record();
  if (table.header.empty()) throw Error("csv: missing header row");
  for (const auto& row : table.rows)
    if (row.size() != table.header.size())
      throw Error("csv: row with " + std::to_string(row.size()) + " fields, expected " +
                  std::to_string(table.header.size()));
  return table;
}

inline CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  return read_csv(in);
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

// ---------------------------------------------------------------------------
// Dataset ingestion
// ---------------------------------------------------------------------------

struct IngestResult {
  Dataset data;
  int dropped_rows = 0;
  std::vector<std::string> dropped_columns;  // constant or singular
  std::vector<std::string> log;
};

namespace detail {

inline bool is_missing_cell(const std::string& s) {
  if (s.empty()) return true;
  std::string t;
  for (char c : s)
    if (!std::isspace(static_cast<unsigned char>(c))) t.push_back(std::tolower(static_cast<unsigned char>(c)));
  return t.empty() || t == "na" || t == "nan" || t == "null";
}

inline std::optional<double> parse_number(const std::string& s) {
  const char* begin = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin) return std::nullopt;
  while (*end != '\0') {
    if (!std::isspace(static_cast<unsigned char>(*end))) return std::nullopt;
    ++end;
  }
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace detail

// Builds a complete-case Dataset from a CSV file: rows with any missing cell
// are dropped, non-numeric covariates are expanded to 0/1 indicators with the
// first (sorted) level as reference, and constant or singular covariate
// columns are dropped by name.
inline IngestResult ingest_csv(const std::string& path, const std::string& treatment_column,
                               const std::string& outcome_column, OutcomeKind outcome_kind) {
  const CsvTable table = read_csv_file(path);
  const auto col_index = [&](const std::string& name) -> int {
    for (size_t j = 0; j < table.header.size(); ++j)
      if (table.header[j] == name) return static_cast<int>(j);
    throw Error("ingest: column '" + name + "' not found in '" + path + "'");
  };
  const int a_col = col_index(treatment_column);
  const int y_col = col_index(outcome_column);
  if (a_col == y_col) throw Error("ingest: treatment and outcome must be distinct columns");

  IngestResult result;

  // Complete cases only.
  std::vector<const std::vector<std::string>*> rows;
  for (const auto& row : table.rows) {
    bool missing = false;
    for (const auto& cell : row)
      if (detail::is_missing_cell(cell)) {
        missing = true;
        break;
      }
    if (missing) ++result.dropped_rows;
    else rows.push_back(&row);
  }
  if (result.dropped_rows > 0)
    result.log.push_back("dropped " + std::to_string(result.dropped_rows) + " incomplete row(s)");
  const int n = static_cast<int>(rows.size());
  if (n == 0) throw Error("ingest: no complete rows in '" + path + "'");

  // Treatment and outcome.
  Vector treatment(n), outcome(n);
  for (int i = 0; i < n; ++i) {
    const auto a = detail::parse_number((*rows[i])[a_col]);
    if (!a || (*a != 0.0 && *a != 1.0))
      throw Error("ingest: treatment column '" + treatment_column +
                  "' is not binary 0/1 at data row " + std::to_string(i + 1));
    treatment[i] = *a;
    const auto y = detail::parse_number((*rows[i])[y_col]);
    if (!y)
      throw Error("ingest: outcome column '" + outcome_column + "' is not numeric at data row " +
                  std::to_string(i + 1));
    if (outcome_kind == OutcomeKind::binary && *y != 0.0 && *y != 1.0)
      throw Error("ingest: binary outcome column '" + outcome_column +
                  "' has a value outside {0,1} at data row " + std::to_string(i + 1));
    outcome[i] = *y;
  }

  // Covariates: numeric columns pass through, categorical columns expand to
  // indicators with the reference level dropped.
  std::vector<std::pair<std::string, Vector>> columns;
  for (size_t j = 0; j < table.header.size(); ++j) {
    if (static_cast<int>(j) == a_col || static_cast<int>(j) == y_col) continue;
    bool numeric = true;
    for (int i = 0; i < n && numeric; ++i)
      if (!detail::parse_number((*rows[i])[j])) numeric = false;
    if (numeric) {
      Vector v(n);
      for (int i = 0; i < n; ++i) v[i] = *detail::parse_number((*rows[i])[j]);
      columns.emplace_back(table.header[j], std::move(v));
    } else {
      std::set<std::string> levels;
      for (int i = 0; i < n; ++i) levels.insert((*rows[i])[j]);
      auto it = levels.begin();
      const std::string reference = *it;
      ++it;
      for (; it != levels.end(); ++it) {
        Vector v(n);
        for (int i = 0; i < n; ++i) v[i] = (*rows[i])[j] == *it ? 1.0 : 0.0;
        columns.emplace_back(table.header[j] + "_" + *it, std::move(v));
      }
      result.log.push_back("expanded '" + table.header[j] + "' to " +
                           std::to_string(levels.size() - 1) + " indicator(s), reference '" +
                           reference + "'");
    }
  }

  // Drop constant columns.
  {
    std::vector<std::pair<std::string, Vector>> kept;
    for (auto& [label, v] : columns) {
      if ((v.array() == v[0]).all()) {
        result.dropped_columns.push_back(label);
        result.log.push_back("dropped constant column '" + label + "'");
      } else {
        kept.emplace_back(label, std::move(v));
      }
    }
    columns.swap(kept);
  }

  // Drop columns a pivoted QR of [1, columns] flags as singular.
  while (!columns.empty()) {
    Matrix X(n, columns.size() + 1);
    X.col(0).setOnes();
    for (size_t j = 0; j < columns.size(); ++j) X.col(j + 1) = columns[j].second;
    Eigen::ColPivHouseholderQR<Matrix> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() == X.cols()) break;
    // Drop the last pivoted column (most redundant) and re-check.
    const auto& perm = qr.colsPermutation().indices();
    int victim = -1;
    for (Eigen::Index j = X.cols() - 1; j >= 0; --j)
      if (perm[j] != 0) {  // never drop the intercept
        victim = perm[j] - 1;
        break;
      }
    if (victim < 0) throw Error("ingest: design has no usable covariates");
    result.dropped_columns.push_back(columns[victim].first);
    result.log.push_back("dropped singular column '" + columns[victim].first + "'");
    columns.erase(columns.begin() + victim);
  }

  result.data.covariates.resize(n, columns.size());
  result.data.covariate_labels.clear();
  for (size_t j = 0; j < columns.size(); ++j) {
    result.data.covariates.col(j) = columns[j].second;
    result.data.covariate_labels.push_back(columns[j].first);
  }
  result.data.treatment = std::move(treatment);
  result.data.outcome = std::move(outcome);
  result.data.outcome_kind = outcome_kind;
  result.data.validate();
  return result;
}

// ---------------------------------------------------------------------------
// Result tables
// ---------------------------------------------------------------------------

// Trajectory rows: orbit, covariate added at that orbit, marginal estimate,
// standardized difference vs the benchmark, and windowed Q where defined.
inline void write_trajectory_csv(std::ostream& out, const PipelineReport& report,
                                 const Dataset& data) {
  out << "orbit,covariate_added,psi_hat,std_diff,q\n";
  const int J = static_cast<int>(report.orbit_estimates.size());
  for (int j = 1; j <= J; ++j) {
    out << j << ',' << csv_escape(data.covariate_labels[report.ordering.order[j - 1]]) << ','
        << fmt_g17(report.orbit_estimates[j - 1].psi_hat) << ',';
    const auto& sd = report.stability.std_diffs[j - 1];
    if (sd) out << fmt_g17(*sd);
    out << ',';
    const auto q = report.stability.q_values.find(j);
    if (q != report.stability.q_values.end()) out << fmt_g17(q->second);
    out << '\n';
  }
}

struct TrajectoryRow {
  int orbit;
  std::string covariate_added;
  double psi_hat;
  std::optional<double> std_diff;
  std::optional<double> q;
};

inline std::vector<TrajectoryRow> read_trajectory_csv(std::istream& in) {
  const CsvTable table = read_csv(in);
  const std::vector<std::string> expect = {"orbit", "covariate_added", "psi_hat", "std_diff", "q"};
  if (table.header != expect) throw Error("trajectory csv: unexpected header");
  std::vector<TrajectoryRow> rows;
  for (const auto& r : table.rows) {
    TrajectoryRow row;
    row.orbit = static_cast<int>(*detail::parse_number(r[0]));
    row.covariate_added = r[1];
    row.psi_hat = *detail::parse_number(r[2]);
    if (!r[3].empty()) row.std_diff = *detail::parse_number(r[3]);
    if (!r[4].empty()) row.q = *detail::parse_number(r[4]);
    rows.push_back(row);
  }
  return rows;
}

inline void write_strata_csv(std::ostream& out, const FullMatch& match) {
  out << "unit_id,stratum_id\n";
  for (size_t i = 0; i < match.stratum_of.size(); ++i)
    out << i << ',' << match.stratum_of[i] << '\n';
}

inline std::vector<int> read_strata_csv(std::istream& in) {
  const CsvTable table = read_csv(in);
  if (table.header != std::vector<std::string>{"unit_id", "stratum_id"})
    throw Error("strata csv: unexpected header");
  std::vector<int> stratum_of(table.rows.size(), -1);
  for (const auto& r : table.rows) {
    const int unit = static_cast<int>(*detail::parse_number(r[0]));
    if (unit < 0 || unit >= static_cast<int>(stratum_of.size()))
      throw Error("strata csv: unit id out of range");
    stratum_of[unit] = static_cast<int>(*detail::parse_number(r[1]));
  }
  return stratum_of;
}

inline nlohmann::json report_to_json(const PipelineReport& report, const Dataset& data) {
  nlohmann::json j;
  j["n_units"] = data.n_units();
  j["n_covariates"] = data.n_covariates();
  j["outcome_kind"] = data.outcome_kind == OutcomeKind::binary ? "binary" : "continuous";

  nlohmann::json ord = nlohmann::json::array();
  for (const auto& sel : report.ordering.per_orbit) {
    ord.push_back({{"orbit", sel.orbit},
                   {"covariate", sel.covariate},
                   {"label", data.covariate_labels[sel.covariate]},
                   {"pv_treatment", sel.pv_treatment},
                   {"pv_outcome", sel.pv_outcome},
                   {"conditional_effect", sel.conditional_effect},
                   {"fit_failed", sel.fit_failed}});
  }
  j["ordering"] = ord;

  nlohmann::json orbits = nlohmann::json::array();
  for (size_t k = 0; k < report.orbit_estimates.size(); ++k) {
    const auto& e = report.orbit_estimates[k];
    nlohmann::json row = {{"orbit", e.orbit_index},
                          {"psi_hat", e.psi_hat},
                          {"max_weight", e.max_weight}};
    if (report.stability.std_diffs[k]) row["std_diff"] = *report.stability.std_diffs[k];
    const auto q = report.stability.q_values.find(static_cast<int>(k) + 1);
    if (q != report.stability.q_values.end()) row["q"] = q->second;
    orbits.push_back(row);
  }
  j["orbits"] = orbits;

  j["stability"] = {{"window_width", report.stability.window_width},
                    {"benchmark_orbit", report.stability.benchmark},
                    {"selected_orbit", report.stability.selected_orbit}};
  j["selected_subset"] = report.selected_subset;
  j["selected_labels"] = report.selected_labels;
  j["effect"] = {{"psi_hat", report.psi_hat}, {"se", report.se_hat}};
  j["randomization_test"] = {{"p_value", report.rand_test.p_value},
                             {"observed_stat", report.rand_test.observed_stat},
                             {"draws", report.rand_test.draws},
                             {"seed", report.rand_test.seed},
                             {"n_strata", report.match.strata.size()}};
  j["notes"] = report.notes;
  return j;
}

// Study table in the operating-characteristics layout: selection
// probabilities, selected-subset size, type I error, and effect summaries.
inline void write_study_csv(std::ostream& out, const StudyResult& study) {
  out << "scenario,method,replicates,failed,prob_both_confounders,prob_at_least_one,"
         "mean_selected_size,type1_rate,alpha,mean_effect,ese_effect,mean_se,ase_se\n";
  const int ok = static_cast<int>(study.replicates.size()) - study.n_failed;
  out << csv_escape(study.scenario.name) << ',' << method_name(study.method) << ','
      << ok << ',' << study.n_failed << ',' << fmt_g17(study.prob_both) << ','
      << fmt_g17(study.prob_at_least_one) << ',' << fmt_g17(study.mean_selected_size) << ','
      << fmt_g17(study.type1_rate) << ',' << fmt_g17(study.alpha) << ','
      << fmt_g17(study.mean_effect) << ',' << fmt_g17(study.ese_effect) << ','
      << fmt_g17(study.mean_se) << ',' << fmt_g17(study.ase_se) << '\n';
}

inline void write_replicates_csv(std::ostream& out, const StudyResult& study) {
  out << "replicate,failed,selected_size,both_confounders,at_least_one,p_value,"
         "effect_estimate,se_estimate,selected_subset\n";
  for (size_t rep = 0; rep < study.replicates.size(); ++rep) {
    const auto& r = study.replicates[rep];
    out << rep << ',' << (r.failed ? 1 : 0) << ',' << r.selected_subset.size() << ','
        << (r.both_confounders ? 1 : 0) << ',' << (r.at_least_one ? 1 : 0) << ','
        << fmt_g17(r.p_value) << ',' << fmt_g17(r.effect_estimate) << ','
        << fmt_g17(r.se_estimate) << ',';
    std::string subset;
    for (size_t i = 0; i < r.selected_subset.size(); ++i) {
      if (i) subset += ';';
      subset += std::to_string(r.selected_subset[i]);
    }
    out << csv_escape(subset) << '\n';
  }
}

inline nlohmann::json study_manifest(const StudyResult& study, long n_draws, int window_width) {
  const Scenario& sc = study.scenario;
  return nlohmann::json{
      {"scenario",
       {{"name", sc.name},
        {"n", sc.n},
        {"p", sc.p},
        {"s1", sc.s1},
        {"s2", sc.s2},
        {"s3", sc.s3},
        {"gamma_confounder", sc.gamma_confounder},
        {"gamma_instrument", sc.gamma_instrument},
        {"beta_signal", sc.beta_signal},
        {"outcome_kind", sc.outcome_kind == OutcomeKind::binary ? "binary" : "continuous"},
        {"outcome_sd", sc.outcome_sd},
        {"collider_mode", sc.collider_mode},
        {"nu", sc.nu},
        {"beta0", sc.beta0}}},
      {"method", method_name(study.method)},
      {"master_seed", study.master_seed},
      {"replicates", study.replicates.size()},
      {"failed", study.n_failed},
      {"total_redraws", study.total_redraws},
      {"randomization_draws", n_draws},
      {"window_width", window_width},
      {"alpha", study.alpha},
      {"software", "stabsel"},
      {"version", "0.1.0"}};
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << content;
}

}  // namespace stabsel

#endif  // STABSEL_IO_HPP
