#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "geosurv/data_model.hpp"
#include "geosurv/estimators.hpp"
#include "geosurv/stats.hpp"

namespace geosurv {

struct DegenerateSubsetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ModelKind { cox, weibull };

struct ExperimentConfig {
  // matched against columns by exact name or "name=" prefix
  std::vector<std::string> geo_feature_names{"state_esr", "reporting_source"};
  // appended for the Overall run only
  std::vector<std::string> overall_extra_geo{"state"};
  double test_fraction = 0.2;
  std::uint64_t split_seed = 101;
  double penalizer = 1e-4;
  int n_subsets = 30;
  ModelKind model_kind = ModelKind::cox;
  std::uint64_t subset_seed = 404;
  TieRule ties = TieRule::efron;
  double ci_level = 0.95;
  int bootstrap_replicates = 2000;
  int min_dataset_rows = 0;  // 0 -> n_subsets * 30
  int jobs = 0;              // 0 -> hardware concurrency

  int effective_min_rows() const { return min_dataset_rows > 0 ? min_dataset_rows : n_subsets * 30; }
};

struct PairedRunResult {
  double c_with = 0.0;
  double c_without = 0.0;
  double diff = 0.0;  // c_with - c_without
  int subset_id = 0;
  int rows = 0;
};

struct ExperimentReport {
  std::string dataset_name;
  std::vector<PairedRunResult> per_subset;
  double t = 0.0;
  double p = 1.0;
  BootstrapInterval ci;
  double avg_improvement = 0.0;

  // most common subset size; the single rows-per-subset figure quoted per dataset
  int rows_per_subset_mode() const;
};

// Disjoint near-equal chunks (sizes floor/ceil of n/k) of one seeded shuffle.
std::vector<std::vector<int>> partition_rows(int n_rows, int n_subsets, std::uint64_t seed);

// One shared train/test split; arm A fits on all columns, arm B refits after
// dropping the geo columns from the same rows.
PairedRunResult run_paired_fit(const DesignMatrix& m, const ExperimentConfig& cfg,
                               int subset_id = 0,
                               const std::vector<std::string>* geo_override = nullptr);

ExperimentReport run_subset_ttest(const DesignMatrix& m, const ExperimentConfig& cfg,
                                  const std::string& dataset_name = "dataset",
                                  const std::vector<std::string>* geo_override = nullptr);

struct StatewiseResult {
  std::vector<ExperimentReport> reports;  // Overall first, then states sorted by name
  std::vector<std::pair<std::string, std::string>> skipped;  // (dataset, reason)
};

// Splits the cohort by state and runs the paired protocol per state plus an
// Overall run that keeps state indicators as geo features. Rows are ordered
// by subject id before partitioning so results do not depend on cohort
// ordering. States are processed concurrently; output is identical to
// sequential execution.
StatewiseResult run_statewise(const Cohort& c, const EncodingSpec& base_spec,
                              const ExperimentConfig& cfg);

void emit_report(const std::vector<ExperimentReport>& reports, const std::string& path);
void write_per_subset_csv(const std::vector<ExperimentReport>& reports, const std::string& path);

struct ReportRow {
  std::string dataset_name;
  int rows_per_subset = 0;
  double t_statistic = 0.0;
  double p_value = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double avg_c_index_improvement = 0.0;
};

std::vector<ReportRow> read_report(const std::string& path);

// Rebuilds per-dataset reports (t, p, ci, mean) from an audit per-subset CSV.
std::vector<ExperimentReport> reports_from_per_subset_csv(const std::string& path,
                                                          double ci_level, int replicates,
                                                          std::uint64_t seed);

}  // namespace geosurv
