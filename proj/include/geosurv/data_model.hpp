#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace geosurv {

struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EncodingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NonRightCensoredError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class CensoringKind { right, left, interval };

const char* to_string(CensoringKind k);

struct Subject {
  std::string id;
  int age = 0;
  // true when the raw age field was a top-coded band like "85+"; such rows
  // are removed by clean_cohort before any estimator sees them
  bool age_top_coded = false;
  std::string sex;
  std::string race;
  int diagnosis_year = 0;
  std::string state;
  std::optional<std::string> county;
  std::map<std::string, std::string> categorical_covariates;
  std::map<std::string, double> numeric_covariates;
  double time = 0.0;         // survival months
  bool event = false;        // true = death observed
  CensoringKind censoring_kind = CensoringKind::right;
  std::optional<std::pair<double, double>> interval_bounds;

  // Resolves a feature name against core fields or the covariate maps;
  // returns nullptr / nullopt when the subject lacks the feature.
  const std::string* categorical_value(const std::string& name) const;
  std::optional<double> numeric_value(const std::string& name) const;
};

struct Cohort {
  std::vector<Subject> subjects;
  std::string provenance;

  std::size_t size() const { return subjects.size(); }
};

void validate_unique_ids(const Cohort& c);

// ---------------------------------------------------------------------------
// Loading

struct ColumnSchema {
  // role -> CSV column name. Required roles: age, sex, time, event, state.
  // Optional: id, race, year, county, censoring, interval_lo, interval_hi.
  std::map<std::string, std::string> roles;
  std::vector<std::string> categorical;  // extra categorical covariate columns
  std::vector<std::string> numeric;      // extra numeric covariate columns
};

ColumnSchema load_schema(const std::string& path);

struct RowError {
  int row = 0;  // 1-based data row number
  std::string message;
};

struct LoadResult {
  Cohort cohort;
  std::vector<RowError> errors;
};

LoadResult load_cohort(const std::string& path, const ColumnSchema& schema);

// ---------------------------------------------------------------------------
// Cleaning

struct CleaningRules {
  std::vector<std::string> required_covariates;
  bool drop_top_coded_ages = true;
  bool drop_era_sparse_features = true;
};

struct CleaningReport {
  std::vector<std::pair<std::string, std::string>> dropped_rows;      // (id, reason)
  std::vector<std::pair<std::string, std::string>> dropped_features;  // (name, reason)

  bool empty() const { return dropped_rows.empty() && dropped_features.empty(); }
};

std::pair<Cohort, CleaningReport> clean_cohort(const Cohort& c, const CleaningRules& rules);

void write_cleaning_report(const std::string& path, const CleaningReport& report);

// ---------------------------------------------------------------------------
// Encoding

struct CodingEntry {
  int code = 0;
  std::string column;  // empty for the dropped base level
};

struct CodingDictionary {
  // feature -> level -> entry; codes are dense per feature, ordered by level
  std::map<std::string, std::map<std::string, CodingEntry>> features;

  // Recovers the original level of `feature` from one encoded row.
  std::string decode(const std::string& feature, const std::vector<std::string>& column_names,
                     const Eigen::RowVectorXd& row) const;
};

void write_coding_dictionary(const std::string& path, const CodingDictionary& dict);

struct EncodingSpec {
  std::vector<std::string> categorical;
  std::vector<std::string> numeric;
  // When set for a feature, the level set is frozen: encoding a level outside
  // it is an error.
  std::map<std::string, std::vector<std::string>> frozen_levels;
};

struct DesignMatrix {
  std::vector<std::string> column_names;
  Eigen::MatrixXd values;  // n x p
  Eigen::VectorXd time;
  std::vector<char> event;
  std::vector<CensoringKind> censoring;
  CodingDictionary coding_dictionary;

  int rows() const { return static_cast<int>(values.rows()); }
  int cols() const { return static_cast<int>(values.cols()); }
  int column_index(const std::string& name) const;
  std::int64_t event_count() const;

  DesignMatrix select_rows(const std::vector<int>& indices) const;
  DesignMatrix drop_columns(const std::vector<std::string>& names) const;
};

// One-hot encodes categoricals (k levels -> k-1 indicators, lexicographically
// first level dropped), passes numerics through, then prunes collinear
// columns.
DesignMatrix encode_covariates(const Cohort& c, const EncodingSpec& spec);

// Drops, in order: constant columns, duplicates (keep first), and binary
// columns whose support lies entirely inside the event set (perfect death
// predictors).
std::pair<DesignMatrix, std::vector<std::string>> prune_collinear(const DesignMatrix& m);

// round-half-up test size
int split_test_size(int n, double test_fraction);

// Seeded row-disjoint partition; both halves keep the parent's columns and
// coding dictionary. Returns (train, test).
std::pair<DesignMatrix, DesignMatrix> train_test_split(const DesignMatrix& m,
                                                       double test_fraction,
                                                       std::uint64_t seed);

}  // namespace geosurv
