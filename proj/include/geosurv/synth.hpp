#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "geosurv/data_model.hpp"
#include "geosurv/geo_features.hpp"

namespace geosurv {

struct CalibrationError : std::runtime_error {
  double achieved;
  CalibrationError(const std::string& msg, double f) : std::runtime_error(msg), achieved(f) {}
};

struct BaselineSpec {
  enum class Kind { exponential, weibull };
  Kind kind = Kind::exponential;
  double shape = 1.0;   // weibull only
  double scale = 120.0; // months; exponential mean / weibull scale
};

struct SynthConfig {
  int n_subjects = 10000;
  int n_states = 5;
  int counties_min = 2;
  int counties_max = 6;
  // keys name design-matrix values: numeric features ("treatment", "age") or
  // indicator columns ("grade=G2", "sex=M")
  std::map<std::string, double> true_beta;
  // multiplier linking county hazard offsets to both the cohort log-hazard
  // and the county ESR cells; 0 = null geography
  double geo_effect_scale = 0.0;
  double censoring_target = 0.5;
  BaselineSpec baseline;
  double admin_censor_horizon = 216.0;  // months
  std::uint64_t seed = 1;

  // profile grid
  int age_min = 18;
  int age_max = 84;
  int year_min = 2000;
  int year_max = 2017;
  int n_races = 3;
};

struct SynthTables {
  PopulationTable population;
  ExpectedSurvivalTable esr;
  std::vector<std::string> states;
  std::map<std::string, std::vector<std::string>> state_counties;
  std::map<std::string, double> county_offsets;     // hidden truth
  std::map<std::string, double> county_base_count;  // log-uniform county sizes
};

// Internally consistent geography: higher-hazard counties get lower ESR
// cells for every profile.
SynthTables generate_tables(const SynthConfig& cfg);

struct SynthTruth {
  double censor_rate = 0.0;  // calibrated exponential censoring rate (per month)
  double realized_censoring = 0.0;
  int events = 0;
  int censored = 0;
};

// Subjects are assigned to counties proportionally to population; event
// times follow the configured baseline scaled by exp(beta'x + geo offset);
// censoring is calibrated by bisection to the target fraction (+-2%).
std::pair<Cohort, SynthTruth> generate_cohort(const SynthConfig& cfg, const SynthTables& tables);

// CSV emission in the exact formats consumed by load_cohort and the table
// loaders.
void write_tables_csv(const SynthTables& tables, const SynthConfig& cfg,
                      const std::string& population_path, const std::string& esr_path);
void write_cohort_csv(const Cohort& c, const std::string& path);
void write_cohort_schema(const std::string& path);
ColumnSchema synth_cohort_schema();
EncodingSpec synth_encoding_spec(bool include_state);

SynthConfig load_synth_config(const std::string& path);
void write_truth_json(const std::string& path, const SynthConfig& cfg, const SynthTables& tables,
                      const SynthTruth& truth);

}  // namespace geosurv
