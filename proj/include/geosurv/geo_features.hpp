#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "geosurv/data_model.hpp"

namespace geosurv {

struct NoPopulationDataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct AllEsrCellsMissingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Demographic profile used to match life-table cells; matching is exact,
// with no interpolation across years or ages.
struct Profile {
  int age = 0;
  std::string sex;
  int year = 0;
  std::string race;

  std::string key() const;
  std::string describe() const;
  bool operator==(const Profile&) const = default;
};

// Mid-year population counts keyed by (age, sex, year, race, county, state).
class PopulationTable {
 public:
  void add(const Profile& p, const std::string& county, const std::string& state, double count);

  // counties with cells for (profile, state), sorted by county code
  const std::map<std::string, double>* counties(const Profile& p, const std::string& state) const;

  const std::unordered_map<std::string, std::string>& county_states() const {
    return county_state_;
  }
  std::size_t cell_count() const { return cells_; }

 private:
  // state -> profile key -> county -> count
  std::unordered_map<std::string, std::unordered_map<std::string, std::map<std::string, double>>>
      by_state_;
  std::unordered_map<std::string, std::string> county_state_;
  std::size_t cells_ = 0;
};

// County-level expected one-year survival rates, same key space.
class ExpectedSurvivalTable {
 public:
  void add(const Profile& p, const std::string& county, const std::string& state, double esr);

  std::optional<double> lookup(const Profile& p, const std::string& county,
                               const std::string& state) const;
  // Closest-age cell within the same (sex, year, race, county, state) slice;
  // equidistant ages resolve to the lower one.
  std::optional<std::pair<int, double>> nearest_age(const Profile& p, const std::string& county,
                                                    const std::string& state) const;
  std::size_t cell_count() const { return cells_; }

 private:
  std::unordered_map<std::string, double> cells_by_key_;
  // (sex,year,race,county,state) -> age -> esr
  std::unordered_map<std::string, std::map<int, double>> by_age_slice_;
  std::size_t cells_ = 0;
};

PopulationTable load_population_table(const std::string& path);
ExpectedSurvivalTable load_esr_table(const std::string& path);

struct FallbackPolicy {
  enum class MissingCell { renormalize, nearest_age };
  enum class OnSubjectError { drop_row, abort_run };
  MissingCell missing_cell = MissingCell::renormalize;
  OnSubjectError on_error = OnSubjectError::drop_row;
};

struct StateEsrResult {
  double value = 0.0;
  int counties_used = 0;
  double total_weight = 0.0;  // weight mass of contributing counties before renormalization
  bool fallback_applied = false;
};

// Residence weights Pr(county | profile, state) from general-population
// counts.
std::map<std::string, double> county_weights(const PopulationTable& pop, const Profile& profile,
                                             const std::string& state);

// Population-weighted county ESR aggregated to the state (law of total
// probability over counties).
StateEsrResult state_esr(const ExpectedSurvivalTable& esr, const PopulationTable& pop,
                         const Profile& profile, const std::string& state,
                         FallbackPolicy::MissingCell policy = FallbackPolicy::MissingCell::renormalize);

struct AttachEntry {
  std::string subject_id;
  std::string status;  // ok | ok_fallback | dropped
  std::string detail;
};

struct AttachReport {
  std::vector<AttachEntry> entries;
  int failures = 0;
};

struct AttachAbortedError : std::runtime_error {
  AttachReport report;
  AttachAbortedError(const std::string& msg, AttachReport r)
      : std::runtime_error(msg), report(std::move(r)) {}
};

// Adds the numeric covariate "state_esr" to every subject. Subjects are
// grouped by state; states may be processed concurrently with results
// identical to sequential processing. StateESR values are memoized per
// (profile, state).
std::pair<Cohort, AttachReport> attach_state_esr(const Cohort& c, const ExpectedSurvivalTable& esr,
                                                 const PopulationTable& pop,
                                                 const FallbackPolicy& policy, int jobs = 0);

void write_attach_report(const std::string& path, const AttachReport& report);

}  // namespace geosurv
