#include "geosurv/geo_features.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "geosurv/csv.hpp"

namespace geosurv {

namespace {
constexpr char kSep = '\x1f';
}

std::string Profile::key() const {
  std::string k = std::to_string(age);
  k += kSep;
  k += sex;
  k += kSep;
  k += std::to_string(year);
  k += kSep;
  k += race;
  return k;
}

std::string Profile::describe() const {
  return "age=" + std::to_string(age) + " sex=" + sex + " year=" + std::to_string(year) +
         " race=" + race;
}

void PopulationTable::add(const Profile& p, const std::string& county, const std::string& state,
                          double count) {
  if (count < 0) throw std::invalid_argument("population count < 0 for " + p.describe());
  auto [it, inserted] = county_state_.try_emplace(county, state);
  if (!inserted && it->second != state)
    throw std::invalid_argument("county " + county + " listed under states " + it->second +
                                " and " + state);
  by_state_[state][p.key()][county] += count;
  ++cells_;
}

const std::map<std::string, double>* PopulationTable::counties(const Profile& p,
                                                               const std::string& state) const {
  auto sit = by_state_.find(state);
  if (sit == by_state_.end()) return nullptr;
  auto pit = sit->second.find(p.key());
  if (pit == sit->second.end()) return nullptr;
  return &pit->second;
}

static std::string esr_cell_key(const Profile& p, const std::string& county,
                                const std::string& state) {
  return p.key() + kSep + county + kSep + state;
}

static std::string esr_slice_key(const Profile& p, const std::string& county,
                                 const std::string& state) {
  std::string k = p.sex;
  k += kSep;
  k += std::to_string(p.year);
  k += kSep;
  k += p.race;
  k += kSep;
  k += county;
  k += kSep;
  k += state;
  return k;
}

void ExpectedSurvivalTable::add(const Profile& p, const std::string& county,
                                const std::string& state, double esr) {
  if (!(esr >= 0.0 && esr <= 1.0))
    throw std::invalid_argument("esr outside [0, 1] for " + p.describe() + " county=" + county);
  cells_by_key_[esr_cell_key(p, county, state)] = esr;
  by_age_slice_[esr_slice_key(p, county, state)][p.age] = esr;
  ++cells_;
}

std::optional<double> ExpectedSurvivalTable::lookup(const Profile& p, const std::string& county,
                                                    const std::string& state) const {
  auto it = cells_by_key_.find(esr_cell_key(p, county, state));
  if (it == cells_by_key_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::pair<int, double>> ExpectedSurvivalTable::nearest_age(
    const Profile& p, const std::string& county, const std::string& state) const {
  auto sit = by_age_slice_.find(esr_slice_key(p, county, state));
  if (sit == by_age_slice_.end() || sit->second.empty()) return std::nullopt;
  const auto& ages = sit->second;
  auto ge = ages.lower_bound(p.age);
  if (ge != ages.end() && ge->first == p.age) return std::make_pair(ge->first, ge->second);
  if (ge == ages.begin()) return std::make_pair(ge->first, ge->second);
  if (ge == ages.end()) {
    auto lt = std::prev(ge);
    return std::make_pair(lt->first, lt->second);
  }
  auto lt = std::prev(ge);
  // equidistant -> lower age
  if (p.age - lt->first <= ge->first - p.age) return std::make_pair(lt->first, lt->second);
  return std::make_pair(ge->first, ge->second);
}

namespace {

struct TableRow {
  Profile profile;
  std::string county;
  std::string state;
  double value = 0.0;
};

TableRow parse_table_row(const CsvTable& csv, const std::vector<std::string>& row,
                         const std::string& value_column, const std::string& path, int line) {
  auto get = [&](const std::string& name) -> const std::string& {
    int idx = csv.column_index(name);
    if (idx < 0)
      throw std::runtime_error(path + ": missing required column \"" + name + "\"");
    return row[static_cast<std::size_t>(idx)];
  };
  TableRow out;
  try {
    out.profile.age = std::stoi(get("age"));
    out.profile.year = std::stoi(get("year"));
    out.value = std::stod(get(value_column));
  } catch (const std::exception&) {
    throw std::runtime_error(path + ": line " + std::to_string(line) + ": unparseable numeric field");
  }
  out.profile.sex = get("sex");
  out.profile.race = get("race");
  out.county = get("county");
  out.state = get("state");
  return out;
}

}  // namespace

PopulationTable load_population_table(const std::string& path) {
  const CsvTable csv = read_csv(path);
  PopulationTable pop;
  int line = 1;
  for (const auto& row : csv.rows) {
    ++line;
    TableRow r = parse_table_row(csv, row, "count", path, line);
    pop.add(r.profile, r.county, r.state, r.value);
  }
  return pop;
}

ExpectedSurvivalTable load_esr_table(const std::string& path) {
  const CsvTable csv = read_csv(path);
  ExpectedSurvivalTable esr;
  int line = 1;
  for (const auto& row : csv.rows) {
    ++line;
    TableRow r = parse_table_row(csv, row, "esr", path, line);
    try {
      esr.add(r.profile, r.county, r.state, r.value);
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(path + ": line " + std::to_string(line) + ": " + e.what());
    }
  }
  return esr;
}

std::map<std::string, double> county_weights(const PopulationTable& pop, const Profile& profile,
                                             const std::string& state) {
  const auto* counts = pop.counties(profile, state);
  if (!counts)
    throw NoPopulationDataError("no population cells for " + profile.describe() +
                                " state=" + state);
  double total = 0.0;
  for (const auto& [county, count] : *counts) total += count;
  if (total <= 0.0)
    throw NoPopulationDataError("zero population for " + profile.describe() + " state=" + state);
  std::map<std::string, double> weights;
  for (const auto& [county, count] : *counts) weights[county] = count / total;
  return weights;
}

StateEsrResult state_esr(const ExpectedSurvivalTable& esr, const PopulationTable& pop,
                         const Profile& profile, const std::string& state,
                         FallbackPolicy::MissingCell policy) {
  const auto weights = county_weights(pop, profile, state);

  StateEsrResult out;
  double weighted_sum = 0.0;
  double weight_mass = 0.0;
  // std::map iteration keeps the summation order fixed under any table
  // insertion order
  for (const auto& [county, w] : weights) {
    std::optional<double> cell = esr.lookup(profile, county, state);
    if (!cell && policy == FallbackPolicy::MissingCell::nearest_age) {
      auto sub = esr.nearest_age(profile, county, state);
      if (sub) {
        cell = sub->second;
        out.fallback_applied = true;
      }
    }
    if (!cell) {
      if (w > 0.0) out.fallback_applied = true;  // mass renormalized away
      continue;
    }
    weighted_sum += *cell * w;
    weight_mass += w;
    ++out.counties_used;
  }
  if (out.counties_used == 0)
    throw AllEsrCellsMissingError("no esr cells for " + profile.describe() + " state=" + state);
  out.total_weight = weight_mass;
  out.value = weighted_sum / weight_mass;
  return out;
}

namespace {

struct SubjectOutcome {
  bool ok = false;
  bool fallback = false;
  double value = 0.0;
  std::string error;
};

}  // namespace

std::pair<Cohort, AttachReport> attach_state_esr(const Cohort& c, const ExpectedSurvivalTable& esr,
                                                 const PopulationTable& pop,
                                                 const FallbackPolicy& policy, int jobs) {
  // state -> subject indices, in cohort order
  std::map<std::string, std::vector<std::size_t>> by_state;
  for (std::size_t i = 0; i < c.subjects.size(); ++i) by_state[c.subjects[i].state].push_back(i);

  std::vector<SubjectOutcome> outcomes(c.subjects.size());

  auto process_state = [&](const std::vector<std::size_t>& idx) {
    std::unordered_map<std::string, SubjectOutcome> memo;  // profile key -> outcome
    for (std::size_t i : idx) {
      const Subject& s = c.subjects[i];
      const Profile profile{s.age, s.sex, s.diagnosis_year, s.race};
      const std::string key = profile.key();
      auto mit = memo.find(key);
      if (mit == memo.end()) {
        SubjectOutcome o;
        try {
          StateEsrResult r = state_esr(esr, pop, profile, s.state, policy.missing_cell);
          o.ok = true;
          o.fallback = r.fallback_applied;
          o.value = r.value;
        } catch (const NoPopulationDataError& e) {
          o.error = e.what();
        } catch (const AllEsrCellsMissingError& e) {
          o.error = e.what();
        }
        mit = memo.emplace(key, std::move(o)).first;
      }
      outcomes[i] = mit->second;
    }
  };

  const int n_states = static_cast<int>(by_state.size());
  int workers = jobs > 0 ? jobs : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min(workers, n_states));
  if (workers <= 1 || n_states <= 1) {
    for (const auto& [state, idx] : by_state) process_state(idx);
  } else {
    std::vector<const std::vector<std::size_t>*> groups;
    groups.reserve(static_cast<std::size_t>(n_states));
    for (const auto& [state, idx] : by_state) groups.push_back(&idx);
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t g = next.fetch_add(1);
          if (g >= groups.size()) return;
          process_state(*groups[g]);
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  Cohort out;
  out.provenance = c.provenance;
  out.subjects.reserve(c.subjects.size());
  AttachReport report;
  report.entries.reserve(c.subjects.size());
  for (std::size_t i = 0; i < c.subjects.size(); ++i) {
    const SubjectOutcome& o = outcomes[i];
    AttachEntry entry;
    entry.subject_id = c.subjects[i].id;
    if (o.ok) {
      Subject s = c.subjects[i];
      s.numeric_covariates["state_esr"] = o.value;
      out.subjects.push_back(std::move(s));
      entry.status = o.fallback ? "ok_fallback" : "ok";
    } else {
      entry.status = "dropped";
      entry.detail = o.error;
      ++report.failures;
    }
    report.entries.push_back(std::move(entry));
  }

  if (report.failures > 0 && policy.on_error == FallbackPolicy::OnSubjectError::abort_run) {
    std::string msg = "attach_state_esr: " + std::to_string(report.failures) +
                      " subject(s) failed; first: ";
    for (const auto& e : report.entries)
      if (e.status == "dropped") {
        msg += e.detail;
        break;
      }
    throw AttachAbortedError(msg, std::move(report));
  }
  return {std::move(out), std::move(report)};
}

void write_attach_report(const std::string& path, const AttachReport& report) {
  CsvTable t;
  t.header = {"subject_id", "status", "detail"};
  for (const auto& e : report.entries) t.rows.push_back({e.subject_id, e.status, e.detail});
  write_csv(path, t);
}

}  // namespace geosurv
