#include "geosurv/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "geosurv/csv.hpp"
#include "geosurv/rng.hpp"

namespace geosurv {

using nlohmann::json;

namespace {

constexpr double kBaseAnnualHazard = 0.002;
constexpr double kAgeSlope = 0.06;  // log-hazard per year of age

std::string state_name(int i) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "S%02d", i + 1);
  return buf;
}

std::string county_name(const std::string& state, int i) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "C%02d", i + 1);
  return state + buf;
}

std::string race_name(int i) { return "R" + std::to_string(i + 1); }

double sex_factor(const std::string& sex) { return sex == "M" ? 1.25 : 1.0; }

double race_factor(const std::string& race) {
  if (race == "R2") return 1.12;
  if (race == "R3") return 0.9;
  return 1.0 + 0.05 * static_cast<double>(race.size());  // R4+ mild spread
}

// annual population hazard for a profile; strictly increasing in age
double population_hazard(const SynthConfig& cfg, const Profile& p) {
  const double age_term = std::exp(kAgeSlope * (p.age - cfg.age_min));
  const double year_term = std::pow(0.995, p.year - cfg.year_min);
  return kBaseAnnualHazard * age_term * sex_factor(p.sex) * race_factor(p.race) * year_term;
}

double county_esr(const SynthConfig& cfg, const Profile& p, double offset) {
  return std::exp(-population_hazard(cfg, p) * std::exp(cfg.geo_effect_scale * offset));
}

// population count for a profile cell; weights across counties stay
// proportional to the county base because the age shape cancels
double population_count(const SynthConfig& cfg, const Profile& p, double base) {
  const double age_shape =
      1.0 - 0.5 * static_cast<double>(p.age - cfg.age_min) /
                static_cast<double>(std::max(1, cfg.age_max - cfg.age_min));
  return std::max(1.0, std::round(base * age_shape));
}

template <typename Fn>
void for_each_profile(const SynthConfig& cfg, Fn&& fn) {
  for (int age = cfg.age_min; age <= cfg.age_max; ++age)
    for (const char* sex : {"F", "M"})
      for (int year = cfg.year_min; year <= cfg.year_max; ++year)
        for (int r = 0; r < cfg.n_races; ++r) fn(Profile{age, sex, year, race_name(r)});
}

}  // namespace

SynthTables generate_tables(const SynthConfig& cfg) {
  if (cfg.n_states < 1) throw std::invalid_argument("generate_tables: n_states must be >= 1");
  if (cfg.counties_min < 1 || cfg.counties_max < cfg.counties_min)
    throw std::invalid_argument("generate_tables: bad county range");

  SynthTables t;
  Rng rng(mix_seed(cfg.seed, fnv1a("tables")));

  for (int s = 0; s < cfg.n_states; ++s) {
    const std::string state = state_name(s);
    t.states.push_back(state);
    // deterministic spread of state-level hazard, plus per-county deviation
    const double state_base =
        cfg.n_states > 1 ? -1.0 + 2.0 * static_cast<double>(s) / (cfg.n_states - 1) : 0.0;
    const int n_counties = rng.uniform_int(cfg.counties_min, cfg.counties_max);
    for (int c = 0; c < n_counties; ++c) {
      const std::string county = county_name(state, c);
      t.state_counties[state].push_back(county);
      t.county_offsets[county] = state_base + rng.uniform(-0.3, 0.3);
      t.county_base_count[county] = std::round(rng.log_uniform(1e3, 1e6));
    }
  }

  for_each_profile(cfg, [&](const Profile& p) {
    for (const auto& state : t.states) {
      for (const auto& county : t.state_counties[state]) {
        t.population.add(p, county, state, population_count(cfg, p, t.county_base_count[county]));
        t.esr.add(p, county, state, county_esr(cfg, p, t.county_offsets[county]));
      }
    }
  });
  return t;
}

namespace {

// resolves a true_beta key against a subject the same way encode_covariates
// names columns
double design_value(const Subject& s, const std::string& key) {
  const auto eq = key.find('=');
  if (eq != std::string::npos) {
    const std::string feature = key.substr(0, eq);
    const std::string level = key.substr(eq + 1);
    const std::string* v = s.categorical_value(feature);
    if (!v) throw std::invalid_argument("true_beta names unknown feature: " + key);
    return *v == level ? 1.0 : 0.0;
  }
  auto v = s.numeric_value(key);
  if (!v) throw std::invalid_argument("true_beta names unknown feature: " + key);
  return *v;
}

double draw_event_time(Rng& rng, const BaselineSpec& baseline, double hazard_multiplier) {
  const double e = rng.exponential(1.0);
  if (baseline.kind == BaselineSpec::Kind::exponential)
    return baseline.scale * e / hazard_multiplier;
  return baseline.scale * std::pow(e / hazard_multiplier, 1.0 / baseline.shape);
}

}  // namespace

std::pair<Cohort, SynthTruth> generate_cohort(const SynthConfig& cfg, const SynthTables& tables) {
  if (!(cfg.censoring_target > 0.0 && cfg.censoring_target < 1.0))
    throw std::invalid_argument("generate_cohort: censoring_target outside (0, 1)");

  Rng rng(mix_seed(cfg.seed, fnv1a("cohort")));
  const int n = cfg.n_subjects;

  Cohort cohort;
  cohort.provenance = "synthetic seed=" + std::to_string(cfg.seed);
  cohort.subjects.reserve(static_cast<std::size_t>(n));

  std::vector<double> event_time(static_cast<std::size_t>(n));
  std::vector<double> censor_draw(static_cast<std::size_t>(n));  // Exp(1)

  static const char* kGrades[] = {"G1", "G2", "G3"};
  static const char* kSources[] = {"clinic", "hospital", "lab"};

  for (int i = 0; i < n; ++i) {
    Subject s;
    char idbuf[16];
    std::snprintf(idbuf, sizeof(idbuf), "P%07d", i + 1);
    s.id = idbuf;
    s.age = rng.uniform_int(cfg.age_min, cfg.age_max);
    s.sex = rng.bernoulli(0.5) ? "M" : "F";
    s.race = race_name(rng.uniform_int(0, cfg.n_races - 1));
    s.diagnosis_year = rng.uniform_int(cfg.year_min, cfg.year_max);
    s.state = tables.states[static_cast<std::size_t>(
        rng.uniform_index(tables.states.size()))];

    // county ~ population weights for the subject's profile
    const Profile profile{s.age, s.sex, s.diagnosis_year, s.race};
    const auto* counts = tables.population.counties(profile, s.state);
    if (!counts || counts->empty())
      throw std::logic_error("generate_cohort: no population cells for " + profile.describe());
    double total = 0.0;
    for (const auto& [county, count] : *counts) total += count;
    double u = rng.uniform01() * total;
    for (const auto& [county, count] : *counts) {
      u -= count;
      if (u <= 0.0) {
        s.county = county;
        break;
      }
    }
    if (!s.county) s.county = counts->rbegin()->first;

    const double g = rng.uniform01();
    s.categorical_covariates["grade"] = kGrades[g < 0.5 ? 0 : (g < 0.8 ? 1 : 2)];
    s.categorical_covariates["reporting_source"] = kSources[rng.uniform_int(0, 2)];
    s.numeric_covariates["treatment"] = rng.bernoulli(0.5) ? 1.0 : 0.0;

    double eta = 0.0;
    for (const auto& [key, beta] : cfg.true_beta) eta += beta * design_value(s, key);
    eta += cfg.geo_effect_scale * tables.county_offsets.at(*s.county);

    event_time[static_cast<std::size_t>(i)] = draw_event_time(rng, cfg.baseline, std::exp(eta));
    censor_draw[static_cast<std::size_t>(i)] = rng.exponential(1.0);
    cohort.subjects.push_back(std::move(s));
  }

  // calibrate the exponential censoring rate so the realized censored
  // fraction lands within +-2% of the target
  const double h = cfg.admin_censor_horizon;
  auto censored_fraction = [&](double rate) {
    int censored = 0;
    for (int i = 0; i < n; ++i) {
      const double c = rate > 0.0 ? std::min(censor_draw[static_cast<std::size_t>(i)] / rate, h) : h;
      if (c < event_time[static_cast<std::size_t>(i)]) ++censored;
    }
    return static_cast<double>(censored) / static_cast<double>(n);
  };

  double rate = 0.0;
  double f = censored_fraction(0.0);
  if (f < cfg.censoring_target) {
    double lo = 0.0, hi = 1e-6;
    int doublings = 0;
    while (censored_fraction(hi) < cfg.censoring_target && doublings++ < 80) hi *= 2.0;
    for (int step = 0; step < 50; ++step) {
      const double mid = 0.5 * (lo + hi);
      if (censored_fraction(mid) < cfg.censoring_target)
        lo = mid;
      else
        hi = mid;
    }
    rate = hi;
    f = censored_fraction(rate);
    const double f_lo = censored_fraction(lo);
    if (std::fabs(f_lo - cfg.censoring_target) < std::fabs(f - cfg.censoring_target)) {
      rate = lo;
      f = f_lo;
    }
  }
  if (std::fabs(f - cfg.censoring_target) > 0.02)
    throw CalibrationError("generate_cohort: censoring calibration failed; achieved " +
                               format_double(f) + " target " + format_double(cfg.censoring_target),
                           f);

  SynthTruth truth;
  truth.censor_rate = rate;
  truth.realized_censoring = f;
  for (int i = 0; i < n; ++i) {
    auto& s = cohort.subjects[static_cast<std::size_t>(i)];
    const double t_event = event_time[static_cast<std::size_t>(i)];
    const double t_censor =
        rate > 0.0 ? std::min(censor_draw[static_cast<std::size_t>(i)] / rate, h) : h;
    s.event = t_event <= t_censor;
    s.time = std::min(t_event, t_censor);
    s.censoring_kind = CensoringKind::right;
    if (s.event)
      ++truth.events;
    else
      ++truth.censored;
  }
  return {std::move(cohort), truth};
}

void write_tables_csv(const SynthTables& tables, const SynthConfig& cfg,
                      const std::string& population_path, const std::string& esr_path) {
  std::ofstream pop(population_path);
  std::ofstream esr(esr_path);
  if (!pop) throw std::runtime_error("cannot write " + population_path);
  if (!esr) throw std::runtime_error("cannot write " + esr_path);
  pop << "age,sex,year,race,county,state,count\n";
  esr << "age,sex,year,race,county,state,esr\n";
  for (const auto& state : tables.states) {
    for (const auto& county : tables.state_counties.at(state)) {
      const double base = tables.county_base_count.at(county);
      const double offset = tables.county_offsets.at(county);
      for_each_profile(cfg, [&](const Profile& p) {
        const std::string prefix = std::to_string(p.age) + "," + p.sex + "," +
                                   std::to_string(p.year) + "," + p.race + "," + county + "," +
                                   state + ",";
        pop << prefix << format_double(population_count(cfg, p, base)) << '\n';
        esr << prefix << format_double(county_esr(cfg, p, offset)) << '\n';
      });
    }
  }
}

void write_cohort_csv(const Cohort& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "id,age,sex,race,year,state,county,grade,reporting_source,treatment,time,event\n";
  for (const auto& s : c.subjects) {
    out << s.id << ',' << s.age << ',' << s.sex << ',' << s.race << ',' << s.diagnosis_year << ','
        << s.state << ',' << (s.county ? *s.county : "") << ','
        << s.categorical_covariates.at("grade") << ','
        << s.categorical_covariates.at("reporting_source") << ','
        << format_double(s.numeric_covariates.at("treatment")) << ',' << format_double(s.time)
        << ',' << (s.event ? 1 : 0) << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

ColumnSchema synth_cohort_schema() {
  ColumnSchema schema;
  schema.roles = {{"id", "id"},       {"age", "age"},   {"sex", "sex"},
                  {"race", "race"},   {"year", "year"}, {"state", "state"},
                  {"county", "county"}, {"time", "time"}, {"event", "event"}};
  schema.categorical = {"grade", "reporting_source"};
  schema.numeric = {"treatment"};
  return schema;
}

EncodingSpec synth_encoding_spec(bool include_state) {
  EncodingSpec spec;
  spec.categorical = {"sex", "race", "grade", "reporting_source"};
  if (include_state) spec.categorical.push_back("state");
  spec.numeric = {"age", "treatment"};
  return spec;
}

void write_cohort_schema(const std::string& path) {
  json j;
  j["schema_version"] = 1;
  j["roles"] = {{"id", "id"},     {"age", "age"},       {"sex", "sex"},
                {"race", "race"}, {"year", "year"},     {"state", "state"},
                {"county", "county"}, {"time", "time"}, {"event", "event"}};
  j["categorical"] = {"grade", "reporting_source"};
  j["numeric"] = {"treatment"};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

SynthConfig load_synth_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open synth config: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("synth config parse error in " + path + ": " + e.what());
  }
  SynthConfig cfg;
  cfg.n_subjects = j.value("n_subjects", cfg.n_subjects);
  cfg.n_states = j.value("n_states", cfg.n_states);
  if (j.contains("counties_per_state")) {
    cfg.counties_min = j["counties_per_state"][0].get<int>();
    cfg.counties_max = j["counties_per_state"][1].get<int>();
  }
  if (j.contains("true_beta"))
    cfg.true_beta = j["true_beta"].get<std::map<std::string, double>>();
  cfg.geo_effect_scale = j.value("geo_effect_scale", cfg.geo_effect_scale);
  cfg.censoring_target = j.value("censoring_target", cfg.censoring_target);
  if (j.contains("baseline")) {
    const auto& b = j["baseline"];
    const std::string kind = b.value("kind", "exponential");
    if (kind == "weibull")
      cfg.baseline.kind = BaselineSpec::Kind::weibull;
    else if (kind == "exponential")
      cfg.baseline.kind = BaselineSpec::Kind::exponential;
    else
      throw std::runtime_error("unknown baseline kind: " + kind);
    cfg.baseline.shape = b.value("shape", cfg.baseline.shape);
    cfg.baseline.scale = b.value("scale", cfg.baseline.scale);
  }
  cfg.admin_censor_horizon = j.value("admin_censor_horizon", cfg.admin_censor_horizon);
  cfg.seed = j.value("seed", cfg.seed);
  if (j.contains("age_range")) {
    cfg.age_min = j["age_range"][0].get<int>();
    cfg.age_max = j["age_range"][1].get<int>();
  }
  if (j.contains("year_range")) {
    cfg.year_min = j["year_range"][0].get<int>();
    cfg.year_max = j["year_range"][1].get<int>();
  }
  cfg.n_races = j.value("n_races", cfg.n_races);
  return cfg;
}

void write_truth_json(const std::string& path, const SynthConfig& cfg, const SynthTables& tables,
                      const SynthTruth& truth) {
  json j;
  j["schema_version"] = 1;
  j["seed"] = cfg.seed;
  j["n_subjects"] = cfg.n_subjects;
  j["true_beta"] = cfg.true_beta;
  j["geo_effect_scale"] = cfg.geo_effect_scale;
  j["censoring_target"] = cfg.censoring_target;
  j["realized_censoring"] = truth.realized_censoring;
  j["censor_rate_per_month"] = truth.censor_rate;
  j["events"] = truth.events;
  j["censored"] = truth.censored;
  j["county_offsets"] = tables.county_offsets;
  j["baseline"] = {{"kind", cfg.baseline.kind == BaselineSpec::Kind::weibull ? "weibull"
                                                                             : "exponential"},
                   {"shape", cfg.baseline.shape},
                   {"scale", cfg.baseline.scale}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

}  // namespace geosurv
