#include "geosurv/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "geosurv/csv.hpp"
#include "geosurv/rng.hpp"

namespace geosurv {

using nlohmann::json;

const char* to_string(CensoringKind k) {
  switch (k) {
    case CensoringKind::right: return "right";
    case CensoringKind::left: return "left";
    case CensoringKind::interval: return "interval";
  }
  return "?";
}

const std::string* Subject::categorical_value(const std::string& name) const {
  if (name == "sex") return &sex;
  if (name == "race") return &race;
  if (name == "state") return &state;
  if (name == "county") return county ? &*county : nullptr;
  auto it = categorical_covariates.find(name);
  return it == categorical_covariates.end() ? nullptr : &it->second;
}

std::optional<double> Subject::numeric_value(const std::string& name) const {
  if (name == "age") return static_cast<double>(age);
  if (name == "year") return static_cast<double>(diagnosis_year);
  auto it = numeric_covariates.find(name);
  if (it == numeric_covariates.end()) return std::nullopt;
  return it->second;
}

void validate_unique_ids(const Cohort& c) {
  std::unordered_set<std::string> seen;
  seen.reserve(c.subjects.size());
  for (const auto& s : c.subjects)
    if (!seen.insert(s.id).second)
      throw std::invalid_argument("duplicate subject id: " + s.id);
}

// ---------------------------------------------------------------------------
// Loading

ColumnSchema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open schema file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw SchemaError("schema parse error in " + path + ": " + e.what());
  }
  ColumnSchema schema;
  if (!j.contains("roles") || !j["roles"].is_object())
    throw SchemaError("schema file missing \"roles\" object: " + path);
  for (auto& [role, col] : j["roles"].items()) schema.roles[role] = col.get<std::string>();
  if (j.contains("categorical"))
    schema.categorical = j["categorical"].get<std::vector<std::string>>();
  if (j.contains("numeric")) schema.numeric = j["numeric"].get<std::vector<std::string>>();
  return schema;
}

namespace {

bool parse_int(const std::string& s, int& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  long v = std::strtol(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size()) return false;
  out = static_cast<int>(v);
  return true;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || !std::isfinite(v)) return false;
  out = v;
  return true;
}

bool parse_bool(const std::string& s, bool& out) {
  if (s == "1" || s == "true" || s == "TRUE" || s == "True") {
    out = true;
    return true;
  }
  if (s == "0" || s == "false" || s == "FALSE" || s == "False") {
    out = false;
    return true;
  }
  return false;
}

}  // namespace

LoadResult load_cohort(const std::string& path, const ColumnSchema& schema) {
  const CsvTable csv = read_csv(path);

  static const char* kRequired[] = {"age", "sex", "time", "event", "state"};
  std::map<std::string, int> role_col;
  for (const auto& [role, col] : schema.roles) {
    int idx = csv.column_index(col);
    if (idx < 0) {
      bool required = std::find_if(std::begin(kRequired), std::end(kRequired),
                                   [&](const char* r) { return role == r; }) != std::end(kRequired);
      if (required)
        throw SchemaError("required column \"" + col + "\" for role \"" + role +
                          "\" not found in " + path);
      continue;  // optional role absent from the file
    }
    role_col[role] = idx;
  }
  for (const char* role : kRequired)
    if (!schema.roles.count(role))
      throw SchemaError(std::string("schema missing required role \"") + role + "\"");

  std::map<std::string, int> cat_col;
  for (const auto& name : schema.categorical) {
    int idx = csv.column_index(name);
    if (idx < 0) throw SchemaError("categorical column \"" + name + "\" not found in " + path);
    cat_col[name] = idx;
  }
  std::map<std::string, int> num_col;
  for (const auto& name : schema.numeric) {
    int idx = csv.column_index(name);
    if (idx < 0) throw SchemaError("numeric column \"" + name + "\" not found in " + path);
    num_col[name] = idx;
  }

  LoadResult out;
  out.cohort.provenance = path;
  out.cohort.subjects.reserve(csv.rows.size());
  std::unordered_set<std::string> seen_ids;

  int row_no = 0;
  for (const auto& row : csv.rows) {
    ++row_no;
    Subject s;
    std::string err;

    auto field = [&](const std::string& role) -> const std::string& {
      static const std::string empty;
      auto it = role_col.find(role);
      return it == role_col.end() ? empty : row[static_cast<std::size_t>(it->second)];
    };

    const std::string& raw_age = field("age");
    if (!raw_age.empty() && raw_age.back() == '+') {
      // top-coded band such as "85+": kept here, removed by clean_cohort
      if (!parse_int(raw_age.substr(0, raw_age.size() - 1), s.age))
        err = "unparseable age \"" + raw_age + "\"";
      s.age_top_coded = true;
    } else if (!parse_int(raw_age, s.age)) {
      err = "unparseable age \"" + raw_age + "\"";
    }

    if (err.empty() && !parse_double(field("time"), s.time))
      err = "unparseable time \"" + field("time") + "\"";
    if (err.empty() && s.time < 0) err = "negative time";
    if (err.empty() && !parse_bool(field("event"), s.event))
      err = "unparseable event \"" + field("event") + "\"";

    if (err.empty()) {
      s.sex = field("sex");
      s.state = field("state");
      s.race = field("race");
      if (role_col.count("year") && !parse_int(field("year"), s.diagnosis_year))
        err = "unparseable year \"" + field("year") + "\"";
      s.id = role_col.count("id") ? field("id") : "row" + std::to_string(row_no);
      const std::string& county = field("county");
      if (!county.empty()) s.county = county;

      const std::string& cens = field("censoring");
      if (!cens.empty()) {
        if (cens == "right") s.censoring_kind = CensoringKind::right;
        else if (cens == "left") s.censoring_kind = CensoringKind::left;
        else if (cens == "interval") s.censoring_kind = CensoringKind::interval;
        else err = "unknown censoring kind \"" + cens + "\"";
      }
      if (err.empty() && s.event && s.censoring_kind != CensoringKind::right)
        err = "observed event with non-right censoring kind";
      if (err.empty() && s.censoring_kind == CensoringKind::interval) {
        double lo = 0, hi = 0;
        if (parse_double(field("interval_lo"), lo) && parse_double(field("interval_hi"), hi))
          s.interval_bounds = {lo, hi};
      }
    }

    if (err.empty()) {
      for (const auto& [name, idx] : cat_col) {
        const std::string& v = row[static_cast<std::size_t>(idx)];
        if (!v.empty()) s.categorical_covariates[name] = v;
      }
      for (const auto& [name, idx] : num_col) {
        const std::string& v = row[static_cast<std::size_t>(idx)];
        if (v.empty()) continue;
        double d = 0;
        if (!parse_double(v, d)) {
          err = "unparseable numeric covariate " + name + "=\"" + v + "\"";
          break;
        }
        s.numeric_covariates[name] = d;
      }
    }

    if (err.empty() && !seen_ids.insert(s.id).second) err = "duplicate subject id " + s.id;

    if (err.empty())
      out.cohort.subjects.push_back(std::move(s));
    else
      out.errors.push_back({row_no, err});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cleaning

std::pair<Cohort, CleaningReport> clean_cohort(const Cohort& c, const CleaningRules& rules) {
  CleaningReport report;

  // Era-sparse features: covariates first observed strictly after the
  // cohort's earliest diagnosis year were added to the source after that
  // year and are dropped cohort-wide.
  std::set<std::string> dropped_features;
  if (rules.drop_era_sparse_features && !c.subjects.empty()) {
    int min_year = c.subjects.front().diagnosis_year;
    for (const auto& s : c.subjects) min_year = std::min(min_year, s.diagnosis_year);

    std::map<std::string, int> first_year_present;
    auto note = [&](const std::string& name, int year) {
      auto it = first_year_present.find(name);
      if (it == first_year_present.end())
        first_year_present[name] = year;
      else
        it->second = std::min(it->second, year);
    };
    for (const auto& s : c.subjects) {
      for (const auto& [name, _] : s.categorical_covariates) note(name, s.diagnosis_year);
      for (const auto& [name, _] : s.numeric_covariates) note(name, s.diagnosis_year);
    }
    for (const auto& [name, year] : first_year_present) {
      if (year > min_year) {
        dropped_features.insert(name);
        report.dropped_features.emplace_back(
            name, "feature only present for diagnosis_year >= " + std::to_string(year));
      }
    }
  }

  Cohort cleaned;
  cleaned.provenance = c.provenance;
  cleaned.subjects.reserve(c.subjects.size());
  for (const auto& s : c.subjects) {
    if (rules.drop_top_coded_ages && s.age_top_coded) {
      report.dropped_rows.emplace_back(s.id, "top-coded age band");
      continue;
    }
    std::string missing;
    for (const auto& name : rules.required_covariates) {
      if (dropped_features.count(name)) continue;  // column is gone anyway
      bool present = s.categorical_value(name) != nullptr || s.numeric_value(name).has_value();
      if (!present) {
        missing = name;
        break;
      }
    }
    if (!missing.empty()) {
      report.dropped_rows.emplace_back(s.id, "missing required covariate " + missing);
      continue;
    }
    Subject copy = s;
    for (const auto& name : dropped_features) {
      copy.categorical_covariates.erase(name);
      copy.numeric_covariates.erase(name);
    }
    cleaned.subjects.push_back(std::move(copy));
  }
  return {std::move(cleaned), std::move(report)};
}

void write_cleaning_report(const std::string& path, const CleaningReport& report) {
  CsvTable t;
  t.header = {"row_id", "reason"};
  for (const auto& [id, reason] : report.dropped_rows) t.rows.push_back({id, reason});
  for (const auto& [name, reason] : report.dropped_features) t.rows.push_back({name, reason});
  write_csv(path, t);
}

// ---------------------------------------------------------------------------
// Encoding

std::string CodingDictionary::decode(const std::string& feature,
                                     const std::vector<std::string>& column_names,
                                     const Eigen::RowVectorXd& row) const {
  auto fit = features.find(feature);
  if (fit == features.end()) throw EncodingError("unknown feature in decode: " + feature);
  const std::string* base = nullptr;
  for (const auto& [level, entry] : fit->second) {
    if (entry.column.empty()) {
      base = &level;
      continue;
    }
    auto cit = std::find(column_names.begin(), column_names.end(), entry.column);
    if (cit == column_names.end()) continue;  // pruned column: treated as zero
    const auto idx = static_cast<Eigen::Index>(cit - column_names.begin());
    if (row[idx] == 1.0) return level;
  }
  if (!base) throw EncodingError("no base level recorded for feature " + feature);
  return *base;
}

void write_coding_dictionary(const std::string& path, const CodingDictionary& dict) {
  json j;
  j["schema_version"] = 1;
  json feats = json::object();
  for (const auto& [feature, levels] : dict.features) {
    json lv = json::object();
    for (const auto& [level, entry] : levels) lv[level] = entry.code;
    feats[feature] = lv;
  }
  j["features"] = feats;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write coding dictionary: " + path);
  out << j.dump(2) << '\n';
}

int DesignMatrix::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < column_names.size(); ++i)
    if (column_names[i] == name) return static_cast<int>(i);
  return -1;
}

std::int64_t DesignMatrix::event_count() const {
  std::int64_t k = 0;
  for (char e : event) k += e ? 1 : 0;
  return k;
}

DesignMatrix DesignMatrix::select_rows(const std::vector<int>& indices) const {
  DesignMatrix out;
  out.column_names = column_names;
  out.coding_dictionary = coding_dictionary;
  const auto k = static_cast<Eigen::Index>(indices.size());
  out.values.resize(k, values.cols());
  out.time.resize(k);
  out.event.resize(indices.size());
  out.censoring.resize(indices.size());
  for (Eigen::Index r = 0; r < k; ++r) {
    const int src = indices[static_cast<std::size_t>(r)];
    out.values.row(r) = values.row(src);
    out.time[r] = time[src];
    out.event[static_cast<std::size_t>(r)] = event[static_cast<std::size_t>(src)];
    out.censoring[static_cast<std::size_t>(r)] = censoring[static_cast<std::size_t>(src)];
  }
  return out;
}

DesignMatrix DesignMatrix::drop_columns(const std::vector<std::string>& names) const {
  auto matches = [&names](const std::string& col) {
    for (const auto& n : names) {
      if (col == n) return true;
      if (col.size() > n.size() && col.compare(0, n.size(), n) == 0 && col[n.size()] == '=')
        return true;  // "feature=level" indicator of feature n
    }
    return false;
  };
  std::vector<Eigen::Index> keep;
  for (std::size_t i = 0; i < column_names.size(); ++i)
    if (!matches(column_names[i])) keep.push_back(static_cast<Eigen::Index>(i));

  DesignMatrix out;
  out.coding_dictionary = coding_dictionary;
  out.time = time;
  out.event = event;
  out.censoring = censoring;
  out.values.resize(values.rows(), static_cast<Eigen::Index>(keep.size()));
  out.column_names.reserve(keep.size());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    out.values.col(static_cast<Eigen::Index>(i)) = values.col(keep[i]);
    out.column_names.push_back(column_names[static_cast<std::size_t>(keep[i])]);
  }
  return out;
}

DesignMatrix encode_covariates(const Cohort& c, const EncodingSpec& spec) {
  const std::size_t n = c.subjects.size();
  if (n == 0) throw EncodingError("encode_covariates: empty cohort");

  DesignMatrix m;
  m.time.resize(static_cast<Eigen::Index>(n));
  m.event.resize(n);
  m.censoring.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    m.time[static_cast<Eigen::Index>(i)] = c.subjects[i].time;
    m.event[i] = c.subjects[i].event ? 1 : 0;
    m.censoring[i] = c.subjects[i].censoring_kind;
  }

  std::vector<Eigen::VectorXd> columns;
  std::vector<std::string> names;

  for (const auto& feature : spec.categorical) {
    // observed levels (or the frozen set)
    std::set<std::string> levels;
    auto frozen = spec.frozen_levels.find(feature);
    if (frozen != spec.frozen_levels.end())
      levels.insert(frozen->second.begin(), frozen->second.end());

    std::vector<const std::string*> value_of(n, nullptr);
    for (std::size_t i = 0; i < n; ++i) {
      const std::string* v = c.subjects[i].categorical_value(feature);
      if (!v)
        throw EncodingError("subject " + c.subjects[i].id + " lacks categorical feature \"" +
                            feature + "\"");
      if (frozen != spec.frozen_levels.end()) {
        if (!levels.count(*v))
          throw EncodingError("unseen level \"" + *v + "\" for frozen feature \"" + feature +
                              "\"");
      } else {
        levels.insert(*v);
      }
      value_of[i] = v;
    }

    auto& dict_levels = m.coding_dictionary.features[feature];
    int code = 0;
    bool first = true;
    for (const auto& level : levels) {  // std::set: lexicographic order
      CodingEntry entry;
      entry.code = code++;
      if (first) {
        first = false;  // base level: dropped column
      } else {
        entry.column = feature + "=" + level;
        Eigen::VectorXd col(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i)
          col[static_cast<Eigen::Index>(i)] = (*value_of[i] == level) ? 1.0 : 0.0;
        columns.push_back(std::move(col));
        names.push_back(entry.column);
      }
      dict_levels[level] = entry;
    }
  }

  for (const auto& feature : spec.numeric) {
    Eigen::VectorXd col(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      auto v = c.subjects[i].numeric_value(feature);
      if (!v)
        throw EncodingError("subject " + c.subjects[i].id + " lacks numeric feature \"" +
                            feature + "\"");
      col[static_cast<Eigen::Index>(i)] = *v;
    }
    columns.push_back(std::move(col));
    names.push_back(feature);
  }

  m.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j)
    m.values.col(static_cast<Eigen::Index>(j)) = columns[j];
  m.column_names = std::move(names);

  return prune_collinear(m).first;
}

std::pair<DesignMatrix, std::vector<std::string>> prune_collinear(const DesignMatrix& m) {
  const Eigen::Index n = m.values.rows();
  const Eigen::Index p = m.values.cols();
  std::vector<bool> drop(static_cast<std::size_t>(p), false);
  std::vector<std::string> dropped;

  auto is_constant = [&](Eigen::Index j) {
    for (Eigen::Index i = 1; i < n; ++i)
      if (m.values(i, j) != m.values(0, j)) return false;
    return true;
  };
  for (Eigen::Index j = 0; j < p; ++j) {
    if (n > 0 && is_constant(j)) {
      drop[static_cast<std::size_t>(j)] = true;
      dropped.push_back(m.column_names[static_cast<std::size_t>(j)]);
    }
  }

  for (Eigen::Index j = 0; j < p; ++j) {
    if (drop[static_cast<std::size_t>(j)]) continue;
    for (Eigen::Index k = 0; k < j; ++k) {
      if (drop[static_cast<std::size_t>(k)]) continue;
      if (m.values.col(j) == m.values.col(k)) {
        drop[static_cast<std::size_t>(j)] = true;
        dropped.push_back(m.column_names[static_cast<std::size_t>(j)]);
        break;
      }
    }
  }

  // Perfect death predictors: binary column, at least one 1, and every row
  // with a 1 has an observed event.
  for (Eigen::Index j = 0; j < p; ++j) {
    if (drop[static_cast<std::size_t>(j)]) continue;
    bool binary = true;
    bool has_one = false;
    bool implies_event = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double v = m.values(i, j);
      if (v != 0.0 && v != 1.0) {
        binary = false;
        break;
      }
      if (v == 1.0) {
        has_one = true;
        if (!m.event[static_cast<std::size_t>(i)]) implies_event = false;
      }
    }
    if (binary && has_one && implies_event) {
      drop[static_cast<std::size_t>(j)] = true;
      dropped.push_back(m.column_names[static_cast<std::size_t>(j)]);
    }
  }

  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = 0; j < p; ++j)
    if (!drop[static_cast<std::size_t>(j)]) keep.push_back(j);

  DesignMatrix out;
  out.coding_dictionary = m.coding_dictionary;
  out.time = m.time;
  out.event = m.event;
  out.censoring = m.censoring;
  out.values.resize(n, static_cast<Eigen::Index>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) {
    out.values.col(static_cast<Eigen::Index>(i)) = m.values.col(keep[i]);
    out.column_names.push_back(m.column_names[static_cast<std::size_t>(keep[i])]);
  }
  return {std::move(out), std::move(dropped)};
}

int split_test_size(int n, double test_fraction) {
  if (!(test_fraction >= 0.0 && test_fraction <= 1.0))
    throw std::invalid_argument("test_fraction outside [0, 1]");
  return static_cast<int>(std::floor(static_cast<double>(n) * test_fraction + 0.5));
}

std::pair<DesignMatrix, DesignMatrix> train_test_split(const DesignMatrix& m,
                                                       double test_fraction,
                                                       std::uint64_t seed) {
  const int n = m.rows();
  const int n_test = split_test_size(n, test_fraction);
  std::vector<int> perm = seeded_permutation(n, seed);

  std::vector<int> test_idx(perm.begin(), perm.begin() + n_test);
  std::vector<int> train_idx(perm.begin() + n_test, perm.end());
  std::sort(test_idx.begin(), test_idx.end());
  std::sort(train_idx.begin(), train_idx.end());

  return {m.select_rows(train_idx), m.select_rows(test_idx)};
}

}  // namespace geosurv
