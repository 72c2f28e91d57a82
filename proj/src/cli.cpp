#include "geosurv/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <nlohmann/json.hpp>

#include "geosurv/csv.hpp"
#include "geosurv/data_model.hpp"
#include "geosurv/estimators.hpp"
#include "geosurv/experiment.hpp"
#include "geosurv/geo_features.hpp"
#include "geosurv/metrics.hpp"
#include "geosurv/rng.hpp"
#include "geosurv/synth.hpp"

namespace geosurv {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void ensure_dir(const std::string& dir) {
  if (!dir.empty()) fs::create_directories(dir);
}

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw std::runtime_error("config parse error in " + path + ": " + e.what());
  }
}

FallbackPolicy parse_policy(const std::string& fallback, const std::string& on_error) {
  FallbackPolicy policy;
  if (fallback == "renormalize")
    policy.missing_cell = FallbackPolicy::MissingCell::renormalize;
  else if (fallback == "nearest-age" || fallback == "nearest_age")
    policy.missing_cell = FallbackPolicy::MissingCell::nearest_age;
  else
    throw std::runtime_error("unknown fallback policy: " + fallback);
  if (on_error == "drop")
    policy.on_error = FallbackPolicy::OnSubjectError::drop_row;
  else if (on_error == "abort")
    policy.on_error = FallbackPolicy::OnSubjectError::abort_run;
  else
    throw std::runtime_error("unknown on-error policy: " + on_error);
  return policy;
}

int fail(const std::string& msg) {
  std::cerr << "error: " << msg << "\n";
  return 1;
}

}  // namespace

int cmd_synth(const std::string& config_path, const std::string& out_dir,
              std::optional<std::uint64_t> seed_override) {
  try {
    SynthConfig cfg = load_synth_config(config_path);
    if (seed_override) cfg.seed = *seed_override;
    ensure_dir(out_dir);

    const SynthTables tables = generate_tables(cfg);
    auto [cohort, truth] = generate_cohort(cfg, tables);

    write_cohort_csv(cohort, join(out_dir, "cohort.csv"));
    write_tables_csv(tables, cfg, join(out_dir, "population.csv"), join(out_dir, "esr.csv"));
    write_truth_json(join(out_dir, "truth.json"), cfg, tables, truth);
    write_cohort_schema(join(out_dir, "cohort_schema.json"));

    std::cout << "synth: " << cohort.size() << " subjects, " << truth.events << " events ("
              << format_double(100.0 * (1.0 - truth.realized_censoring)) << "%), censoring "
              << format_double(truth.realized_censoring) << " -> " << out_dir << "\n";
    return 0;
  } catch (const std::exception& e) {
    return fail(e.what());
  }
}

int cmd_features(const std::string& cohort_path, const std::string& schema_path,
                 const std::string& population_path, const std::string& esr_path,
                 const std::string& out_dir, const std::string& fallback,
                 const std::string& on_error) {
  try {
    const ColumnSchema schema = load_schema(schema_path);
    LoadResult loaded = load_cohort(cohort_path, schema);
    for (const auto& e : loaded.errors)
      std::cerr << "row " << e.row << ": " << e.message << "\n";

    const PopulationTable pop = load_population_table(population_path);
    const ExpectedSurvivalTable esr = load_esr_table(esr_path);
    const FallbackPolicy policy = parse_policy(fallback, on_error);
    ensure_dir(out_dir);

    Cohort with_esr;
    AttachReport report;
    bool aborted = false;
    try {
      std::tie(with_esr, report) = attach_state_esr(loaded.cohort, esr, pop, policy);
    } catch (const AttachAbortedError& e) {
      report = e.report;
      aborted = true;
      std::cerr << e.what() << "\n";
    }
    write_attach_report(join(out_dir, "attach_report.csv"), report);
    if (aborted) return 1;

    // original columns plus the state_esr covariate
    CsvTable src = read_csv(cohort_path);
    CsvTable out = src;
    out.header.push_back("state_esr");
    std::map<std::string, double> esr_by_id;
    for (const auto& s : with_esr.subjects) esr_by_id[s.id] = s.numeric_covariates.at("state_esr");
    const int id_col = src.column_index(schema.roles.count("id") ? schema.roles.at("id") : "id");
    CsvTable filtered;
    filtered.header = out.header;
    int row_no = 0;
    for (auto& row : out.rows) {
      ++row_no;
      const std::string id =
          id_col >= 0 ? row[static_cast<std::size_t>(id_col)] : "row" + std::to_string(row_no);
      auto it = esr_by_id.find(id);
      if (it == esr_by_id.end()) continue;  // dropped by attach or load
      row.push_back(format_double(it->second));
      filtered.rows.push_back(row);
    }
    write_csv(join(out_dir, "cohort_with_esr.csv"), filtered);

    std::cout << "features: " << with_esr.size() << " subjects with state_esr, "
              << report.failures << " failures -> " << out_dir << "\n";
    return 0;
  } catch (const std::exception& e) {
    return fail(e.what());
  }
}

namespace {

struct FitConfig {
  std::string cohort;
  std::string schema;
  EncodingSpec encoding;
  std::vector<std::string> required_covariates;
  double penalizer = 1e-4;
  std::string model = "cox";  // cox | weibull
  TieRule ties = TieRule::efron;
};

FitConfig parse_fit_config(const json& j, const std::string& base_dir) {
  FitConfig cfg;
  auto resolve = [&base_dir](const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? p : (fs::path(base_dir) / path).string();
  };
  cfg.cohort = resolve(j.at("cohort").get<std::string>());
  cfg.schema = resolve(j.at("schema").get<std::string>());
  if (j.contains("categorical"))
    cfg.encoding.categorical = j["categorical"].get<std::vector<std::string>>();
  if (j.contains("numeric")) cfg.encoding.numeric = j["numeric"].get<std::vector<std::string>>();
  if (j.contains("required_covariates"))
    cfg.required_covariates = j["required_covariates"].get<std::vector<std::string>>();
  cfg.penalizer = j.value("penalizer", cfg.penalizer);
  cfg.model = j.value("model", cfg.model);
  if (j.value("tie_rule", "efron") == "breslow") cfg.ties = TieRule::breslow;
  return cfg;
}

}  // namespace

int cmd_fit(const std::string& config_path, const std::string& out_dir) {
  try {
    const json j = read_json_file(config_path);
    const FitConfig cfg = parse_fit_config(j, fs::path(config_path).parent_path().string());
    ensure_dir(out_dir);

    const ColumnSchema schema = load_schema(cfg.schema);
    LoadResult loaded = load_cohort(cfg.cohort, schema);
    for (const auto& e : loaded.errors)
      std::cerr << "row " << e.row << ": " << e.message << "\n";

    CleaningRules rules;
    rules.required_covariates = cfg.required_covariates;
    auto [cleaned, report] = clean_cohort(loaded.cohort, rules);
    write_cleaning_report(join(out_dir, "cleaning_report.csv"), report);

    const DesignMatrix m = encode_covariates(cleaned, cfg.encoding);
    write_coding_dictionary(join(out_dir, "coding_dictionary.json"), m.coding_dictionary);

    if (cfg.model == "cox") {
      const CoxModel model = cox_fit(m, cfg.penalizer, cfg.ties);
      if (!model.converged) std::cerr << "warning: cox fit did not converge\n";
      write_cox_model(join(out_dir, "model.json"), model);
      write_coefficient_table(join(out_dir, "coefficients.csv"), model.column_names, model.beta);
      std::cout << "fit: cox on " << m.rows() << " rows, " << m.cols() << " columns, loglik "
                << format_double(model.final_loglik) << " -> " << out_dir << "\n";
    } else if (cfg.model == "weibull") {
      const WeibullPhModel model = weibull_ph_fit(m);
      if (!model.converged) std::cerr << "warning: weibull fit did not converge\n";
      write_weibull_model(join(out_dir, "model.json"), model);
      write_coefficient_table(join(out_dir, "coefficients.csv"), model.column_names, model.beta);
      std::cout << "fit: weibull on " << m.rows() << " rows (shape "
                << format_double(model.shape) << ", scale " << format_double(model.scale)
                << ") -> " << out_dir << "\n";
    } else {
      return fail("unknown model kind: " + cfg.model);
    }
    return 0;
  } catch (const std::exception& e) {
    return fail(e.what());
  }
}

int cmd_eval(const std::string& model_path, const std::string& cohort_path,
             const std::string& schema_path, const std::string& out_dir) {
  try {
    const CoxModel model = read_cox_model(model_path);
    const ColumnSchema schema = load_schema(schema_path);
    LoadResult loaded = load_cohort(cohort_path, schema);

    // rebuild the design matrix against the model's column set; indicator
    // columns are "feature=level", everything else is numeric
    EncodingSpec spec;
    std::vector<std::string> catset;
    for (const auto& name : model.column_names) {
      const auto eq = name.find('=');
      if (eq == std::string::npos) {
        spec.numeric.push_back(name);
      } else {
        const std::string feat = name.substr(0, eq);
        if (std::find(catset.begin(), catset.end(), feat) == catset.end()) catset.push_back(feat);
      }
    }
    spec.categorical = catset;
    const DesignMatrix raw = encode_covariates(loaded.cohort, spec);

    // align columns with the model (missing indicator -> all zeros)
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(raw.values.rows(),
                                              static_cast<Eigen::Index>(model.column_names.size()));
    for (std::size_t j = 0; j < model.column_names.size(); ++j) {
      const int src = raw.column_index(model.column_names[j]);
      if (src >= 0) x.col(static_cast<Eigen::Index>(j)) = raw.values.col(src);
    }
    const Eigen::VectorXd risk_e = (x * model.beta).array().exp();
    const std::vector<double> risk(risk_e.data(), risk_e.data() + risk_e.size());
    const std::vector<double> time(raw.time.data(), raw.time.data() + raw.time.size());
    const CIndexResult c = concordance_index(time, raw.event, risk);

    if (!out_dir.empty()) {
      ensure_dir(out_dir);
      json out;
      out["schema_version"] = 1;
      out["c_index"] = c.c;
      out["comparable_pairs"] = c.num;
      out["concordant"] = c.concordant;
      out["tied_score"] = c.tied_score;
      out["discordant"] = c.discordant;
      std::ofstream f(join(out_dir, "eval.json"));
      f << out.dump(2) << '\n';
    }
    std::cout << "eval: c-index " << format_double(c.c) << " over " << c.num
              << " comparable pairs\n";
    return 0;
  } catch (const std::exception& e) {
    return fail(e.what());
  }
}

namespace {

struct ExperimentFileConfig {
  std::string cohort;
  std::string schema;
  std::string population;  // optional
  std::string esr;         // optional
  EncodingSpec encoding;
  std::vector<std::string> required_covariates;
  ExperimentConfig exp;
  std::string fallback = "renormalize";
  std::string on_error = "drop";
  json raw;
};

ExperimentFileConfig parse_experiment_config(const std::string& path) {
  const json j = read_json_file(path);
  const std::string base_dir = fs::path(path).parent_path().string();
  auto resolve = [&base_dir](const std::string& p) {
    fs::path fp(p);
    return fp.is_absolute() ? p : (fs::path(base_dir) / fp).string();
  };

  ExperimentFileConfig cfg;
  cfg.raw = j;
  cfg.cohort = resolve(j.at("cohort").get<std::string>());
  cfg.schema = resolve(j.at("schema").get<std::string>());
  if (j.contains("population")) cfg.population = resolve(j["population"].get<std::string>());
  if (j.contains("esr")) cfg.esr = resolve(j["esr"].get<std::string>());
  if (j.contains("categorical"))
    cfg.encoding.categorical = j["categorical"].get<std::vector<std::string>>();
  if (j.contains("numeric")) cfg.encoding.numeric = j["numeric"].get<std::vector<std::string>>();
  if (j.contains("required_covariates"))
    cfg.required_covariates = j["required_covariates"].get<std::vector<std::string>>();

  ExperimentConfig& e = cfg.exp;
  if (j.contains("geo_features"))
    e.geo_feature_names = j["geo_features"].get<std::vector<std::string>>();
  if (j.contains("overall_extra_geo"))
    e.overall_extra_geo = j["overall_extra_geo"].get<std::vector<std::string>>();
  e.test_fraction = j.value("test_fraction", e.test_fraction);
  e.split_seed = j.value("split_seed", e.split_seed);
  e.penalizer = j.value("penalizer", e.penalizer);
  e.n_subsets = j.value("n_subsets", e.n_subsets);
  e.subset_seed = j.value("subset_seed", e.subset_seed);
  e.ci_level = j.value("ci_level", e.ci_level);
  e.bootstrap_replicates = j.value("bootstrap_replicates", e.bootstrap_replicates);
  e.min_dataset_rows = j.value("min_state_rows", e.min_dataset_rows);
  if (j.value("model", "cox") == "weibull") e.model_kind = ModelKind::weibull;
  if (j.value("tie_rule", "efron") == "breslow") e.ties = TieRule::breslow;
  cfg.fallback = j.value("fallback", cfg.fallback);
  cfg.on_error = j.value("on_error", cfg.on_error);
  return cfg;
}

}  // namespace

int cmd_experiment(const std::string& config_path, const std::string& out_dir,
                   const ExperimentOverrides& overrides) {
  try {
    ExperimentFileConfig cfg = parse_experiment_config(config_path);
    if (overrides.split_seed) cfg.exp.split_seed = *overrides.split_seed;
    if (overrides.subset_seed) cfg.exp.subset_seed = *overrides.subset_seed;
    if (overrides.jobs) cfg.exp.jobs = *overrides.jobs;
    ensure_dir(out_dir);

    const ColumnSchema schema = load_schema(cfg.schema);
    LoadResult loaded = load_cohort(cfg.cohort, schema);
    for (const auto& e : loaded.errors)
      std::cerr << "row " << e.row << ": " << e.message << "\n";

    CleaningRules rules;
    rules.required_covariates = cfg.required_covariates;
    auto [cleaned, clean_report] = clean_cohort(loaded.cohort, rules);
    write_cleaning_report(join(out_dir, "cleaning_report.csv"), clean_report);

    Cohort cohort = std::move(cleaned);
    if (!cfg.population.empty() && !cfg.esr.empty()) {
      const PopulationTable pop = load_population_table(cfg.population);
      const ExpectedSurvivalTable esr = load_esr_table(cfg.esr);
      const FallbackPolicy policy = parse_policy(cfg.fallback, cfg.on_error);
      auto [with_esr, attach_report] = attach_state_esr(cohort, esr, pop, policy, cfg.exp.jobs);
      write_attach_report(join(out_dir, "attach_report.csv"), attach_report);
      cohort = std::move(with_esr);
      if (std::find(cfg.encoding.numeric.begin(), cfg.encoding.numeric.end(), "state_esr") ==
          cfg.encoding.numeric.end())
        cfg.encoding.numeric.push_back("state_esr");
    }

    const StatewiseResult result = run_statewise(cohort, cfg.encoding, cfg.exp);
    for (const auto& [name, reason] : result.skipped)
      std::cerr << "skipped " << name << ": " << reason << "\n";

    emit_report(result.reports, join(out_dir, "report.csv"));
    write_per_subset_csv(result.reports, join(out_dir, "per_subset.csv"));

    // reproducibility manifest: config echo, derived seeds, versions
    json manifest;
    manifest["schema_version"] = 1;
    manifest["tool_version"] = kToolVersion;
    manifest["config"] = cfg.raw;
    manifest["config_path"] = config_path;
    char hash_hex[32];
    std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                  static_cast<unsigned long long>(fnv1a(cfg.raw.dump())));
    manifest["config_hash"] = hash_hex;
    manifest["split_seed"] = cfg.exp.split_seed;
    manifest["subset_seed"] = cfg.exp.subset_seed;
    json seeds = json::object();
    for (const auto& r : result.reports)
      seeds[r.dataset_name] = mix_seed(cfg.exp.subset_seed, fnv1a(r.dataset_name));
    manifest["derived_subset_seeds"] = seeds;
    json skipped = json::array();
    for (const auto& [name, reason] : result.skipped)
      skipped.push_back({{"dataset", name}, {"reason", reason}});
    manifest["skipped"] = skipped;
    manifest["outputs"] = {"report.csv", "per_subset.csv", "cleaning_report.csv"};
    std::ofstream mf(join(out_dir, "manifest.json"));
    mf << manifest.dump(2) << '\n';

    std::cout << "experiment: " << result.reports.size() << " dataset(s), "
              << result.skipped.size() << " skipped -> " << out_dir << "\n";
    return 0;
  } catch (const std::exception& e) {
    return fail(e.what());
  }
}

int cmd_report(const std::string& per_subset_path, const std::string& out_dir, double ci_level,
               int replicates, std::uint64_t seed) {
  try {
    ensure_dir(out_dir);
    const auto reports = reports_from_per_subset_csv(per_subset_path, ci_level, replicates, seed);
    emit_report(reports, join(out_dir, "report.csv"));
    std::cout << "report: " << reports.size() << " dataset(s) -> " << out_dir << "\n";
    return 0;
  } catch (const std::exception& e) {
    return fail(e.what());
  }
}

}  // namespace geosurv
