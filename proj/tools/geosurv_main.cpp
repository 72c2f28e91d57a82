#include <CLI11.hpp>

#include <cstdint>
#include <optional>
#include <string>

#include "geosurv/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"geosurv: survival analysis with geographic public-health features"};
  app.require_subcommand(1);

  std::string config_path, out_dir = ".";
  std::optional<std::uint64_t> seed_override;

  auto* synth = app.add_subcommand("synth", "generate a synthetic cohort and life tables");
  synth->add_option("--config", config_path, "synth config (JSON)")->required();
  synth->add_option("--out", out_dir, "output directory");
  std::uint64_t seed_value = 0;
  auto* seed_opt = synth->add_option("--seed", seed_value, "override the config seed");

  std::string cohort_path, schema_path, population_path, esr_path;
  std::string fallback = "renormalize", on_error = "drop";
  auto* features = app.add_subcommand("features", "attach the state_esr covariate to a cohort");
  features->add_option("--cohort", cohort_path, "cohort CSV")->required();
  features->add_option("--schema", schema_path, "schema JSON")->required();
  features->add_option("--population", population_path, "population table CSV")->required();
  features->add_option("--esr", esr_path, "expected survival table CSV")->required();
  features->add_option("--out", out_dir, "output directory");
  features->add_option("--fallback", fallback, "missing esr cell policy: renormalize|nearest-age");
  features->add_option("--on-error", on_error, "per-subject failure policy: drop|abort");

  auto* fit = app.add_subcommand("fit", "fit a cox or weibull model on a cohort");
  fit->add_option("--config", config_path, "fit config (JSON)")->required();
  fit->add_option("--out", out_dir, "output directory");

  std::string model_path;
  auto* eval = app.add_subcommand("eval", "evaluate a fitted model's c-index on a cohort");
  eval->add_option("--model", model_path, "model JSON")->required();
  eval->add_option("--cohort", cohort_path, "cohort CSV")->required();
  eval->add_option("--schema", schema_path, "schema JSON")->required();
  eval->add_option("--out", out_dir, "output directory");

  geosurv::ExperimentOverrides overrides;
  std::uint64_t split_seed_value = 0, subset_seed_value = 0;
  int jobs_value = 0;
  auto* experiment = app.add_subcommand("experiment", "run the full paired-fit protocol");
  experiment->add_option("--config", config_path, "experiment config (JSON)")->required();
  experiment->add_option("--out", out_dir, "output directory");
  auto* split_opt = experiment->add_option("--split-seed", split_seed_value, "override split seed");
  auto* subset_opt =
      experiment->add_option("--subset-seed", subset_seed_value, "override subset seed");
  auto* jobs_opt = experiment->add_option("--jobs", jobs_value, "max parallel state tasks");

  std::string per_subset_path;
  double ci_level = 0.95;
  int replicates = 2000;
  std::uint64_t report_seed = 404;
  auto* report = app.add_subcommand("report", "recompute report.csv from a per-subset CSV");
  report->add_option("--per-subset", per_subset_path, "per_subset.csv from a previous run")
      ->required();
  report->add_option("--out", out_dir, "output directory");
  report->add_option("--ci-level", ci_level, "bootstrap confidence level");
  report->add_option("--replicates", replicates, "bootstrap replicates");
  report->add_option("--seed", report_seed, "bootstrap seed");

  CLI11_PARSE(app, argc, argv);

  if (synth->parsed()) {
    if (seed_opt->count() > 0) seed_override = seed_value;
    return geosurv::cmd_synth(config_path, out_dir, seed_override);
  }
  if (features->parsed())
    return geosurv::cmd_features(cohort_path, schema_path, population_path, esr_path, out_dir,
                                 fallback, on_error);
  if (fit->parsed()) return geosurv::cmd_fit(config_path, out_dir);
  if (eval->parsed()) return geosurv::cmd_eval(model_path, cohort_path, schema_path, out_dir);
  if (experiment->parsed()) {
    if (split_opt->count() > 0) overrides.split_seed = split_seed_value;
    if (subset_opt->count() > 0) overrides.subset_seed = subset_seed_value;
    if (jobs_opt->count() > 0) overrides.jobs = jobs_value;
    return geosurv::cmd_experiment(config_path, out_dir, overrides);
  }
  if (report->parsed())
    return geosurv::cmd_report(per_subset_path, out_dir, ci_level, replicates, report_seed);
  return 1;
}
