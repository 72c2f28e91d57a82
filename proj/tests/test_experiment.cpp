#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "geosurv/experiment.hpp"
#include "geosurv/rng.hpp"
#include "geosurv/synth.hpp"
#include "test_util.hpp"

using namespace geosurv;
using namespace geosurv::testutil;

namespace {

// survival data with a real treatment effect plus a pure-noise geo column
DesignMatrix noise_geo_fixture(int n, std::uint64_t seed) {
  Rng rng(seed);
  DesignMatrix m;
  m.values.resize(n, 2);
  m.column_names = {"treatment", "state_esr"};
  m.time.resize(n);
  m.event.resize(static_cast<std::size_t>(n));
  m.censoring.assign(static_cast<std::size_t>(n), CensoringKind::right);
  for (int i = 0; i < n; ++i) {
    const double treat = rng.bernoulli(0.5) ? 1.0 : 0.0;
    m.values(i, 0) = treat;
    m.values(i, 1) = rng.uniform(0.85, 0.99);  // carries no signal
    const double t = rng.exponential(0.04 * std::exp(-0.6 * treat));
    const double c = rng.exponential(0.015);
    m.time[i] = std::min(t, c);
    m.event[static_cast<std::size_t>(i)] = t <= c ? 1 : 0;
  }
  return m;
}

SynthConfig planted_config(int n, std::uint64_t seed) {
  SynthConfig cfg;
  cfg.n_subjects = n;
  cfg.n_states = 3;
  cfg.counties_min = 2;
  cfg.counties_max = 4;
  cfg.true_beta = {{"treatment", -0.5}, {"age", 0.03}};
  cfg.geo_effect_scale = 1.0;
  cfg.censoring_target = 0.4;
  cfg.seed = seed;
  cfg.age_min = 40;
  cfg.age_max = 70;
  cfg.year_min = 2008;
  cfg.year_max = 2010;
  cfg.n_races = 2;
  return cfg;
}

Cohort planted_cohort(const SynthConfig& cfg) {
  const auto tables = generate_tables(cfg);
  auto [cohort, truth] = generate_cohort(cfg, tables);
  auto [with_esr, report] = attach_state_esr(cohort, tables.esr, tables.population, {});
  REQUIRE(report.failures == 0);
  return with_esr;
}

}  // namespace

TEST_CASE("partition into near-equal disjoint subsets covering every row") {
  const auto parts = partition_rows(53522, 30, 7);
  REQUIRE(parts.size() == 30);
  std::map<std::size_t, int> size_counts;
  std::set<int> seen;
  for (const auto& p : parts) {
    ++size_counts[p.size()];
    for (int idx : p) CHECK(seen.insert(idx).second);  // disjoint
  }
  CHECK(seen.size() == 53522);  // union is the full row set
  REQUIRE(size_counts.size() == 2);
  CHECK(size_counts.at(1784) == 28);
  CHECK(size_counts.at(1785) == 2);

  const auto again = partition_rows(53522, 30, 7);
  CHECK(parts == again);  // seeded determinism

  const auto even = partition_rows(900, 30, 7);
  for (const auto& p : even) CHECK(p.size() == 30);
}

TEST_CASE("run_paired_fit keeps the arms isolated") {
  const auto m = noise_geo_fixture(1200, 5);
  ExperimentConfig cfg;
  cfg.geo_feature_names = {"state_esr"};

  const auto r1 = run_paired_fit(m, cfg, 0);
  const std::vector<std::string> other_geo{"treatment"};
  const auto r2 = run_paired_fit(m, cfg, 0, &other_geo);
  CHECK(r1.c_with == r2.c_with);  // the with-geo arm ignores the geo list
  CHECK(r1.c_without != r2.c_without);
  CHECK(r1.diff == doctest::Approx(r1.c_with - r1.c_without).epsilon(1e-15));
  CHECK(r1.rows == 1200);
}

TEST_CASE("noise geo column moves the c-index less than a point") {
  ExperimentConfig cfg;
  cfg.geo_feature_names = {"state_esr"};
  const auto r = run_paired_fit(noise_geo_fixture(5000, 8), cfg, 0);
  CHECK(std::fabs(r.diff) < 0.01);
}

TEST_CASE("absent geo columns make the arms identical") {
  auto m = noise_geo_fixture(800, 9);
  ExperimentConfig cfg;
  cfg.geo_feature_names = {"not_present"};
  const auto r = run_paired_fit(m, cfg, 0);
  CHECK(r.diff == 0.0);
}

TEST_CASE("run_subset_ttest assembles the report invariants") {
  const auto m = noise_geo_fixture(3000, 12);
  ExperimentConfig cfg;
  cfg.geo_feature_names = {"state_esr"};
  cfg.n_subsets = 10;
  const auto report = run_subset_ttest(m, cfg, "fixture");
  REQUIRE(static_cast<int>(report.per_subset.size()) == cfg.n_subsets);
  double sum = 0.0;
  int rows = 0;
  for (const auto& s : report.per_subset) {
    sum += s.diff;
    rows += s.rows;
  }
  CHECK(rows == 3000);
  CHECK(report.avg_improvement == doctest::Approx(sum / cfg.n_subsets).epsilon(1e-12));
  CHECK(report.ci.lo <= report.ci.hi);
  CHECK(report.dataset_name == "fixture");
}

TEST_CASE("too few rows or degenerate subsets raise errors") {
  const auto m = noise_geo_fixture(500, 3);
  ExperimentConfig cfg;
  cfg.n_subsets = 30;  // needs 900 rows
  CHECK_THROWS_AS(run_subset_ttest(m, cfg), std::invalid_argument);

  // a single event in the whole dataset cannot seed 10 viable subsets
  auto degenerate = noise_geo_fixture(1000, 4);
  std::fill(degenerate.event.begin(), degenerate.event.end(), 0);
  degenerate.event[0] = 1;
  ExperimentConfig cfg2;
  cfg2.n_subsets = 10;
  cfg2.geo_feature_names = {"state_esr"};
  CHECK_THROWS_AS(run_subset_ttest(degenerate, cfg2), DegenerateSubsetError);
}

TEST_CASE("statewise run produces one report per state plus Overall") {
  SynthConfig scfg = planted_config(4000, 31);
  scfg.n_states = 5;
  const Cohort cohort = planted_cohort(scfg);

  EncodingSpec spec = synth_encoding_spec(false);
  spec.numeric.push_back("state_esr");
  ExperimentConfig cfg;
  cfg.n_subsets = 5;
  cfg.min_dataset_rows = 300;
  cfg.bootstrap_replicates = 200;

  const auto result = run_statewise(cohort, spec, cfg);
  REQUIRE(result.reports.size() == 6);  // Overall + 5 states
  CHECK(result.reports[0].dataset_name == "Overall");
  CHECK(result.skipped.empty());
  for (std::size_t i = 2; i < result.reports.size(); ++i)
    CHECK(result.reports[i - 1].dataset_name < result.reports[i].dataset_name);
}

TEST_CASE("single-state cohorts yield a state report and an Overall report") {
  SynthConfig scfg = planted_config(1500, 77);
  scfg.n_states = 1;
  const Cohort cohort = planted_cohort(scfg);
  EncodingSpec spec = synth_encoding_spec(false);
  spec.numeric.push_back("state_esr");
  ExperimentConfig cfg;
  cfg.n_subsets = 4;
  cfg.min_dataset_rows = 200;
  cfg.bootstrap_replicates = 200;
  const auto result = run_statewise(cohort, spec, cfg);
  REQUIRE(result.reports.size() == 2);
  CHECK(result.reports[0].dataset_name == "Overall");
}

TEST_CASE("row order of the cohort does not change the reports") {
  SynthConfig scfg = planted_config(2400, 13);
  const Cohort cohort = planted_cohort(scfg);
  Cohort permuted = cohort;
  seeded_shuffle(permuted.subjects, 5150);

  EncodingSpec spec = synth_encoding_spec(false);
  spec.numeric.push_back("state_esr");
  ExperimentConfig cfg;
  cfg.n_subsets = 4;
  cfg.min_dataset_rows = 200;
  cfg.bootstrap_replicates = 100;

  TempDir tmp;
  emit_report(run_statewise(cohort, spec, cfg).reports, tmp.file("a.csv"));
  emit_report(run_statewise(permuted, spec, cfg).reports, tmp.file("b.csv"));
  CHECK(read_file(tmp.file("a.csv")) == read_file(tmp.file("b.csv")));
}

TEST_CASE("parallel statewise execution equals sequential") {
  SynthConfig scfg = planted_config(3000, 19);
  const Cohort cohort = planted_cohort(scfg);
  EncodingSpec spec = synth_encoding_spec(false);
  spec.numeric.push_back("state_esr");
  ExperimentConfig cfg;
  cfg.n_subsets = 4;
  cfg.min_dataset_rows = 200;
  cfg.bootstrap_replicates = 100;

  ExperimentConfig seq = cfg;
  seq.jobs = 1;
  ExperimentConfig par = cfg;
  par.jobs = 4;
  TempDir tmp;
  emit_report(run_statewise(cohort, spec, seq).reports, tmp.file("seq.csv"));
  emit_report(run_statewise(cohort, spec, par).reports, tmp.file("par.csv"));
  CHECK(read_file(tmp.file("seq.csv")) == read_file(tmp.file("par.csv")));
}

TEST_CASE("small states are skipped with a reason") {
  SynthConfig scfg = planted_config(1000, 23);
  scfg.n_states = 2;
  Cohort cohort = planted_cohort(scfg);
  // shrink one state below the threshold
  Cohort trimmed;
  int kept = 0;
  for (const auto& s : cohort.subjects) {
    if (s.state == "S02" && ++kept > 50) continue;
    trimmed.subjects.push_back(s);
  }
  EncodingSpec spec = synth_encoding_spec(false);
  spec.numeric.push_back("state_esr");
  ExperimentConfig cfg;
  cfg.n_subsets = 4;
  cfg.min_dataset_rows = 200;
  cfg.bootstrap_replicates = 100;
  const auto result = run_statewise(trimmed, spec, cfg);
  REQUIRE(result.skipped.size() == 1);
  CHECK(result.skipped[0].first == "S02");
  CHECK(result.reports.size() == 2);  // Overall + S01
}

TEST_CASE("emit_report layout and numeric round-trip") {
  TempDir tmp;
  emit_report({}, tmp.file("empty.csv"));
  CHECK(read_file(tmp.file("empty.csv")) ==
        "dataset_name,rows_per_subset,t_statistic,p_value,ci_lo,ci_hi,avg_c_index_improvement\n");

  std::vector<ExperimentReport> reports;
  Rng rng(2);
  for (int i = 0; i < 11; ++i) {
    ExperimentReport r;
    r.dataset_name = i == 0 ? "Overall" : "S" + std::to_string(i);
    for (int k = 0; k < 7; ++k) {
      PairedRunResult s;
      s.subset_id = k;
      s.rows = 100 + (k < 3 ? 1 : 0);
      s.c_with = rng.uniform(0.6, 0.8);
      s.c_without = rng.uniform(0.6, 0.8);
      s.diff = s.c_with - s.c_without;
      r.per_subset.push_back(s);
    }
    r.t = rng.normal(0, 3);
    r.p = rng.uniform01();
    r.ci = {rng.uniform(-0.01, 0.0), rng.uniform(0.0, 0.02), 0.95, 2000};
    r.avg_improvement = rng.uniform(-0.01, 0.02);
    reports.push_back(r);
  }
  emit_report(reports, tmp.file("report.csv"));
  const auto rows = read_report(tmp.file("report.csv"));
  REQUIRE(rows.size() == 11);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].dataset_name == reports[i].dataset_name);
    CHECK(rows[i].rows_per_subset == 100);  // modal size
    CHECK(rows[i].t_statistic == reports[i].t);  // full printed precision
    CHECK(rows[i].p_value == reports[i].p);
    CHECK(rows[i].ci_lo == reports[i].ci.lo);
    CHECK(rows[i].ci_hi == reports[i].ci.hi);
    CHECK(rows[i].avg_c_index_improvement == reports[i].avg_improvement);
  }

  write_per_subset_csv(reports, tmp.file("per_subset.csv"));
  const auto rebuilt = reports_from_per_subset_csv(tmp.file("per_subset.csv"), 0.95, 200, 7);
  REQUIRE(rebuilt.size() == 11);
  CHECK(rebuilt[0].per_subset.size() == 7);
  double diff_sum = 0.0;
  for (const auto& s : reports[3].per_subset) diff_sum += s.diff;
  CHECK(rebuilt[3].avg_improvement == doctest::Approx(diff_sum / 7.0).epsilon(1e-12));
}

TEST_CASE("planted geographic signal is detected") {
  SynthConfig scfg = planted_config(6000, 41);
  scfg.geo_effect_scale = 1.2;
  const Cohort cohort = planted_cohort(scfg);
  EncodingSpec spec = synth_encoding_spec(true);
  spec.numeric.push_back("state_esr");
  const auto m = encode_covariates(cohort, spec);

  ExperimentConfig cfg;
  cfg.geo_feature_names = {"state_esr", "reporting_source", "state"};
  cfg.n_subsets = 10;
  cfg.bootstrap_replicates = 500;
  const auto report = run_subset_ttest(m, cfg, "planted");
  CHECK(report.avg_improvement > 0.0);
  CHECK(report.p < 0.05);
  CHECK(report.t > 0.0);
  int positive = 0;
  for (const auto& s : report.per_subset) positive += s.diff > 0 ? 1 : 0;
  CHECK(positive >= 8);  // diff > 0 in >= 80% of subsets
}
