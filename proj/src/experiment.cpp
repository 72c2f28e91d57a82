#include "geosurv/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>

#include "geosurv/csv.hpp"
#include "geosurv/metrics.hpp"
#include "geosurv/rng.hpp"

namespace geosurv {

int ExperimentReport::rows_per_subset_mode() const {
  std::map<int, int> counts;
  for (const auto& r : per_subset) ++counts[r.rows];
  int best_size = 0, best_count = -1;
  for (const auto& [size, count] : counts) {
    if (count > best_count) {
      best_size = size;
      best_count = count;
    }
  }
  return best_size;
}

std::vector<std::vector<int>> partition_rows(int n_rows, int n_subsets, std::uint64_t seed) {
  if (n_subsets < 1) throw std::invalid_argument("partition_rows: n_subsets must be >= 1");
  if (n_rows < n_subsets) throw std::invalid_argument("partition_rows: fewer rows than subsets");
  std::vector<int> perm = seeded_permutation(n_rows, seed);
  const int base = n_rows / n_subsets;
  const int remainder = n_rows % n_subsets;
  std::vector<std::vector<int>> subsets(static_cast<std::size_t>(n_subsets));
  int pos = 0;
  for (int k = 0; k < n_subsets; ++k) {
    const int size = base + (k < remainder ? 1 : 0);
    auto& subset = subsets[static_cast<std::size_t>(k)];
    subset.assign(perm.begin() + pos, perm.begin() + pos + size);
    std::sort(subset.begin(), subset.end());
    pos += size;
  }
  return subsets;
}

namespace {

Eigen::VectorXd arm_risk_scores(const DesignMatrix& train, const DesignMatrix& test,
                                const ExperimentConfig& cfg) {
  if (cfg.model_kind == ModelKind::cox) {
    CoxModel model = cox_fit(train, cfg.penalizer, cfg.ties);
    return cox_risk_scores(model, test);
  }
  WeibullPhModel model = weibull_ph_fit(train);
  return weibull_risk_scores(model, test);
}

double arm_c_index(const DesignMatrix& train, const DesignMatrix& test,
                   const ExperimentConfig& cfg) {
  const Eigen::VectorXd risk = arm_risk_scores(train, test, cfg);
  const std::vector<double> risk_v(risk.data(), risk.data() + risk.size());
  const std::vector<double> time_v(test.time.data(), test.time.data() + test.time.size());
  return concordance_index(time_v, test.event, risk_v).c;
}

}  // namespace

PairedRunResult run_paired_fit(const DesignMatrix& m, const ExperimentConfig& cfg, int subset_id,
                               const std::vector<std::string>* geo_override) {
  const std::vector<std::string>& geo = geo_override ? *geo_override : cfg.geo_feature_names;
  const std::uint64_t split_seed = mix_seed(cfg.split_seed, static_cast<std::uint64_t>(subset_id));
  auto [train, test] = train_test_split(m, cfg.test_fraction, split_seed);

  PairedRunResult result;
  result.subset_id = subset_id;
  result.rows = m.rows();
  try {
    result.c_with = arm_c_index(train, test, cfg);
  } catch (const std::exception& e) {
    throw std::runtime_error("subset " + std::to_string(subset_id) + " arm=with_geo: " + e.what());
  }
  try {
    result.c_without = arm_c_index(train.drop_columns(geo), test.drop_columns(geo), cfg);
  } catch (const std::exception& e) {
    throw std::runtime_error("subset " + std::to_string(subset_id) +
                             " arm=without_geo: " + e.what());
  }
  result.diff = c_index_diff(result.c_with, result.c_without);
  return result;
}

namespace {

// non-degenerate: >= 1 event in train and >= 1 comparable pair in test
bool subset_viable(const DesignMatrix& m, const std::vector<int>& rows,
                   const ExperimentConfig& cfg, int subset_id) {
  const DesignMatrix subset = m.select_rows(rows);
  const std::uint64_t seed = mix_seed(cfg.split_seed, static_cast<std::uint64_t>(subset_id));
  auto [train, test] = train_test_split(subset, cfg.test_fraction, seed);
  if (train.event_count() == 0) return false;
  double min_event_time = std::numeric_limits<double>::infinity();
  double max_time = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < test.rows(); ++i) {
    max_time = std::max(max_time, test.time[i]);
    if (test.event[static_cast<std::size_t>(i)])
      min_event_time = std::min(min_event_time, test.time[i]);
  }
  return min_event_time < max_time;
}

}  // namespace

ExperimentReport run_subset_ttest(const DesignMatrix& m, const ExperimentConfig& cfg,
                                  const std::string& dataset_name,
                                  const std::vector<std::string>* geo_override) {
  if (cfg.n_subsets < 2) throw std::invalid_argument("run_subset_ttest: n_subsets must be >= 2");
  if (m.rows() < cfg.effective_min_rows())
    throw std::invalid_argument("run_subset_ttest: dataset " + dataset_name + " has " +
                                std::to_string(m.rows()) + " rows, needs >= " +
                                std::to_string(cfg.effective_min_rows()));

  auto viable = [&](const std::vector<std::vector<int>>& parts) {
    for (int k = 0; k < cfg.n_subsets; ++k)
      if (!subset_viable(m, parts[static_cast<std::size_t>(k)], cfg, k)) return false;
    return true;
  };

  std::vector<std::vector<int>> parts = partition_rows(m.rows(), cfg.n_subsets, cfg.subset_seed);
  if (!viable(parts)) {
    // one reseeded redraw of the whole partition, then a hard error: silently
    // skipping a subset would change the paired test's n
    parts = partition_rows(m.rows(), cfg.n_subsets, mix_seed(cfg.subset_seed, fnv1a("redraw")));
    if (!viable(parts))
      throw DegenerateSubsetError("run_subset_ttest: dataset " + dataset_name +
                                  " still has a degenerate subset after one redraw");
  }

  ExperimentReport report;
  report.dataset_name = dataset_name;
  report.per_subset.reserve(static_cast<std::size_t>(cfg.n_subsets));
  std::vector<double> with_v, without_v, diffs;
  for (int k = 0; k < cfg.n_subsets; ++k) {
    const DesignMatrix subset = m.select_rows(parts[static_cast<std::size_t>(k)]);
    PairedRunResult r = run_paired_fit(subset, cfg, k, geo_override);
    with_v.push_back(r.c_with);
    without_v.push_back(r.c_without);
    diffs.push_back(r.diff);
    report.per_subset.push_back(r);
  }

  const PairedTTestResult tt = paired_t_test(with_v, without_v);
  report.t = tt.t_statistic;
  report.p = tt.p_value;
  report.ci = bootstrap_ci(diffs, cfg.ci_level, cfg.bootstrap_replicates,
                           mix_seed(cfg.subset_seed, fnv1a("bootstrap")));
  report.avg_improvement = mean(diffs);
  return report;
}

StatewiseResult run_statewise(const Cohort& c, const EncodingSpec& base_spec,
                              const ExperimentConfig& cfg) {
  // canonical row order: sort by subject id so cohort permutations cannot
  // change any partition
  std::vector<const Subject*> ordered;
  ordered.reserve(c.subjects.size());
  for (const auto& s : c.subjects) ordered.push_back(&s);
  std::sort(ordered.begin(), ordered.end(),
            [](const Subject* a, const Subject* b) { return a->id < b->id; });

  std::map<std::string, Cohort> by_state;
  Cohort overall;
  overall.provenance = c.provenance;
  for (const Subject* s : ordered) {
    by_state[s->state].subjects.push_back(*s);
    overall.subjects.push_back(*s);
  }

  EncodingSpec state_spec = base_spec;  // the per-state runs drop the state column
  std::erase(state_spec.categorical, std::string("state"));
  EncodingSpec overall_spec = state_spec;
  overall_spec.categorical.push_back("state");

  std::vector<std::string> overall_geo = cfg.geo_feature_names;
  for (const auto& g : cfg.overall_extra_geo)
    if (std::find(overall_geo.begin(), overall_geo.end(), g) == overall_geo.end())
      overall_geo.push_back(g);

  struct Task {
    std::string name;
    const Cohort* cohort;
    const EncodingSpec* spec;
    const std::vector<std::string>* geo;
  };
  std::vector<Task> tasks;
  tasks.push_back({"Overall", &overall, &overall_spec, &overall_geo});
  for (const auto& [state, cohort] : by_state)
    tasks.push_back({state, &cohort, &state_spec, &cfg.geo_feature_names});

  struct Outcome {
    bool ok = false;
    bool skipped = false;
    ExperimentReport report;
    std::string reason;
  };
  std::vector<Outcome> outcomes(tasks.size());

  auto run_task = [&](std::size_t idx) {
    const Task& task = tasks[idx];
    Outcome& out = outcomes[idx];
    const int n_rows = static_cast<int>(task.cohort->subjects.size());
    if (n_rows < cfg.effective_min_rows()) {
      out.skipped = true;
      out.reason = "only " + std::to_string(n_rows) + " rows, needs >= " +
                   std::to_string(cfg.effective_min_rows());
      return;
    }
    ExperimentConfig local = cfg;
    local.subset_seed = mix_seed(cfg.subset_seed, fnv1a(task.name));
    const DesignMatrix m = encode_covariates(*task.cohort, *task.spec);
    out.report = run_subset_ttest(m, local, task.name, task.geo);
    out.ok = true;
  };

  int workers = cfg.jobs > 0 ? cfg.jobs : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min<int>(workers, static_cast<int>(tasks.size())));
  std::exception_ptr first_error;
  if (workers <= 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) run_task(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= tasks.size()) return;
          try {
            run_task(i);
          } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  StatewiseResult result;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (outcomes[i].ok)
      result.reports.push_back(std::move(outcomes[i].report));
    else if (outcomes[i].skipped)
      result.skipped.emplace_back(tasks[i].name, outcomes[i].reason);
  }
  return result;
}

void emit_report(const std::vector<ExperimentReport>& reports, const std::string& path) {
  CsvTable t;
  t.header = {"dataset_name", "rows_per_subset",          "t_statistic", "p_value",
              "ci_lo",        "ci_hi",                    "avg_c_index_improvement"};
  for (const auto& r : reports) {
    t.rows.push_back({r.dataset_name, std::to_string(r.rows_per_subset_mode()),
                      format_double(r.t), format_double(r.p), format_double(r.ci.lo),
                      format_double(r.ci.hi), format_double(r.avg_improvement)});
  }
  write_csv(path, t);
}

void write_per_subset_csv(const std::vector<ExperimentReport>& reports, const std::string& path) {
  CsvTable t;
  t.header = {"dataset", "subset_id", "c_with", "c_without", "diff", "rows"};
  for (const auto& r : reports)
    for (const auto& s : r.per_subset)
      t.rows.push_back({r.dataset_name, std::to_string(s.subset_id), format_double(s.c_with),
                        format_double(s.c_without), format_double(s.diff),
                        std::to_string(s.rows)});
  write_csv(path, t);
}

std::vector<ReportRow> read_report(const std::string& path) {
  const CsvTable csv = read_csv(path);
  auto col = [&](const char* name) {
    const int idx = csv.column_index(name);
    if (idx < 0) throw std::runtime_error(path + ": missing column " + name);
    return idx;
  };
  const int c_name = col("dataset_name"), c_rows = col("rows_per_subset"),
            c_t = col("t_statistic"), c_p = col("p_value"), c_lo = col("ci_lo"),
            c_hi = col("ci_hi"), c_avg = col("avg_c_index_improvement");
  std::vector<ReportRow> rows;
  for (const auto& r : csv.rows) {
    ReportRow row;
    row.dataset_name = r[static_cast<std::size_t>(c_name)];
    row.rows_per_subset = std::stoi(r[static_cast<std::size_t>(c_rows)]);
    row.t_statistic = std::stod(r[static_cast<std::size_t>(c_t)]);
    row.p_value = std::stod(r[static_cast<std::size_t>(c_p)]);
    row.ci_lo = std::stod(r[static_cast<std::size_t>(c_lo)]);
    row.ci_hi = std::stod(r[static_cast<std::size_t>(c_hi)]);
    row.avg_c_index_improvement = std::stod(r[static_cast<std::size_t>(c_avg)]);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<ExperimentReport> reports_from_per_subset_csv(const std::string& path,
                                                          double ci_level, int replicates,
                                                          std::uint64_t seed) {
  const CsvTable csv = read_csv(path);
  auto col = [&](const char* name) {
    const int idx = csv.column_index(name);
    if (idx < 0) throw std::runtime_error(path + ": missing column " + name);
    return idx;
  };
  const int c_ds = col("dataset"), c_id = col("subset_id"), c_w = col("c_with"),
            c_wo = col("c_without");
  const int c_rows = csv.column_index("rows");  // optional in older audit files

  std::vector<std::string> order;
  std::map<std::string, std::vector<PairedRunResult>> grouped;
  for (const auto& r : csv.rows) {
    const std::string& ds = r[static_cast<std::size_t>(c_ds)];
    if (!grouped.count(ds)) order.push_back(ds);
    PairedRunResult run;
    run.subset_id = std::stoi(r[static_cast<std::size_t>(c_id)]);
    run.c_with = std::stod(r[static_cast<std::size_t>(c_w)]);
    run.c_without = std::stod(r[static_cast<std::size_t>(c_wo)]);
    if (c_rows >= 0) run.rows = std::stoi(r[static_cast<std::size_t>(c_rows)]);
    run.diff = c_index_diff(run.c_with, run.c_without);
    grouped[ds].push_back(run);
  }

  std::vector<ExperimentReport> reports;
  for (const auto& ds : order) {
    ExperimentReport rep;
    rep.dataset_name = ds;
    rep.per_subset = grouped[ds];
    std::vector<double> with_v, without_v, diffs;
    for (const auto& s : rep.per_subset) {
      with_v.push_back(s.c_with);
      without_v.push_back(s.c_without);
      diffs.push_back(s.diff);
    }
    const PairedTTestResult tt = paired_t_test(with_v, without_v);
    rep.t = tt.t_statistic;
    rep.p = tt.p_value;
    rep.ci = bootstrap_ci(diffs, ci_level, replicates, mix_seed(seed, fnv1a(ds)));
    rep.avg_improvement = mean(diffs);
    reports.push_back(std::move(rep));
  }
  return reports;
}

}  // namespace geosurv
