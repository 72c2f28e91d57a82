#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace geosurv {

inline constexpr const char* kToolVersion = "0.1.0";

// Subcommand entry points; each returns a process exit code, writes data
// files under out_dir, and prints a one-line summary to stdout. Diagnostics
// go to stderr.

int cmd_synth(const std::string& config_path, const std::string& out_dir,
              std::optional<std::uint64_t> seed_override);

int cmd_features(const std::string& cohort_path, const std::string& schema_path,
                 const std::string& population_path, const std::string& esr_path,
                 const std::string& out_dir, const std::string& fallback,
                 const std::string& on_error);

int cmd_fit(const std::string& config_path, const std::string& out_dir);

int cmd_eval(const std::string& model_path, const std::string& cohort_path,
             const std::string& schema_path, const std::string& out_dir);

struct ExperimentOverrides {
  std::optional<std::uint64_t> split_seed;
  std::optional<std::uint64_t> subset_seed;
  std::optional<int> jobs;
};

int cmd_experiment(const std::string& config_path, const std::string& out_dir,
                   const ExperimentOverrides& overrides = {});

int cmd_report(const std::string& per_subset_path, const std::string& out_dir, double ci_level,
               int replicates, std::uint64_t seed);

}  // namespace geosurv
