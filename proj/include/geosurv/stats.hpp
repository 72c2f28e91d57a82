#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace geosurv {

struct ZeroVarianceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PairedTTestResult {
  double t_statistic = 0.0;
  double p_value = 1.0;  // two-sided
  int df = 0;            // n - 1
  double mean_diff = 0.0;
  double sd_diff = 0.0;  // sample sd, n-1 denominator
  int n = 0;
};

struct BootstrapInterval {
  double lo = 0.0;
  double hi = 0.0;
  double level = 0.0;
  int replicates = 0;
};

double mean(std::span<const double> v);
double sample_sd(std::span<const double> v);

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta_reg(double a, double b, double x);

// Two-sided Student-t tail probability: P(|T_df| >= |t|).
double t_sf(double t, int df);

// Upper regularized incomplete gamma Q(a, x); chi-square survival support.
double gamma_q(double a, double x);
double chi_square_sf(double x, int df);

inline double c_index_diff(double with_geo, double without_geo) {
  return with_geo - without_geo;
}

PairedTTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

// Empirical quantile with linear interpolation between order statistics
// (h = q * (n - 1)); input must be sorted ascending.
double quantile_sorted(std::span<const double> sorted, double q);

// Percentile bootstrap for the mean of d. Per-replicate resample streams are
// derived from (seed, replicate) so the result is schedule-independent.
BootstrapInterval bootstrap_ci(std::span<const double> d, double level, int replicates,
                               std::uint64_t seed);

}  // namespace geosurv
