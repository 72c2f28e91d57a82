#include "geosurv/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "geosurv/rng.hpp"

namespace geosurv {

double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_sd(std::span<const double> v) {
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

// Continued fraction for the incomplete beta function, modified Lentz method.
static double beta_cf(double a, double b, double x) {
  constexpr double kTiny = 1e-300;
  constexpr double kEps = 3e-16;
  constexpr int kMaxIter = 500;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) <= kEps) return h;
  }
  throw std::runtime_error("incomplete_beta_reg: continued fraction did not converge");
}

double incomplete_beta_reg(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw std::invalid_argument("incomplete_beta_reg: a, b must be > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument("incomplete_beta_reg: x outside [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double ln_bt =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double bt = std::exp(ln_bt);
  if (x < (a + 1.0) / (a + b + 2.0))
    return bt * beta_cf(a, b, x) / a;
  return 1.0 - bt * beta_cf(b, a, 1.0 - x) / b;
}

double t_sf(double t, int df) {
  if (df < 1) throw std::invalid_argument("t_sf: df must be >= 1");
  if (std::isinf(t)) return 0.0;
  const double nu = static_cast<double>(df);
  const double x = nu / (nu + t * t);
  return incomplete_beta_reg(nu / 2.0, 0.5, x);
}

// Lower regularized incomplete gamma by series expansion.
static double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  double ap = a;
  for (int n = 0; n < 500; ++n) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * 3e-16)
      return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
  }
  throw std::runtime_error("gamma_p_series: no convergence");
}

// Upper regularized incomplete gamma by continued fraction (Lentz).
static double gamma_q_cf(double a, double x) {
  constexpr double kTiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) <= 3e-16)
      return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
  }
  throw std::runtime_error("gamma_q_cf: no convergence");
}

double gamma_q(double a, double x) {
  if (!(a > 0.0) || x < 0.0) throw std::invalid_argument("gamma_q: bad arguments");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_cf(a, x);
}

double chi_square_sf(double x, int df) {
  if (df < 1) throw std::invalid_argument("chi_square_sf: df must be >= 1");
  if (x <= 0.0) return 1.0;
  return gamma_q(df / 2.0, x / 2.0);
}

PairedTTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("paired_t_test: length mismatch");
  const int n = static_cast<int>(a.size());
  if (n < 2) throw std::invalid_argument("paired_t_test: need n >= 2");

  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];

  PairedTTestResult r;
  r.n = n;
  r.df = n - 1;
  r.mean_diff = mean(d);
  r.sd_diff = sample_sd(d);
  if (r.sd_diff == 0.0)
    throw ZeroVarianceError("paired_t_test: zero variance of differences");
  r.t_statistic = r.mean_diff / (r.sd_diff / std::sqrt(static_cast<double>(n)));
  r.p_value = t_sf(r.t_statistic, r.df);
  return r;
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile_sorted: empty input");
  if (q <= 0.0) return sorted.front();
  if (q >= 1.0) return sorted.back();
  const double h = q * static_cast<double>(sorted.size() - 1);
  const std::size_t i = static_cast<std::size_t>(h);
  if (i + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(i);
  return sorted[i] + frac * (sorted[i + 1] - sorted[i]);
}

BootstrapInterval bootstrap_ci(std::span<const double> d, double level, int replicates,
                               std::uint64_t seed) {
  const std::size_t n = d.size();
  if (n < 2) throw std::invalid_argument("bootstrap_ci: need n >= 2");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("bootstrap_ci: level outside (0, 1)");
  if (replicates < 1) throw std::invalid_argument("bootstrap_ci: replicates must be >= 1");

  std::vector<double> means(static_cast<std::size_t>(replicates));
  for (int r = 0; r < replicates; ++r) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(r)));
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) s += d[rng.uniform_index(n)];
    means[static_cast<std::size_t>(r)] = s / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());

  BootstrapInterval ci;
  ci.level = level;
  ci.replicates = replicates;
  ci.lo = quantile_sorted(means, (1.0 - level) / 2.0);
  ci.hi = quantile_sorted(means, (1.0 + level) / 2.0);
  return ci;
}

}  // namespace geosurv
