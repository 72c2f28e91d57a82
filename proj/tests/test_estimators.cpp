#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "geosurv/estimators.hpp"
#include "geosurv/rng.hpp"
#include "test_util.hpp"

using namespace geosurv;

namespace {

DesignMatrix make_matrix(const Eigen::MatrixXd& x, const std::vector<double>& time,
                         const std::vector<char>& event,
                         std::vector<std::string> names = {}) {
  DesignMatrix m;
  m.values = x;
  m.time = Eigen::Map<const Eigen::VectorXd>(time.data(), static_cast<Eigen::Index>(time.size()));
  m.event = event;
  m.censoring.assign(time.size(), CensoringKind::right);
  if (names.empty())
    for (Eigen::Index j = 0; j < x.cols(); ++j) names.push_back("x" + std::to_string(j));
  m.column_names = std::move(names);
  return m;
}

// two-group exponential sampler with optional exponential censoring
DesignMatrix two_group_exponential(int n, double hazard_ratio, double censor_rate,
                                   std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd x(n, 1);
  std::vector<double> time(static_cast<std::size_t>(n));
  std::vector<char> event(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double group = rng.bernoulli(0.5) ? 1.0 : 0.0;
    x(i, 0) = group;
    const double rate = 0.05 * (group == 1.0 ? hazard_ratio : 1.0);
    const double t = rng.exponential(rate);
    const double c = censor_rate > 0 ? rng.exponential(censor_rate) : 1e18;
    time[static_cast<std::size_t>(i)] = std::min(t, c);
    event[static_cast<std::size_t>(i)] = t <= c ? 1 : 0;
  }
  return make_matrix(x, time, event, {"group"});
}

DesignMatrix random_fixture(int n, int p, bool with_ties, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd x(n, p);
  std::vector<double> time(static_cast<std::size_t>(n));
  std::vector<char> event(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) x(i, j) = rng.normal(0.0, 1.0);
    const double raw = rng.exponential(0.1);
    time[static_cast<std::size_t>(i)] = with_ties ? std::ceil(raw) : raw;
    event[static_cast<std::size_t>(i)] = rng.bernoulli(0.7) ? 1 : 0;
  }
  if (std::none_of(event.begin(), event.end(), [](char e) { return e; })) event[0] = 1;
  return make_matrix(x, time, event);
}

}  // namespace

TEST_CASE("kaplan_meier with all subjects censored") {
  const std::vector<double> time{1, 2, 3};
  const std::vector<char> event{0, 0, 0};
  const auto km = kaplan_meier(time, event);
  CHECK(km.event_times.empty());
  CHECK(km.at(2.5) == 1.0);
}

TEST_CASE("kaplan_meier product-limit hand fixtures") {
  {
    const std::vector<double> time{1, 2, 3};
    const std::vector<char> event{1, 1, 1};
    const auto km = kaplan_meier(time, event);
    REQUIRE(km.event_times == std::vector<double>{1, 2, 3});
    CHECK(km.survival[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(km.survival[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(km.survival[2] == 0.0);
    CHECK(km.at_risk == std::vector<int>{3, 2, 1});
  }
  {
    // censoring at 2 leaves risk set {3} at t=3
    const std::vector<double> time{1, 2, 3};
    const std::vector<char> event{1, 0, 1};
    const auto km = kaplan_meier(time, event);
    REQUIRE(km.event_times == std::vector<double>{1, 3});
    CHECK(km.survival[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(km.survival[1] == 0.0);
  }
}

TEST_CASE("kaplan_meier equals 1 - ECDF with no censoring") {
  Rng rng(9);
  const int n = 200;
  std::vector<double> time(n);
  std::vector<char> event(n, 1);
  for (auto& t : time) t = rng.exponential(0.2);
  const auto km = kaplan_meier(time, event);
  std::vector<double> sorted(time);
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t k = 0; k < km.event_times.size(); ++k) {
    const auto rank = std::upper_bound(sorted.begin(), sorted.end(), km.event_times[k]) -
                      sorted.begin();
    const double ecdf = static_cast<double>(rank) / n;
    CHECK(km.survival[k] == doctest::Approx(1.0 - ecdf).epsilon(1e-12));
  }
  CHECK_THROWS_AS(kaplan_meier(std::vector<double>{}, std::vector<char>{}),
                  std::invalid_argument);
}

TEST_CASE("partial log-likelihood at beta = 0 is -sum log risk-set sizes") {
  const std::vector<double> time{1, 2, 3, 4, 5, 6};
  const std::vector<char> event{1, 0, 1, 1, 0, 1};
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(6, 2);
  const auto m = make_matrix(x, time, event);
  const auto lik = cox_partial_loglik(Eigen::VectorXd::Zero(2), m, TieRule::efron);
  // risk sets at events t=1,3,4,6 have sizes 6,4,3,1
  const double expected = -(std::log(6.0) + std::log(4.0) + std::log(3.0) + std::log(1.0));
  CHECK(lik.value == doctest::Approx(expected).epsilon(1e-14));
}

namespace {

void check_gradient_hessian(const DesignMatrix& m, TieRule ties, double penalizer,
                            std::uint64_t seed) {
  Rng rng(seed);
  const auto p = m.values.cols();
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd beta(p);
    for (Eigen::Index j = 0; j < p; ++j) beta[j] = rng.normal(0.0, 0.4);
    const auto lik = cox_partial_loglik(beta, m, ties, penalizer);
    const double h = 1e-5;
    for (Eigen::Index j = 0; j < p; ++j) {
      Eigen::VectorXd up = beta, dn = beta;
      up[j] += h;
      dn[j] -= h;
      const auto lup = cox_partial_loglik(up, m, ties, penalizer);
      const auto ldn = cox_partial_loglik(dn, m, ties, penalizer);
      const double fd_grad = (lup.value - ldn.value) / (2 * h);
      CHECK(std::fabs(fd_grad - lik.gradient[j]) <=
            1e-6 * std::max(1.0, std::fabs(lik.gradient[j])));
      for (Eigen::Index k = 0; k < p; ++k) {
        const double fd_hess = (lup.gradient[k] - ldn.gradient[k]) / (2 * h);
        CHECK(std::fabs(fd_hess - lik.hessian(j, k)) <=
              1e-6 * std::max(1.0, std::fabs(lik.hessian(j, k))));
      }
    }
  }
}

}  // namespace

TEST_CASE("gradient and hessian match central finite differences") {
  for (bool ties : {false, true}) {
    const auto m = random_fixture(40, 3, ties, ties ? 101 : 202);
    check_gradient_hessian(m, TieRule::efron, 0.0, 1);
    check_gradient_hessian(m, TieRule::breslow, 0.0, 2);
    check_gradient_hessian(m, TieRule::efron, 0.3, 3);  // penalized variant
  }
}

TEST_CASE("breslow and efron agree exactly when no event times tie") {
  const auto m = random_fixture(50, 3, false, 77);
  Rng rng(5);
  Eigen::VectorXd beta(3);
  for (int j = 0; j < 3; ++j) beta[j] = rng.normal(0.0, 0.5);
  const auto a = cox_partial_loglik(beta, m, TieRule::efron);
  const auto b = cox_partial_loglik(beta, m, TieRule::breslow);
  CHECK(a.value == doctest::Approx(b.value).epsilon(1e-14));
  CHECK(a.gradient.isApprox(b.gradient, 1e-12));
  CHECK(a.hessian.isApprox(b.hessian, 1e-12));
}

TEST_CASE("cox_partial_loglik requires at least one event") {
  auto m = random_fixture(10, 2, false, 1);
  std::fill(m.event.begin(), m.event.end(), 0);
  CHECK_THROWS_AS(cox_partial_loglik(Eigen::VectorXd::Zero(2), m, TieRule::efron),
                  std::invalid_argument);
}

TEST_CASE("cox_fit recovers a null effect") {
  const auto m = two_group_exponential(2000, 1.0, 0.0, 31);
  const auto model = cox_fit(m, 1e-4);
  CHECK(model.converged);
  CHECK(std::fabs(model.beta[0]) < 0.05);
}

TEST_CASE("cox_fit recovers a hazard ratio of 2 under censoring") {
  const auto m = two_group_exponential(5000, 2.0, 0.012, 57);  // ~20% censored
  double censored = 0;
  for (char e : m.event) censored += e ? 0 : 1;
  CHECK(censored / 5000.0 > 0.1);
  CHECK(censored / 5000.0 < 0.3);
  const auto model = cox_fit(m, 1e-4);
  CHECK(model.converged);
  CHECK(model.beta[0] == doctest::Approx(std::log(2.0)).epsilon(0.1 / std::log(2.0)));
}

TEST_CASE("a huge penalizer shrinks the coefficient toward zero") {
  const auto m = two_group_exponential(5000, 2.0, 0.012, 57);
  const auto model = cox_fit(m, 1e6);
  CHECK(model.beta.norm() < 1e-2);
}

TEST_CASE("risk scores") {
  CoxModel model;
  model.beta = Eigen::VectorXd::Zero(3);
  Eigen::VectorXd x(3);
  x << 1.0, -2.0, 0.5;
  CHECK(cox_risk_score(model, x) == 1.0);

  CoxModel m2;
  m2.beta = Eigen::VectorXd::Constant(1, std::log(2.0));
  CHECK(cox_risk_score(m2, Eigen::VectorXd::Ones(1)) == doctest::Approx(2.0).epsilon(1e-14));

  Eigen::VectorXd x_hi = Eigen::VectorXd::Ones(1) * 2.0;
  CHECK(cox_risk_score(m2, x_hi) > cox_risk_score(m2, Eigen::VectorXd::Ones(1)));

  CHECK_THROWS_AS(cox_risk_score(m2, Eigen::VectorXd::Ones(3)), std::invalid_argument);
}

TEST_CASE("cox_survival step-function contract") {
  const auto m = two_group_exponential(500, 1.5, 0.01, 19);
  const auto model = cox_fit(m, 1e-4);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(1);
  CHECK(cox_survival(model, x, 0.0) == 1.0);
  const double t_last = model.baseline_cumhaz.times.back();
  CHECK(cox_survival(model, x, t_last + 1.0) == cox_survival(model, x, t_last + 100.0));
  double prev = 1.0;
  for (double t = 0; t < t_last; t += t_last / 50) {
    const double s = cox_survival(model, x, t);
    CHECK(s <= prev + 1e-15);
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
    prev = s;
  }
}

TEST_CASE("baseline survival at beta=0 tracks the KM curve") {
  Rng rng(83);
  const int n = 500;
  Eigen::MatrixXd x(n, 1);
  std::vector<double> time(n);
  std::vector<char> event(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.normal(0.0, 1.0);
    const double t = rng.exponential(0.05);
    const double c = rng.exponential(0.02);
    time[static_cast<std::size_t>(i)] = std::min(t, c);
    event[static_cast<std::size_t>(i)] = t <= c ? 1 : 0;
  }
  auto m = make_matrix(x, time, event);
  m.values.setZero();  // eta stays 0, ridge pins beta at 0; Breslow reduces to Nelson-Aalen
  const auto model = cox_fit(m, 1e-4);
  const auto km = kaplan_meier(time, event);
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(1);
  double max_gap = 0.0;
  for (double t : km.event_times)
    max_gap = std::max(max_gap, std::fabs(cox_survival(model, zero, t) - km.at(t)));
  CHECK(max_gap < 0.05);
}

TEST_CASE("cox_fit is invariant to row order") {
  const auto m = two_group_exponential(800, 2.0, 0.01, 3);
  const auto base = cox_fit(m, 1e-4);

  std::vector<int> perm = seeded_permutation(m.rows(), 999);
  const auto shuffled = cox_fit(m.select_rows(perm), 1e-4);
  CHECK(std::fabs(base.beta[0] - shuffled.beta[0]) < 1e-10);
}

TEST_CASE("translating a covariate leaves its coefficient unchanged") {
  auto m = random_fixture(300, 2, false, 55);
  const auto base = cox_fit(m, 1e-4);
  auto shifted = m;
  shifted.values.col(0).array() += 1000.0;
  const auto moved = cox_fit(shifted, 1e-4);
  CHECK(base.beta.isApprox(moved.beta, 1e-6));
}

TEST_CASE("standardization on or off gives the same fit") {
  const auto m = random_fixture(400, 3, true, 66);
  CoxFitOptions raw;
  raw.standardize = false;
  const auto a = cox_fit(m, 1e-3);
  const auto b = cox_fit(m, 1e-3, TieRule::efron, raw);
  CHECK(a.beta.isApprox(b.beta, 1e-6));
  CHECK(a.final_loglik == doctest::Approx(b.final_loglik).epsilon(1e-9));
  // final penalized objective matches the public likelihood at the estimate
  const auto lik = cox_partial_loglik(a.beta, m, TieRule::efron, 1e-3);
  CHECK(lik.value == doctest::Approx(a.final_loglik).epsilon(1e-9));
  const auto at_zero = cox_partial_loglik(Eigen::VectorXd::Zero(3), m, TieRule::efron, 1e-3);
  CHECK(a.final_loglik >= at_zero.value);
}

TEST_CASE("singular hessian names the dependent columns") {
  Rng rng(8);
  const int n = 60;
  Eigen::MatrixXd x(n, 3);
  std::vector<double> time(n);
  std::vector<char> event(n, 1);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.normal(0.0, 1.0);
    x(i, 1) = rng.normal(0.0, 1.0);
    x(i, 2) = x(i, 0) + x(i, 1);  // exact linear dependence
    time[static_cast<std::size_t>(i)] = rng.exponential(0.1);
  }
  const auto m = make_matrix(x, time, event, {"a", "b", "a_plus_b"});
  try {
    cox_fit(m, 0.0);
    FAIL("expected SingularHessianError");
  } catch (const SingularHessianError& e) {
    CHECK_FALSE(e.columns.empty());
  }
}

TEST_CASE("left-censored rows are rejected by estimators") {
  auto m = random_fixture(20, 2, false, 4);
  m.censoring[3] = CensoringKind::left;
  CHECK_THROWS_AS(cox_fit(m, 1e-4), NonRightCensoredError);
  CHECK_THROWS_AS(weibull_ph_fit(m), NonRightCensoredError);
  CHECK_THROWS_AS(cox_partial_loglik(Eigen::VectorXd::Zero(2), m, TieRule::efron),
                  NonRightCensoredError);
}

namespace {

DesignMatrix weibull_sample(int n, double shape, double scale, double beta, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd x(n, 1);
  std::vector<double> time(static_cast<std::size_t>(n));
  std::vector<char> event(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.normal(0.0, 1.0);
    const double mult = std::exp(beta * x(i, 0));
    const double t = scale * std::pow(rng.exponential(1.0) / mult, 1.0 / shape);
    const double c = rng.exponential(1.0 / (3.0 * scale));
    time[static_cast<std::size_t>(i)] = std::min(t, c);
    event[static_cast<std::size_t>(i)] = t <= c ? 1 : 0;
  }
  return make_matrix(x, time, event, {"z"});
}

}  // namespace

TEST_CASE("weibull fit recovers generator parameters within 10%") {
  const auto m = weibull_sample(5000, 1.5, 10.0, 0.7, 12);
  const auto model = weibull_ph_fit(m);
  CHECK(model.converged);
  CHECK(std::fabs(model.shape - 1.5) / 1.5 < 0.1);
  CHECK(std::fabs(model.scale - 10.0) / 10.0 < 0.1);
  CHECK(std::fabs(model.beta[0] - 0.7) / 0.7 < 0.1);
}

TEST_CASE("weibull shape 1 reduces to the exponential model") {
  const auto m = weibull_sample(5000, 1.0, 20.0, 0.4, 21);
  const auto model = weibull_ph_fit(m);
  CHECK(model.shape == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("weibull and cox agree on beta for correctly-specified data") {
  const auto m = weibull_sample(5000, 1.5, 10.0, 0.7, 33);
  const auto wb = weibull_ph_fit(m);
  const auto cx = cox_fit(m, 1e-4);
  CHECK(std::fabs(wb.beta[0] - cx.beta[0]) < 0.1);
}

TEST_CASE("model export round-trip") {
  testutil::TempDir tmp;
  const auto m = two_group_exponential(300, 2.0, 0.01, 44);
  const auto model = cox_fit(m, 1e-4);
  write_cox_model(tmp.file("model.json"), model);
  const auto loaded = read_cox_model(tmp.file("model.json"));
  CHECK(loaded.beta.isApprox(model.beta, 1e-15));
  CHECK(loaded.column_names == model.column_names);
  CHECK(loaded.baseline_cumhaz.times == model.baseline_cumhaz.times);
  CHECK(loaded.converged == model.converged);

  write_coefficient_table(tmp.file("coef.csv"), model.column_names, model.beta);
  const std::string text = testutil::read_file(tmp.file("coef.csv"));
  CHECK(text.find("name,beta,abs_beta") == 0);
}
