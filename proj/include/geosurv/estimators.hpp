#pragma once

#include <Eigen/Core>

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "geosurv/data_model.hpp"

namespace geosurv {

struct SingularHessianError : std::runtime_error {
  std::vector<std::string> columns;
  SingularHessianError(const std::string& msg, std::vector<std::string> cols)
      : std::runtime_error(msg), columns(std::move(cols)) {}
};

// ---------------------------------------------------------------------------
// Kaplan-Meier

struct KaplanMeierCurve {
  std::vector<double> event_times;  // strictly increasing, events only
  std::vector<double> survival;     // value just after each event time
  std::vector<int> at_risk;         // risk-set size just before each event time
  std::vector<int> events_at;

  // step-function evaluation; 1 before the first event time
  double at(double t) const;
};

// Product-limit estimator. Subjects censored at t stay at risk through the
// events at t.
KaplanMeierCurve kaplan_meier(std::span<const double> time, std::span<const char> event);

// ---------------------------------------------------------------------------
// Cox proportional hazards

enum class TieRule { efron, breslow };

const char* to_string(TieRule t);

struct CoxLikelihood {
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};

// Log partial likelihood with tie correction; penalizer >= 0 subtracts
// (penalizer/2)*||beta||^2 with matching gradient and Hessian terms.
CoxLikelihood cox_partial_loglik(const Eigen::VectorXd& beta, const DesignMatrix& m, TieRule ties,
                                 double penalizer = 0.0);

struct StepFunction {
  std::vector<double> times;   // strictly increasing knots
  std::vector<double> values;  // value at and after each knot; 0 before the first

  double at(double t) const;
};

struct CoxModel {
  Eigen::VectorXd beta;
  std::vector<std::string> column_names;
  StepFunction baseline_cumhaz;  // Breslow estimator at the fitted beta
  double penalizer = 0.0;
  TieRule ties = TieRule::efron;
  bool converged = false;
  int iterations = 0;
  double final_loglik = 0.0;
};

struct CoxFitOptions {
  double tol = 1e-7;      // on log-likelihood change
  int max_iter = 100;
  int max_halvings = 10;
  bool standardize = true;  // internal z-scaling; beta is reported on the original scale
};

// Newton-Raphson from beta = 0 with step-halving whenever the penalized
// log-likelihood decreases.
CoxModel cox_fit(const DesignMatrix& m, double penalizer, TieRule ties = TieRule::efron,
                 const CoxFitOptions& options = {});

double cox_risk_score(const CoxModel& model, const Eigen::VectorXd& x);
Eigen::VectorXd cox_risk_scores(const CoxModel& model, const DesignMatrix& m);

// S(t | x) = exp(-H0(t) * exp(beta' x))
double cox_survival(const CoxModel& model, const Eigen::VectorXd& x, double t);

// ---------------------------------------------------------------------------
// Weibull proportional hazards

struct WeibullPhModel {
  Eigen::VectorXd beta;
  std::vector<std::string> column_names;
  double shape = 1.0;
  double scale = 1.0;
  bool converged = false;
  int iterations = 0;
  double final_loglik = 0.0;
};

// Full-likelihood MLE over (log shape, log scale, beta) with right censoring;
// hazard (shape/scale)*(t/scale)^(shape-1)*exp(beta' x).
WeibullPhModel weibull_ph_fit(const DesignMatrix& m, const CoxFitOptions& options = {});

double weibull_risk_score(const WeibullPhModel& model, const Eigen::VectorXd& x);
Eigen::VectorXd weibull_risk_scores(const WeibullPhModel& model, const DesignMatrix& m);
double weibull_survival(const WeibullPhModel& model, const Eigen::VectorXd& x, double t);

// ---------------------------------------------------------------------------
// Export

void write_cox_model(const std::string& path, const CoxModel& model);
CoxModel read_cox_model(const std::string& path);
void write_weibull_model(const std::string& path, const WeibullPhModel& model);

// CSV (name, beta, abs_beta) sorted descending by |beta|
void write_coefficient_table(const std::string& path, const std::vector<std::string>& names,
                             const Eigen::VectorXd& beta);

}  // namespace geosurv
