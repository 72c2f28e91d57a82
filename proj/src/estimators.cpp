#include "geosurv/estimators.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "geosurv/csv.hpp"

namespace geosurv {

using nlohmann::json;

const char* to_string(TieRule t) { return t == TieRule::efron ? "efron" : "breslow"; }

// ---------------------------------------------------------------------------
// Kaplan-Meier

double KaplanMeierCurve::at(double t) const {
  auto it = std::upper_bound(event_times.begin(), event_times.end(), t);
  if (it == event_times.begin()) return 1.0;
  return survival[static_cast<std::size_t>(it - event_times.begin()) - 1];
}

KaplanMeierCurve kaplan_meier(std::span<const double> time, std::span<const char> event) {
  if (time.empty()) throw std::invalid_argument("kaplan_meier: empty input");
  if (time.size() != event.size()) throw std::invalid_argument("kaplan_meier: length mismatch");
  for (double t : time)
    if (!(t >= 0.0)) throw std::invalid_argument("kaplan_meier: negative time");

  const int n = static_cast<int>(time.size());
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return time[a] < time[b]; });

  KaplanMeierCurve km;
  double s = 1.0;
  int i = 0;
  while (i < n) {
    const double t = time[order[static_cast<std::size_t>(i)]];
    const int at_risk = n - i;
    int deaths = 0;
    int j = i;
    while (j < n && time[order[static_cast<std::size_t>(j)]] == t) {
      if (event[order[static_cast<std::size_t>(j)]]) ++deaths;
      ++j;
    }
    if (deaths > 0) {
      s *= 1.0 - static_cast<double>(deaths) / static_cast<double>(at_risk);
      km.event_times.push_back(t);
      km.survival.push_back(s);
      km.at_risk.push_back(at_risk);
      km.events_at.push_back(deaths);
    }
    i = j;
  }
  return km;
}

// ---------------------------------------------------------------------------
// Cox partial likelihood

namespace {

void require_right_censored(const DesignMatrix& m, const char* who) {
  for (std::size_t i = 0; i < m.censoring.size(); ++i)
    if (m.censoring[i] != CensoringKind::right)
      throw NonRightCensoredError(std::string(who) + ": row " + std::to_string(i) + " is " +
                                  to_string(m.censoring[i]) +
                                  "-censored; only right-censored data is supported");
}

// Accumulates the log partial likelihood over risk sets; rows enter the risk
// set in descending time order. penalty_weights scales the ridge term per
// coordinate so callers can penalize on a different scale than the one they
// optimize in.
CoxLikelihood cox_loglik_impl(const Eigen::VectorXd& beta, const Eigen::MatrixXd& x,
                              const Eigen::VectorXd& time, const std::vector<char>& event,
                              TieRule ties, double penalizer,
                              const Eigen::VectorXd* penalty_weights) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();

  CoxLikelihood out;
  out.gradient = Eigen::VectorXd::Zero(p);
  out.hessian = Eigen::MatrixXd::Zero(p, p);

  Eigen::VectorXd eta = x * beta;
  const double shift = n > 0 ? eta.mean() : 0.0;  // partial likelihood is shift-invariant
  eta.array() -= shift;
  Eigen::VectorXd w = eta.array().exp();

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return time[a] > time[b]; });

  double s0 = 0.0;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);

  double value = 0.0;
  Eigen::Index i = 0;
  while (i < n) {
    const double t = time[order[static_cast<std::size_t>(i)]];
    Eigen::Index j = i;
    // the whole tie group enters the risk set before its events are scored
    double d0 = 0.0;
    Eigen::VectorXd d1 = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd d2 = Eigen::MatrixXd::Zero(p, p);
    double eta_events = 0.0;
    Eigen::VectorXd x_events = Eigen::VectorXd::Zero(p);
    int deaths = 0;
    while (j < n && time[order[static_cast<std::size_t>(j)]] == t) {
      const int r = order[static_cast<std::size_t>(j)];
      const double wr = w[r];
      s0 += wr;
      s1.noalias() += wr * x.row(r).transpose();
      s2.noalias() += wr * x.row(r).transpose() * x.row(r);
      if (event[static_cast<std::size_t>(r)]) {
        ++deaths;
        eta_events += eta[r];
        x_events += x.row(r).transpose();
        d0 += wr;
        d1.noalias() += wr * x.row(r).transpose();
        d2.noalias() += wr * x.row(r).transpose() * x.row(r);
      }
      ++j;
    }
    if (deaths > 0) {
      value += eta_events;
      out.gradient += x_events;
      if (ties == TieRule::breslow) {
        value -= deaths * std::log(s0);
        const Eigen::VectorXd mu = s1 / s0;
        out.gradient.noalias() -= deaths * mu;
        out.hessian.noalias() -= deaths * (s2 / s0 - mu * mu.transpose());
      } else {
        for (int l = 0; l < deaths; ++l) {
          const double frac = static_cast<double>(l) / deaths;
          const double phi = s0 - frac * d0;
          const Eigen::VectorXd v1 = s1 - frac * d1;
          const Eigen::VectorXd mu = v1 / phi;
          value -= std::log(phi);
          out.gradient.noalias() -= mu;
          out.hessian.noalias() -= (s2 - frac * d2) / phi - mu * mu.transpose();
        }
      }
    }
    i = j;
  }

  if (penalizer > 0.0) {
    if (penalty_weights) {
      const Eigen::ArrayXd pw = penalty_weights->array();
      value -= 0.5 * penalizer * (pw * beta.array().square()).sum();
      out.gradient.array() -= penalizer * pw * beta.array();
      out.hessian.diagonal().array() -= penalizer * pw;
    } else {
      value -= 0.5 * penalizer * beta.squaredNorm();
      out.gradient -= penalizer * beta;
      out.hessian.diagonal().array() -= penalizer;
    }
  }
  out.value = value;
  return out;
}

std::vector<std::string> dependent_columns(const Eigen::MatrixXd& a,
                                           const std::vector<std::string>& names) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  const Eigen::Index rank = qr.rank();
  std::vector<std::string> cols;
  const auto& perm = qr.colsPermutation().indices();
  for (Eigen::Index k = rank; k < a.cols(); ++k)
    cols.push_back(names[static_cast<std::size_t>(perm[k])]);
  return cols;
}

struct Standardization {
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;  // 1 where the column is constant
};

Standardization standardize(Eigen::MatrixXd& x) {
  Standardization s;
  const Eigen::Index n = x.rows();
  s.mean = x.colwise().mean();
  s.sd.resize(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double var = (x.col(j).array() - s.mean[j]).square().sum() / std::max<double>(1, n - 1);
    s.sd[j] = var > 0.0 ? std::sqrt(var) : 1.0;
    x.col(j) = (x.col(j).array() - s.mean[j]) / s.sd[j];
  }
  return s;
}

}  // namespace

CoxLikelihood cox_partial_loglik(const Eigen::VectorXd& beta, const DesignMatrix& m, TieRule ties,
                                 double penalizer) {
  require_right_censored(m, "cox_partial_loglik");
  if (m.event_count() == 0)
    throw std::invalid_argument("cox_partial_loglik: no events; partial likelihood undefined");
  if (beta.size() != m.values.cols())
    throw std::invalid_argument("cox_partial_loglik: beta length mismatch");
  return cox_loglik_impl(beta, m.values, m.time, m.event, ties, penalizer, nullptr);
}

double StepFunction::at(double t) const {
  auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 0.0;
  return values[static_cast<std::size_t>(it - times.begin()) - 1];
}

namespace {

// Breslow estimator of the baseline cumulative hazard at linear predictor
// eta (original scale).
StepFunction breslow_baseline(const Eigen::VectorXd& eta, const Eigen::VectorXd& time,
                              const std::vector<char>& event) {
  const Eigen::Index n = eta.size();
  const double shift = n > 0 ? eta.maxCoeff() : 0.0;
  Eigen::VectorXd w = (eta.array() - shift).exp();

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return time[a] > time[b]; });

  std::vector<double> rev_times, rev_increments;
  double s0 = 0.0;
  Eigen::Index i = 0;
  while (i < n) {
    const double t = time[order[static_cast<std::size_t>(i)]];
    int deaths = 0;
    Eigen::Index j = i;
    while (j < n && time[order[static_cast<std::size_t>(j)]] == t) {
      s0 += w[order[static_cast<std::size_t>(j)]];
      if (event[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])]) ++deaths;
      ++j;
    }
    if (deaths > 0) {
      rev_times.push_back(t);
      rev_increments.push_back(static_cast<double>(deaths) / (s0 * std::exp(shift)));
    }
    i = j;
  }

  StepFunction h0;
  double cum = 0.0;
  for (std::size_t k = rev_times.size(); k-- > 0;) {
    cum += rev_increments[k];
    h0.times.push_back(rev_times[k]);
    h0.values.push_back(cum);
  }
  return h0;
}

}  // namespace

CoxModel cox_fit(const DesignMatrix& m, double penalizer, TieRule ties,
                 const CoxFitOptions& options) {
  require_right_censored(m, "cox_fit");
  if (penalizer < 0.0) throw std::invalid_argument("cox_fit: penalizer must be >= 0");
  if (m.event_count() == 0) throw std::invalid_argument("cox_fit: no events");

  const Eigen::Index p = m.values.cols();
  CoxModel model;
  model.column_names = m.column_names;
  model.penalizer = penalizer;
  model.ties = ties;

  Eigen::MatrixXd x = m.values;
  Standardization st;
  if (options.standardize) {
    st = standardize(x);
  } else {
    st.mean = Eigen::VectorXd::Zero(p);
    st.sd = Eigen::VectorXd::Ones(p);
  }
  // ridge stays on the original scale regardless of the optimization scale
  const Eigen::VectorXd penalty_weights = st.sd.array().inverse().square();

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  CoxLikelihood lik =
      cox_loglik_impl(beta, x, m.time, m.event, ties, penalizer, &penalty_weights);

  if (p == 0) {
    model.converged = true;
    model.final_loglik = lik.value;
    model.beta = beta;
    model.baseline_cumhaz = breslow_baseline(Eigen::VectorXd::Zero(m.values.rows()), m.time, m.event);
    return model;
  }

  int iter = 0;
  for (; iter < options.max_iter; ++iter) {
    Eigen::MatrixXd a = -lik.hessian;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    // rank deficiency leaves the gradient inside the Hessian's range, so the
    // solve alone cannot flag it; inspect the pivots directly
    const Eigen::VectorXd d = ldlt.vectorD();
    const double d_max = d.maxCoeff();
    const bool singular = ldlt.info() != Eigen::Success || !(d_max > 0.0) ||
                          d.minCoeff() <= 1e-12 * d_max;
    Eigen::VectorXd step = ldlt.solve(lik.gradient);
    if (singular || !step.allFinite())
      throw SingularHessianError("cox_fit: singular Hessian; dependent columns present",
                                 dependent_columns(a, m.column_names));

    double scale = 1.0;
    Eigen::VectorXd candidate;
    CoxLikelihood next;
    bool improved = false;
    for (int h = 0; h <= options.max_halvings; ++h) {
      candidate = beta + scale * step;
      next = cox_loglik_impl(candidate, x, m.time, m.event, ties, penalizer, &penalty_weights);
      if (std::isfinite(next.value) && next.value >= lik.value) {
        improved = true;
        break;
      }
      scale *= 0.5;
    }
    if (!improved) {
      // no ascent direction left at this scale; treat as converged if flat
      model.converged = std::fabs(next.value - lik.value) < options.tol;
      break;
    }
    const double delta = next.value - lik.value;
    beta = candidate;
    lik = next;
    if (std::fabs(delta) < options.tol) {
      model.converged = true;
      ++iter;
      break;
    }
  }
  model.iterations = iter;
  model.final_loglik = lik.value;
  model.beta = (beta.array() / st.sd.array()).matrix();

  const Eigen::VectorXd eta = m.values * model.beta;
  model.baseline_cumhaz = breslow_baseline(eta, m.time, m.event);
  return model;
}

double cox_risk_score(const CoxModel& model, const Eigen::VectorXd& x) {
  if (x.size() != model.beta.size())
    throw std::invalid_argument("cox_risk_score: dimension mismatch (expected " +
                                std::to_string(model.beta.size()) + ", got " +
                                std::to_string(x.size()) + ")");
  return std::exp(model.beta.dot(x));
}

Eigen::VectorXd cox_risk_scores(const CoxModel& model, const DesignMatrix& m) {
  if (m.values.cols() != model.beta.size())
    throw std::invalid_argument("cox_risk_scores: dimension mismatch");
  return (m.values * model.beta).array().exp();
}

double cox_survival(const CoxModel& model, const Eigen::VectorXd& x, double t) {
  if (t < 0.0) throw std::invalid_argument("cox_survival: t must be >= 0");
  return std::exp(-model.baseline_cumhaz.at(t) * cox_risk_score(model, x));
}

// ---------------------------------------------------------------------------
// Weibull proportional hazards

namespace {

struct WeibullLik {
  double value = 0.0;
  Eigen::VectorXd gradient;  // (a, b, beta...)
  Eigen::MatrixXd hessian;
};

// theta = (a = log shape, b = log scale, beta)
WeibullLik weibull_loglik(const Eigen::VectorXd& theta, const Eigen::MatrixXd& x,
                          const Eigen::VectorXd& time, const std::vector<char>& event) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  const double a = theta[0];
  const double b = theta[1];
  const double k = std::exp(a);
  const Eigen::VectorXd beta = theta.segment(2, p);

  WeibullLik out;
  out.gradient = Eigen::VectorXd::Zero(p + 2);
  out.hessian = Eigen::MatrixXd::Zero(p + 2, p + 2);

  const Eigen::VectorXd eta = x * beta;
  double value = 0.0;
  double g_a = 0.0, g_b = 0.0;
  Eigen::VectorXd g_beta = Eigen::VectorXd::Zero(p);
  double h_aa = 0.0, h_ab = 0.0, h_bb = 0.0;
  Eigen::VectorXd h_abeta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd h_bbeta = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd h_bb2 = Eigen::MatrixXd::Zero(p, p);

  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = time[i];
    const bool d = event[static_cast<std::size_t>(i)] != 0;
    if (t <= 0.0) {
      if (d) throw std::invalid_argument("weibull_ph_fit: event at time 0");
      continue;  // zero follow-up contributes nothing
    }
    const double u = k * (std::log(t) - b);
    const double w = std::exp(u + eta[i]);  // cumulative hazard contribution
    if (d) {
      value += a + u - std::log(t) + eta[i];  // log k + (k-1)log t - k b + eta
      g_a += 1.0 + u;
      g_b -= k;
      g_beta += x.row(i).transpose();
      h_aa += u;
      h_ab -= k;
    }
    value -= w;
    g_a -= w * u;
    g_b += k * w;
    g_beta.noalias() -= w * x.row(i).transpose();
    h_aa -= w * u * (1.0 + u);
    h_ab += k * w * (1.0 + u);
    h_bb -= k * k * w;
    h_abeta.noalias() -= w * u * x.row(i).transpose();
    h_bbeta.noalias() += k * w * x.row(i).transpose();
    h_bb2.noalias() -= w * x.row(i).transpose() * x.row(i);
  }

  out.value = value;
  out.gradient[0] = g_a;
  out.gradient[1] = g_b;
  out.gradient.segment(2, p) = g_beta;
  out.hessian(0, 0) = h_aa;
  out.hessian(0, 1) = out.hessian(1, 0) = h_ab;
  out.hessian(1, 1) = h_bb;
  out.hessian.block(0, 2, 1, p) = h_abeta.transpose();
  out.hessian.block(2, 0, p, 1) = h_abeta;
  out.hessian.block(1, 2, 1, p) = h_bbeta.transpose();
  out.hessian.block(2, 1, p, 1) = h_bbeta;
  out.hessian.block(2, 2, p, p) = h_bb2;
  return out;
}

}  // namespace

WeibullPhModel weibull_ph_fit(const DesignMatrix& m, const CoxFitOptions& options) {
  require_right_censored(m, "weibull_ph_fit");
  if (m.event_count() == 0) throw std::invalid_argument("weibull_ph_fit: no events");
  for (Eigen::Index i = 0; i < m.time.size(); ++i)
    if (m.event[static_cast<std::size_t>(i)] && m.time[i] <= 0.0)
      throw std::invalid_argument("weibull_ph_fit: event rows require time > 0");

  const Eigen::Index p = m.values.cols();
  Eigen::MatrixXd x = m.values;
  Standardization st;
  if (options.standardize) {
    st = standardize(x);
  } else {
    st.mean = Eigen::VectorXd::Zero(p);
    st.sd = Eigen::VectorXd::Ones(p);
  }

  // init: exponential baseline at the mean event time, beta = 0
  double time_sum = 0.0;
  int events = 0;
  for (Eigen::Index i = 0; i < m.time.size(); ++i) {
    time_sum += m.time[i];
    if (m.event[static_cast<std::size_t>(i)]) ++events;
  }
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(p + 2);
  theta[1] = std::log(std::max(1e-8, time_sum / std::max(1, events)));

  WeibullLik lik = weibull_loglik(theta, x, m.time, m.event);

  WeibullPhModel model;
  model.column_names = m.column_names;

  int iter = 0;
  for (; iter < options.max_iter; ++iter) {
    Eigen::MatrixXd a = -lik.hessian;
    // Levenberg damping when the Hessian is not usable as-is
    double damping = 0.0;
    Eigen::VectorXd step;
    for (int attempt = 0; attempt < 8; ++attempt) {
      Eigen::MatrixXd ad = a;
      if (damping > 0.0) ad.diagonal().array() += damping;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(ad);
      step = ldlt.solve(lik.gradient);
      if (ldlt.info() == Eigen::Success && step.allFinite() && lik.gradient.dot(step) >= 0.0)
        break;
      damping = damping == 0.0 ? 1e-6 * std::max(1.0, a.trace()) : damping * 10.0;
    }
    if (!step.allFinite()) break;

    double scale = 1.0;
    bool improved = false;
    Eigen::VectorXd candidate;
    WeibullLik next;
    for (int h = 0; h <= options.max_halvings; ++h) {
      candidate = theta + scale * step;
      next = weibull_loglik(candidate, x, m.time, m.event);
      if (std::isfinite(next.value) && next.value >= lik.value) {
        improved = true;
        break;
      }
      scale *= 0.5;
    }
    if (!improved) break;
    const double delta = next.value - lik.value;
    theta = candidate;
    lik = next;
    if (std::fabs(delta) < options.tol) {
      model.converged = true;
      ++iter;
      break;
    }
  }

  model.iterations = iter;
  model.final_loglik = lik.value;
  model.shape = std::exp(theta[0]);
  const Eigen::VectorXd beta_std = theta.segment(2, p);
  model.beta = (beta_std.array() / st.sd.array()).matrix();
  // fold the standardization offset into the scale parameter
  const double offset = -model.beta.dot(st.mean);
  model.scale = std::exp(theta[1]) * std::exp(-offset / model.shape);
  return model;
}

double weibull_risk_score(const WeibullPhModel& model, const Eigen::VectorXd& x) {
  if (x.size() != model.beta.size())
    throw std::invalid_argument("weibull_risk_score: dimension mismatch");
  return std::exp(model.beta.dot(x));
}

Eigen::VectorXd weibull_risk_scores(const WeibullPhModel& model, const DesignMatrix& m) {
  if (m.values.cols() != model.beta.size())
    throw std::invalid_argument("weibull_risk_scores: dimension mismatch");
  return (m.values * model.beta).array().exp();
}

double weibull_survival(const WeibullPhModel& model, const Eigen::VectorXd& x, double t) {
  if (t < 0.0) throw std::invalid_argument("weibull_survival: t must be >= 0");
  if (t == 0.0) return 1.0;
  const double h0 = std::pow(t / model.scale, model.shape);
  return std::exp(-h0 * weibull_risk_score(model, x));
}

// ---------------------------------------------------------------------------
// Export

void write_cox_model(const std::string& path, const CoxModel& model) {
  json j;
  j["schema_version"] = 1;
  j["model"] = "cox";
  j["columns"] = model.column_names;
  j["beta"] = std::vector<double>(model.beta.data(), model.beta.data() + model.beta.size());
  j["penalizer"] = model.penalizer;
  j["tie_rule"] = to_string(model.ties);
  j["baseline"] = {{"times", model.baseline_cumhaz.times}, {"cumhaz", model.baseline_cumhaz.values}};
  j["converged"] = model.converged;
  j["iterations"] = model.iterations;
  j["final_loglik"] = model.final_loglik;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file: " + path);
  out << j.dump(2) << '\n';
}

CoxModel read_cox_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file: " + path);
  json j;
  in >> j;
  if (j.value("model", "") != "cox")
    throw std::runtime_error(path + ": not a cox model file");
  CoxModel model;
  model.column_names = j["columns"].get<std::vector<std::string>>();
  const auto beta = j["beta"].get<std::vector<double>>();
  model.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
  model.penalizer = j["penalizer"].get<double>();
  model.ties = j["tie_rule"].get<std::string>() == "breslow" ? TieRule::breslow : TieRule::efron;
  model.baseline_cumhaz.times = j["baseline"]["times"].get<std::vector<double>>();
  model.baseline_cumhaz.values = j["baseline"]["cumhaz"].get<std::vector<double>>();
  model.converged = j["converged"].get<bool>();
  model.iterations = j["iterations"].get<int>();
  model.final_loglik = j["final_loglik"].get<double>();
  return model;
}

void write_weibull_model(const std::string& path, const WeibullPhModel& model) {
  json j;
  j["schema_version"] = 1;
  j["model"] = "weibull_ph";
  j["columns"] = model.column_names;
  j["beta"] = std::vector<double>(model.beta.data(), model.beta.data() + model.beta.size());
  j["shape"] = model.shape;
  j["scale"] = model.scale;
  j["converged"] = model.converged;
  j["iterations"] = model.iterations;
  j["final_loglik"] = model.final_loglik;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file: " + path);
  out << j.dump(2) << '\n';
}

void write_coefficient_table(const std::string& path, const std::vector<std::string>& names,
                             const Eigen::VectorXd& beta) {
  if (static_cast<Eigen::Index>(names.size()) != beta.size())
    throw std::invalid_argument("write_coefficient_table: name/beta length mismatch");
  std::vector<int> order(names.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double fa = std::fabs(beta[a]), fb = std::fabs(beta[b]);
    if (fa != fb) return fa > fb;
    return names[static_cast<std::size_t>(a)] < names[static_cast<std::size_t>(b)];
  });
  CsvTable t;
  t.header = {"name", "beta", "abs_beta"};
  for (int idx : order)
    t.rows.push_back({names[static_cast<std::size_t>(idx)], format_double(beta[idx]),
                      format_double(std::fabs(beta[idx]))});
  write_csv(path, t);
}

}  // namespace geosurv
