#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <functional>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace bregcon {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct InexactTarget {
  double delta = 0.0;
  double nu = 0.0;
};

struct Certificate {
  bool certified = false;
  double gap_bound = 0.0;  // proven bound on psi(x) - min psi
  double target = 0.0;
  int inner_iterations = 0;
  bool floor_clamped = false;  // target was below the attainable floor and was raised
};

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, Certificate cert) : std::runtime_error(what), certificate(cert) {}
  Certificate certificate;
};

template <typename Point>
struct SubproblemResult {
  Point x;
  Certificate cert;
};

template <typename Scalar = double>
struct StepParameters {
  Scalar tau = 0, sigma = 0, sigma_prev = 0, gamma = 0, theta = 1, t = 1;
  Scalar sigma0 = 0;
};

template <typename Scalar>
StepParameters<Scalar> initial_parameters(Scalar tau0, Scalar sigma0) {
  StepParameters<Scalar> p;
  p.gamma = sigma0 / tau0;
  p.tau = tau0;
  p.sigma = p.gamma * tau0;
  p.sigma_prev = p.sigma;
  p.theta = 1;
  p.t = 1;
  p.sigma0 = sigma0;
  return p;
}

// gamma_{k+1} = gamma_k (1 + mu tau_k), tau_{k+1} = tau_k sqrt(gamma_k / gamma_{k+1}).
template <typename Scalar>
StepParameters<Scalar> advance_parameters(const StepParameters<Scalar>& p, Scalar mu) {
  using std::sqrt;
  StepParameters<Scalar> q = p;
  q.gamma = p.gamma * (Scalar(1) + mu * p.tau);
  q.tau = p.tau * sqrt(p.gamma / q.gamma);
  q.sigma_prev = p.sigma;
  q.sigma = q.gamma * q.tau;
  q.theta = p.sigma / q.sigma;
  q.t = q.sigma / p.sigma0;
  return q;
}

template <typename Scalar = double>
using ParameterTrace = std::vector<StepParameters<Scalar>>;

template <typename Scalar>
ParameterTrace<Scalar> parameter_trace(Scalar tau0, Scalar sigma0, Scalar mu, long steps) {
  ParameterTrace<Scalar> trace;
  trace.reserve(static_cast<std::size_t>(steps));
  auto p = initial_parameters(tau0, sigma0);
  for (long k = 0; k < steps; ++k) {
    trace.push_back(p);
    p = advance_parameters(p, mu);
  }
  return trace;
}

struct ConditionViolation {
  long k = 0;
  int condition = 0;  // 1..6 in the order checked below
  std::string name;
  double lhs = 0, rhs = 0;
};

// The six step-size conditions of the primal-dual analysis, checked at relative tolerance tol.
template <typename Scalar>
std::vector<ConditionViolation> check_parameter_conditions(const ParameterTrace<Scalar>& trace, Scalar mu, Scalar l_g,
                                                           Scalar delta, Scalar tol = Scalar(1e-10)) {
  using std::abs;
  using std::max;
  std::vector<ConditionViolation> out;
  auto scale = [](Scalar a, Scalar b) { return max<Scalar>({Scalar(1), abs(a), abs(b)}); };
  auto le = [&](long k, int id, const char* name, Scalar a, Scalar b) {
    if (a > b + tol * scale(a, b)) out.push_back({k, id, name, double(a), double(b)});
  };
  auto eq = [&](long k, int id, const char* name, Scalar a, Scalar b) {
    if (abs(a - b) > tol * scale(a, b)) out.push_back({k, id, name, double(a), double(b)});
  };
  const long n = static_cast<long>(trace.size());
  for (long k = 0; k < n; ++k) {
    const auto& p = trace[k];
    // theta_k = sigma_{k-1} / sigma_k as the update defines it
    eq(k, 3, "theta_k sigma_k = sigma_{k-1}", p.theta * p.sigma, p.sigma_prev);
    le(k, 4, "L_g sigma_k / delta <= 1/tau_k", l_g * p.sigma / delta, Scalar(1) / p.tau);
    le(k, 5, "theta_k delta sigma_k <= sigma_{k-1}", p.theta * delta * p.sigma, p.sigma_prev);
    if (k + 1 >= n) continue;
    const auto& q = trace[k + 1];
    le(k, 1, "t_{k+1}/tau_{k+1} <= t_k (1/tau_k + mu)", q.t / q.tau, p.t * (Scalar(1) / p.tau + mu));
    eq(k, 2, "t_{k+1} theta_{k+1} = t_k", q.t * q.theta, p.t);
    le(k, 6, "t_{k+1}/sigma_{k+1} <= t_k/sigma_k", q.t / q.sigma, p.t / p.sigma);
  }
  return out;
}

// [y + sigma ((1 + theta) g_curr - theta g_prev)]_+
template <typename DY, typename DC, typename DP>
Eigen::Matrix<typename DY::Scalar, Eigen::Dynamic, 1> dual_step(const Eigen::MatrixBase<DY>& y,
                                                                 typename DY::Scalar sigma,
                                                                 const Eigen::MatrixBase<DC>& g_curr,
                                                                 const Eigen::MatrixBase<DP>& g_prev,
                                                                 typename DY::Scalar theta) {
  using S = typename DY::Scalar;
  return (y + sigma * ((S(1) + theta) * g_curr - theta * g_prev)).cwiseMax(S(0));
}

// delta = nu = tau0 / (k+2)^7 when mu > 0, tau0 / (k+2)^4 otherwise.
template <typename Scalar>
InexactTarget inexactness_schedule(long k, Scalar tau0, Scalar mu) {
  const double base = static_cast<double>(k + 2);
  const double v = double(tau0) / std::pow(base, mu > Scalar(0) ? 7.0 : 4.0);
  return {v, v};
}

struct AbpdConfig {
  double tau0 = 1.0;
  double sigma0 = 1.0;
  double mu = 0.0;
  long max_iters = 100;
  double delta_param = 1.0;
  double l_g = 1.0;
  bool strict = false;
  bool track_ergodic = true;
  std::function<InexactTarget(long k)> schedule;  // empty: canonical schedule

  void validate() const {
    if (!(tau0 > 0.0) || !(sigma0 > 0.0)) throw ConfigError("abpd: tau0 and sigma0 must be positive");
    if (mu < 0.0) throw ConfigError("abpd: mu must be nonnegative");
    if (max_iters < 0) throw ConfigError("abpd: iteration count must be nonnegative");
    if (!(delta_param > 0.0) || !(l_g > 0.0)) throw ConfigError("abpd: delta and L_g must be positive");
    if (tau0 * sigma0 > delta_param / l_g * (1.0 + 1e-12))
      throw ConfigError("abpd: tau0*sigma0 exceeds delta/L_g");
    if (mu > 0.0 && mu * tau0 > 2.0 * (1.0 + 1e-12)) throw ConfigError("abpd: mu*tau0 must not exceed 2");
  }

  InexactTarget target(long k) const { return schedule ? schedule(k) : inexactness_schedule(k, tau0, mu); }
};

// Largest sigma0 meeting both tau0 sigma0 <= delta / L_g and the classical tau0 sigma0 L_g^2 <= delta
// (the dual-coupling estimate needs ||g(x) - g(x')||^2 <= 2 L_g^2 D).
inline double default_sigma0(double tau0, double l_g, double delta = 1.0) {
  return delta / (tau0 * std::max(l_g, l_g * l_g));
}

struct AbpdRecord {
  long k = 0;
  double objective = 0.0;       // f(x_{k+1})
  double max_violation = 0.0;   // max_i g_i(x_{k+1})
  double y_norm = 0.0;          // ||y_{k+1}||
  double tau = 0.0, sigma = 0.0;
  int inner_iterations = 0;
  double delta = 0.0, nu = 0.0;
  bool certified = false;
  double gap_bound = 0.0;
  double lagrangian = 0.0;          // f(x_{k+1}) + <y_{k+1}, g(x_{k+1})>
  double ergodic_objective = 0.0;   // f(xbar)
  double ergodic_violation = 0.0;   // ||[g(xbar)]_+||
  Eigen::VectorXd constraints;
};

template <typename Point>
struct AbpdState {
  Point x_curr, x_prev;
  Eigen::VectorXd y;
  StepParameters<double> params;
  double T = 0.0;
  Point xbar;
  Eigen::VectorXd ybar;
  long k = 0;
  Eigen::VectorXd g_curr, g_prev;
};

enum class Control { proceed, stop, refresh_constraints };

template <typename Point>
struct AbpdResult {
  Point xbar, x_last;
  Eigen::VectorXd ybar, y_last;
  std::vector<AbpdRecord> records;
  ParameterTrace<double> trace;
  double T = 0.0;
  int uncertified = 0;
  long iterations = 0;
};

template <typename B>
concept AbpdBackend = requires(B& b, const typename B::Point& p, const Eigen::VectorXd& y, double s,
                               InexactTarget tgt) {
  { b.objective(p) } -> std::convertible_to<double>;
  { b.constraints(p) } -> std::convertible_to<Eigen::VectorXd>;
  { b.solve(p, y, s, tgt) } -> std::same_as<SubproblemResult<typename B::Point>>;
  { b.blend(p, p, s) } -> std::convertible_to<typename B::Point>;
};

template <typename Point>
using AbpdMonitor = std::function<Control(AbpdState<Point>& state, const AbpdRecord& record)>;

template <AbpdBackend Backend>
AbpdResult<typename Backend::Point> abpd_run(Backend& backend, const AbpdConfig& cfg, const typename Backend::Point& x0,
                                             std::optional<Eigen::VectorXd> y0 = std::nullopt,
                                             AbpdMonitor<typename Backend::Point> monitor = {}) {
  using Point = typename Backend::Point;
  cfg.validate();
  AbpdState<Point> s;
  s.x_curr = x0;
  s.x_prev = x0;
  s.g_curr = backend.constraints(x0);
  s.g_prev = s.g_curr;
  const Eigen::Index m = s.g_curr.size();
  s.y = y0 ? *y0 : Eigen::VectorXd::Zero(m);
  if (s.y.size() != m || (s.y.array() < 0.0).any()) throw ConfigError("abpd: y0 must be nonnegative with length m");
  s.params = initial_parameters(cfg.tau0, cfg.sigma0);
  s.xbar = x0;
  s.ybar = Eigen::VectorXd::Zero(m);

  AbpdResult<Point> out;
  out.records.reserve(static_cast<std::size_t>(cfg.max_iters));
  for (s.k = 0; s.k < cfg.max_iters; ++s.k) {
    const auto& p = s.params;
    out.trace.push_back(p);
    s.y = dual_step(s.y, p.sigma, s.g_curr, s.g_prev, p.theta);
    const InexactTarget target = cfg.target(s.k);
    auto res = backend.solve(s.x_curr, s.y, p.tau, target);
    if (!res.cert.certified) {
      ++out.uncertified;
      if (cfg.strict)
        throw SolverError("abpd: subproblem " + std::to_string(s.k) + " not certified (bound " +
                              std::to_string(res.cert.gap_bound) + " > " + std::to_string(res.cert.target) + ")",
                          res.cert);
    }
    s.x_prev = std::move(s.x_curr);
    s.x_curr = std::move(res.x);
    s.g_prev = std::move(s.g_curr);
    s.g_curr = backend.constraints(s.x_curr);

    s.T += p.t;
    const double w = p.t / s.T;
    s.xbar = backend.blend(s.xbar, s.x_curr, w);
    s.ybar += w * (s.y - s.ybar);

    AbpdRecord r;
    r.k = s.k;
    r.objective = backend.objective(s.x_curr);
    r.constraints = s.g_curr;
    r.max_violation = m ? s.g_curr.maxCoeff() : 0.0;
    r.y_norm = s.y.norm();
    r.tau = p.tau;
    r.sigma = p.sigma;
    r.inner_iterations = res.cert.inner_iterations;
    r.delta = target.delta;
    r.nu = target.nu;
    r.certified = res.cert.certified;
    r.gap_bound = res.cert.gap_bound;
    r.lagrangian = r.objective + (m ? s.y.dot(s.g_curr) : 0.0);
    if (cfg.track_ergodic) {
      r.ergodic_objective = backend.objective(s.xbar);
      r.ergodic_violation = m ? backend.constraints(s.xbar).cwiseMax(0.0).norm() : 0.0;
    }
    out.records.push_back(std::move(r));

    s.params = advance_parameters(s.params, cfg.mu);
    if (monitor) {
      const Control c = monitor(s, out.records.back());
      if (c == Control::refresh_constraints) {
        s.g_curr = backend.constraints(s.x_curr);
        s.g_prev = backend.constraints(s.x_prev);
      } else if (c == Control::stop) {
        ++s.k;
        break;
      }
    }
  }
  out.iterations = static_cast<long>(out.records.size());
  out.xbar = std::move(s.xbar);
  out.x_last = std::move(s.x_curr);
  out.ybar = std::move(s.ybar);
  out.y_last = std::move(s.y);
  out.T = s.T;
  return out;
}

inline void write_diagnostics_csv(std::ostream& os, const std::vector<AbpdRecord>& records) {
  os << "k,f,max_violation,y_norm,tau,sigma,inner_iters\n";
  char buf[256];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%ld,%.10g,%.10g,%.10g,%.10g,%.10g,%d\n", r.k, r.objective, r.max_violation,
                  r.y_norm, r.tau, r.sigma, r.inner_iterations);
    os << buf;
  }
}

}  // namespace bregcon
