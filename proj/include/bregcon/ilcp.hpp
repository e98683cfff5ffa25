#pragma once

#include "bregcon/abpd.hpp"
#include "bregcon/problem.hpp"
#include "bregcon/solvers/gbm.hpp"
#include "bregcon/solvers/linear.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <optional>
#include <ostream>
#include <vector>

namespace bregcon {

class InfeasibleStart : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct IlcpConfig {
  double L = 2.0;
  double eps = 1e-2;
  long max_outer = 100;
  std::optional<double> eps34;

  // inner ABPD; zero means derive from the subproblem constants
  double tau0 = 0.0;
  double sigma0 = 0.0;
  long max_inner = 2000;
  long check_every = 5;
  double l_g = 0.0;  // override for the shifted constraints
  bool strict = false;

  void validate(double rho, double sigma_max) const;
  double eps34_value(double rho, double sigma_min, double sigma_max) const;
};

struct FjResidual {
  double y0 = 1.0;
  Eigen::VectorXd y;
  double stationarity = 0.0;
  Eigen::VectorXd complementarity;
  double feasibility = 0.0;

  double max_complementarity() const { return complementarity.size() ? complementarity.maxCoeff() : 0.0; }
};

struct IlcpRecord {
  long t = 0;
  double objective = 0.0;       // f(x^t)
  double max_violation = 0.0;   // phi_bar(x^t)
  double movement = 0.0;        // sqrt(2 D_W(x^{t+1}, x^t))
  double stationarity_estimate = 0.0;
  long inner_iterations = 0;
  bool certified = false;
  double gap_bound = 0.0;
  double sub_violation = 0.0;   // phi_bar_t(x^{t+1})
  double next_objective = 0.0;
  double next_violation = 0.0;
};

template <typename Point>
struct IlcpResult {
  Point x;
  std::vector<IlcpRecord> records;
  bool fj_stop = false;
  FjResidual residual;
  double slack = 0.0;
  Eigen::VectorXd multipliers;
  double eps34 = 0.0;
  int uncertified = 0;
};

inline void write_ilcp_csv(std::ostream& os, const std::vector<IlcpRecord>& records) {
  os << "t,f,phi_bar,movement,stationarity_estimate,inner_iters,f_next,phi_bar_next\n";
  char buf[256];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof buf, "%ld,%.10g,%.10g,%.10g,%.10g,%ld,%.10g,%.10g\n", r.t, r.objective, r.max_violation,
                  r.movement, r.stationarity_estimate, r.inner_iterations, r.next_objective, r.next_violation);
    os << buf;
  }
}

// max over a short projected-gradient run of F(u+) - ||G(u)||^2 / (2 m); a lower bound on min F.
double strong_convexity_lower_bound(const Oracle& F, Eigen::VectorXd u, double modulus, const BoxD* box, int steps);

// ------------------------------------------------------------- vector model

// phi_t^0 = f + L D_W(., anchor); constraint i: g_i - h_i + L D_W(., anchor) with offset eta_i.
ConstrainedProblem assemble_subproblem(const DcProblem& dc, const Eigen::VectorXd& anchor, double L,
                                       double l_g_override = 0.0);

FjResidual fj_residual(const DcProblem& dc, const Eigen::VectorXd& x, const Eigen::VectorXd& multipliers);

class VectorDcModel {
 public:
  using Point = Eigen::VectorXd;

  struct Sub {
    std::unique_ptr<ConstrainedProblem> problem;
    std::unique_ptr<LinearBackend> solver;
    Eigen::VectorXd anchor;
    const DcProblem* dc = nullptr;
    double L = 0.0;

    LinearBackend& backend() { return *solver; }
    double gap_bound(const Point& x, const Eigen::VectorXd& y) const;
    double max_violation(const Point& x) const;
    double slack(const Point& x, const Eigen::VectorXd& y) const;
  };

  explicit VectorDcModel(const DcProblem& dc, LinearSolverOptions opts = {}) : dc_(&dc), opts_(opts) {}

  double objective(const Point& x) const { return dc_->objective(x, nullptr); }
  double max_violation(const Point& x) const { return dc_->max_violation(x); }
  double divergence(const Point& a, const Point& b) const { return dc_->geometry.divergence(a, b); }
  double stationarity_scale(const Point& a, const Point& b) const { return dc_->geometry.gradient(a, b).norm(); }
  double rho() const { return dc_->rho(); }
  double sigma_min() const { return dc_->geometry.sigma_min_effective(); }
  double sigma_max() const { return dc_->geometry.sigma_max(); }
  double mu() const { return dc_->mu; }
  Sub subproblem(const Point& anchor, const IlcpConfig& cfg) const;
  FjResidual residual(const Point& x, const Eigen::VectorXd& y) const { return fj_residual(*dc_, x, y); }

 private:
  const DcProblem* dc_;
  LinearSolverOptions opts_;
};

// -------------------------------------------------------------- score model

FjResidual fj_residual(const ScoreDcProblem& dc, const Eigen::MatrixXd& scores, const Eigen::VectorXd& multipliers);

class ScoreDcModel {
 public:
  using Point = GbmModel;

  struct Sub {
    std::unique_ptr<ScoreProblem> problem;
    std::unique_ptr<GbmBackend> solver;
    Eigen::MatrixXd anchor;
    const ScoreDcProblem* dc = nullptr;
    double L = 0.0;

    GbmBackend& backend() { return *solver; }
    double gap_bound(const Point& x, const Eigen::VectorXd& y) const;
    double max_violation(const Point& x) const;
    double slack(const Point& x, const Eigen::VectorXd& y) const;
  };

  ScoreDcModel(const ScoreDcProblem& dc, const FeatureIndex& index, GbmParams params)
      : dc_(&dc), index_(&index), params_(params) {}

  double objective(const Point& x) const { return dc_->objective_value(x.scores); }
  double max_violation(const Point& x) const { return dc_->max_violation(x.scores); }
  double divergence(const Point& a, const Point& b) const { return score_divergence(a.scores, b.scores); }
  double stationarity_scale(const Point& a, const Point& b) const { return (a.scores - b.scores).norm(); }
  double rho() const { return dc_->rho(); }
  double sigma_min() const { return 1.0; }
  double sigma_max() const { return 1.0; }
  double mu() const { return 0.0; }
  Sub subproblem(const Point& anchor, const IlcpConfig& cfg) const;
  FjResidual residual(const Point& x, const Eigen::VectorXd& y) const { return fj_residual(*dc_, x.scores, y); }

 private:
  const ScoreDcProblem* dc_;
  const FeatureIndex* index_;
  GbmParams params_;
};

// ------------------------------------------------------------- outer loop

template <typename Model>
AbpdConfig inner_config(const Model& model, const IlcpConfig& cfg, double l_g) {
  AbpdConfig ac;
  ac.mu = cfg.L - model.rho();
  ac.tau0 = cfg.tau0 > 0.0 ? cfg.tau0 : 2.0 / ac.mu;
  ac.l_g = l_g;
  ac.sigma0 = cfg.sigma0 > 0.0 ? cfg.sigma0 : default_sigma0(ac.tau0, l_g, ac.delta_param);
  ac.max_iters = cfg.max_inner;
  ac.track_ergodic = false;
  return ac;
}

template <typename Model>
IlcpResult<typename Model::Point> ilcp_run(const Model& model, const IlcpConfig& cfg, const typename Model::Point& x0) {
  using Point = typename Model::Point;
  const double rho = model.rho();
  const double smin = model.sigma_min(), smax = model.sigma_max();
  cfg.validate(rho, smax);
  IlcpResult<Point> out;
  out.eps34 = cfg.eps34 ? *cfg.eps34 : cfg.eps34_value(rho, smin, smax);
  if (model.max_violation(x0) > 1e-12) throw InfeasibleStart("ilcp: infeasible start (phi_bar(x0) > 0)");

  const double trigger = cfg.eps / (cfg.L * smax);
  Point x = x0;
  Eigen::VectorXd mult;
  double slack = 0.0;
  for (long t = 0; t < cfg.max_outer; ++t) {
    auto sub = model.subproblem(x, cfg);
    const AbpdConfig ac = inner_config(model, cfg, sub.problem->constants.l_g);

    std::optional<Point> chosen;
    Eigen::VectorXd chosen_y;
    double chosen_gap = 0.0, chosen_viol = 0.0;
    auto try_certify = [&](const AbpdState<Point>& s) {
      const Point* cands[2] = {&s.x_curr, &s.xbar};
      const Eigen::VectorXd* ys[2] = {&s.ybar, &s.y};
      for (const Point* c : cands) {
        const double viol = sub.max_violation(*c);
        if (viol > out.eps34) continue;
        for (const Eigen::VectorXd* yy : ys) {
          const double gap = sub.gap_bound(*c, *yy);
          if (gap <= out.eps34) {
            chosen = *c;
            chosen_y = *yy;
            chosen_gap = gap;
            chosen_viol = viol;
            return true;
          }
        }
      }
      return false;
    };
    AbpdMonitor<Point> monitor = [&](AbpdState<Point>& s, const AbpdRecord&) {
      const bool last = s.k + 1 >= ac.max_iters;
      if (((s.k + 1) % cfg.check_every == 0 || last) && try_certify(s)) return Control::stop;
      return Control::proceed;
    };
    auto res = abpd_run(sub.backend(), ac, x, std::nullopt, monitor);

    IlcpRecord rec;
    rec.t = t;
    rec.objective = model.objective(x);
    rec.max_violation = model.max_violation(x);
    rec.inner_iterations = res.iterations;
    if (chosen) {
      rec.certified = true;
    } else {
      ++out.uncertified;
      if (cfg.strict) throw SolverError("ilcp: subproblem " + std::to_string(t) + " not certified", Certificate{});
      chosen = res.x_last;
      chosen_y = res.ybar;
      chosen_gap = sub.gap_bound(*chosen, chosen_y);
      chosen_viol = sub.max_violation(*chosen);
    }
    rec.gap_bound = chosen_gap;
    rec.sub_violation = chosen_viol;
    rec.movement = std::sqrt(2.0 * model.divergence(*chosen, x));
    rec.stationarity_estimate = cfg.L * model.stationarity_scale(*chosen, x);
    rec.next_objective = model.objective(*chosen);
    rec.next_violation = model.max_violation(*chosen);
    out.records.push_back(rec);
    mult = chosen_y;
    slack = sub.slack(*chosen, chosen_y);
    x = std::move(*chosen);
    if (rec.movement <= trigger) {
      out.fj_stop = true;
      break;
    }
  }
  out.x = x;
  out.multipliers = mult;
  out.slack = slack;
  if (mult.size() || out.records.empty()) {
    out.residual = model.residual(x, mult.size() ? mult : Eigen::VectorXd());
  }
  return out;
}

}  // namespace bregcon
