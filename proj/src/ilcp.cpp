#include "bregcon/ilcp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bregcon {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double complementarity_max(const Eigen::VectorXd& y_normalized, const Eigen::VectorXd& values) {
  double c = 0.0;
  for (Eigen::Index i = 0; i < values.size(); ++i) c = std::max(c, std::sqrt(std::abs(y_normalized(i) * values(i))));
  return c;
}

}  // namespace

void IlcpConfig::validate(double rho, double sigma_max) const {
  if (!(eps > 0.0)) throw ConfigError("ilcp: eps must be positive");
  if (max_outer < 0) throw ConfigError("ilcp: max_outer must be nonnegative");
  const double bound = std::max(rho, 1.0 / sigma_max);
  if (!(L > bound)) throw ConfigError("ilcp: L must exceed max(rho, 1/sigma_max) = " + std::to_string(bound));
  if (eps34 && !(*eps34 > 0.0)) throw ConfigError("ilcp: eps34 must be positive");
  if (check_every < 1) throw ConfigError("ilcp: check_every must be at least 1");
}

double IlcpConfig::eps34_value(double rho, double sigma_min, double sigma_max) const {
  return (L - rho) * eps * eps * sigma_min / (4.0 * L * L * sigma_max * sigma_max);
}

double strong_convexity_lower_bound(const Oracle& F, Eigen::VectorXd u, double modulus, const BoxD* box, int steps) {
  if (!(modulus > 0.0)) return -kInf;
  Eigen::VectorXd g, gp;
  double fu = F(u, &g);
  double lip = 1.0;
  double best = -kInf;
  for (int s = 0; s < steps; ++s) {
    Eigen::VectorXd up;
    double fp = 0.0, slack = 0.0;
    for (int bt = 0; bt < 200; ++bt) {
      up = u - g / lip;
      if (box) up = box->project(up);
      fp = F(up, &gp);
      const Eigen::VectorXd d = up - u;
      slack = 1e-15 * std::max(1.0, std::abs(fu));
      if (std::isfinite(fp) && fp <= fu + g.dot(d) + 0.5 * lip * d.squaredNorm() + slack) break;
      lip *= 2.0;
    }
    const double gm2 = (lip * (u - up)).squaredNorm();
    best = std::max(best, fp + gm2 / (2.0 * lip) - gm2 / (2.0 * modulus) - slack);
    if (gm2 == 0.0) break;
    u = std::move(up);
    g = gp;
    fu = fp;
    lip *= 0.5;
  }
  return best;
}

// ------------------------------------------------------------- vector model

ConstrainedProblem assemble_subproblem(const DcProblem& dc, const Eigen::VectorXd& anchor, double L,
                                       double l_g_override) {
  const double rho = dc.rho();
  if (!(L > rho)) throw ProblemError("subproblem not convex: L <= rho");
  if (anchor.size() != dc.dim()) throw ProblemError("assemble_subproblem: anchor dimension mismatch");
  const Geometry geom = dc.geometry;
  ConstrainedProblem p;
  p.geometry = geom;
  p.feasible_box = dc.box;
  auto prox = [geom, anchor, L](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    if (grad) *grad += L * geom.gradient(x, anchor);
    return L * geom.divergence(x, anchor);
  };
  Oracle f = dc.objective;
  p.objective = [f, prox](const Eigen::VectorXd& x, Eigen::VectorXd* grad) { return f(x, grad) + prox(x, grad); };
  const Eigen::Index m = static_cast<Eigen::Index>(dc.constraints.size());
  p.offsets.resize(m);
  double lg2 = 0.0;
  const double reach =
      dc.box && dc.box->bounded() ? L * geom.sigma_max() * (dc.box->upper - dc.box->lower).norm() : kInf;
  for (Eigen::Index i = 0; i < m; ++i) {
    const DcConstraint c = dc.constraints[static_cast<std::size_t>(i)];
    p.constraints.push_back([c, prox](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
      if (grad) grad->setZero(x.size());
      Eigen::VectorXd gi;
      const double v = c.value(x, grad ? &gi : nullptr) + c.eta;
      if (grad) *grad = gi;
      return v + prox(x, grad);
    });
    p.offsets(i) = c.eta;
    p.constants.l_h.push_back(0.0);
    lg2 += std::pow(c.lipschitz + reach, 2);
  }
  p.constants.mu = L - rho;
  if (l_g_override > 0.0) {
    p.constants.l_g = l_g_override;
  } else if (m == 0) {
    p.constants.l_g = 1.0;
  } else {
    const double smin = geom.sigma_min_effective();
    p.constants.l_g = std::sqrt(lg2) / std::sqrt(smin);
    if (!std::isfinite(p.constants.l_g))
      throw ProblemError("assemble_subproblem: constraint Lipschitz bound unknown; supply an L_g override");
  }
  return p;
}

FjResidual fj_residual(const DcProblem& dc, const Eigen::VectorXd& x, const Eigen::VectorXd& multipliers) {
  const Eigen::Index m = static_cast<Eigen::Index>(dc.constraints.size());
  const Eigen::VectorXd ym = multipliers.size() ? multipliers : Eigen::VectorXd::Zero(m);
  FjResidual r;
  const double total = 1.0 + ym.sum();
  r.y0 = 1.0 / total;
  r.y = ym / total;
  Eigen::VectorXd v = Eigen::VectorXd::Zero(x.size()), g = Eigen::VectorXd::Zero(x.size());
  dc.objective(x, &g);
  v += r.y0 * g;
  Eigen::VectorXd values(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    g.setZero(x.size());
    values(i) = dc.constraints[static_cast<std::size_t>(i)].value(x, &g);
    v += r.y(i) * g;
  }
  r.stationarity = dc.box ? dc.box->stationarity(x, v) : v.norm();
  r.complementarity.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) r.complementarity(i) = std::sqrt(std::abs(r.y(i) * values(i)));
  r.feasibility = m ? values.maxCoeff() : -kInf;
  return r;
}

VectorDcModel::Sub VectorDcModel::subproblem(const Point& anchor, const IlcpConfig& cfg) const {
  Sub s;
  s.problem = std::make_unique<ConstrainedProblem>(assemble_subproblem(*dc_, anchor, cfg.L, cfg.l_g));
  s.solver = std::make_unique<LinearBackend>(*s.problem, opts_);
  s.anchor = anchor;
  s.dc = dc_;
  s.L = cfg.L;
  return s;
}

double VectorDcModel::Sub::max_violation(const Point& x) const {
  const Eigen::VectorXd c = problem->constraint_values(x);
  return c.size() ? c.maxCoeff() : -kInf;
}

double VectorDcModel::Sub::gap_bound(const Point& x, const Eigen::VectorXd& y) const {
  const auto& geom = problem->geometry;
  if (geom.rank_deficient()) return kInf;
  double rel = dc->mu + L;
  for (Eigen::Index i = 0; i < y.size(); ++i) rel += y(i) * (L - dc->constraints[static_cast<std::size_t>(i)].l_h);
  const double offset = y.size() ? y.dot(problem->offsets) : 0.0;
  const ConstrainedProblem* p = problem.get();
  Oracle F = [p, &y, offset](const Eigen::VectorXd& u, Eigen::VectorXd* grad) {
    return p->combined(u, y, grad) - offset;
  };
  const BoxD* box = problem->feasible_box ? &*problem->feasible_box : nullptr;
  const double lb = strong_convexity_lower_bound(F, x, rel * geom.sigma_min(), box, 30);
  return problem->objective_value(x) - lb;
}

double VectorDcModel::Sub::slack(const Point& x, const Eigen::VectorXd& y) const {
  Eigen::VectorXd grad;
  problem->combined(x, y, &grad);
  const double total = 1.0 + y.sum();
  grad /= total;
  const double stat = problem->feasible_box ? problem->feasible_box->stationarity(x, grad) : grad.norm();
  return std::max(stat, complementarity_max(y / total, problem->constraint_values(x)));
}

// -------------------------------------------------------------- score model

FjResidual fj_residual(const ScoreDcProblem& dc, const Eigen::MatrixXd& scores, const Eigen::VectorXd& multipliers) {
  const Eigen::Index m = static_cast<Eigen::Index>(dc.constraints.size());
  const Eigen::VectorXd ym = multipliers.size() ? multipliers : Eigen::VectorXd::Zero(m);
  FjResidual r;
  const double total = 1.0 + ym.sum();
  r.y0 = 1.0 / total;
  r.y = ym / total;
  SoftmaxCache sm(scores);
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(scores.rows(), scores.cols());
  dc.objective.accumulate(sm, dc.labels, r.y0, &v, nullptr);
  for (Eigen::Index i = 0; i < m; ++i)
    dc.constraints[static_cast<std::size_t>(i)].difference().accumulate(sm, dc.labels, r.y(i), &v, nullptr);
  r.stationarity = v.norm();
  const Eigen::VectorXd values = dc.constraint_values(scores);
  r.complementarity.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) r.complementarity(i) = std::sqrt(std::abs(r.y(i) * values(i)));
  r.feasibility = m ? values.maxCoeff() : -kInf;
  return r;
}

ScoreDcModel::Sub ScoreDcModel::subproblem(const Point& anchor, const IlcpConfig& cfg) const {
  const double rho = dc_->rho();
  if (!(cfg.L > rho)) throw ProblemError("subproblem not convex: L <= rho");
  Sub s;
  s.problem = std::make_unique<ScoreProblem>();
  ScoreProblem& sp = *s.problem;
  sp.labels = dc_->labels;
  sp.classes = dc_->classes;
  sp.objective = dc_->objective;
  sp.offsets.resize(static_cast<Eigen::Index>(dc_->constraints.size()));
  for (std::size_t i = 0; i < dc_->constraints.size(); ++i) {
    const auto& c = dc_->constraints[i];
    sp.constraints.push_back(c.difference());
    sp.offsets(static_cast<Eigen::Index>(i)) = c.eta;
    sp.constants.l_h.push_back(c.l_h);
  }
  sp.prox_weight = cfg.L;
  sp.prox_center = anchor.scores;
  sp.constants.mu = cfg.L - rho;
  sp.constants.l_g = cfg.l_g > 0.0 ? cfg.l_g : 1.0;
  s.solver = std::make_unique<GbmBackend>(sp, *index_, params_);
  s.anchor = anchor.scores;
  s.dc = dc_;
  s.L = cfg.L;
  return s;
}

double ScoreDcModel::Sub::max_violation(const Point& x) const {
  const Eigen::VectorXd c = problem->constraint_values(x.scores);
  return c.size() ? c.maxCoeff() : -kInf;
}

double ScoreDcModel::Sub::gap_bound(const Point& x, const Eigen::VectorXd& y) const {
  double modulus = L * (1.0 + y.sum());
  for (Eigen::Index i = 0; i < y.size(); ++i) modulus -= y(i) * dc->constraints[static_cast<std::size_t>(i)].l_h;
  const Eigen::Index n = x.scores.rows(), J = x.scores.cols();
  const double offset = y.size() ? y.dot(problem->offsets) : 0.0;
  const ScoreProblem* p = problem.get();
  Oracle F = [p, &y, offset, n, J](const Eigen::VectorXd& u, Eigen::VectorXd* grad) {
    const Eigen::MatrixXd S = Eigen::Map<const Eigen::MatrixXd>(u.data(), n, J);
    Eigen::MatrixXd G;
    const double v = p->combined(S, y, grad ? &G : nullptr, nullptr) - offset;
    if (grad) *grad = Eigen::Map<const Eigen::VectorXd>(G.data(), G.size());
    return v;
  };
  const Eigen::VectorXd u = Eigen::Map<const Eigen::VectorXd>(x.scores.data(), x.scores.size());
  const double lb = strong_convexity_lower_bound(F, u, modulus, nullptr, 30);
  return problem->objective_value(x.scores) - lb;
}

double ScoreDcModel::Sub::slack(const Point& x, const Eigen::VectorXd& y) const {
  Eigen::MatrixXd grad;
  problem->combined(x.scores, y, &grad, nullptr);
  const double total = 1.0 + y.sum();
  return std::max(grad.norm() / total, complementarity_max(y / total, problem->constraint_values(x.scores)));
}

}  // namespace bregcon
