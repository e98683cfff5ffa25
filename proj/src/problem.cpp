#include "bregcon/problem.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace bregcon {

double RelativeConstants::rho() const {
  double r = 0.0;
  for (double v : l_h) r = std::max(r, v);
  return r;
}

Eigen::VectorXd ConstrainedProblem::constraint_values(const Eigen::VectorXd& x) const {
  Eigen::VectorXd g(num_constraints());
  for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = constraints[i](x, nullptr) - offset(i);
  return g;
}

double ConstrainedProblem::combined(const Eigen::VectorXd& x, const Eigen::VectorXd& y, Eigen::VectorXd* grad) const {
  if (weighted_sum) return weighted_sum(x, y, grad);
  Eigen::VectorXd tmp;
  double val = objective(x, grad);
  for (Eigen::Index i = 0; i < num_constraints(); ++i) {
    if (y(i) == 0.0) continue;
    val += y(i) * constraints[i](x, grad ? &tmp : nullptr);
    if (grad) *grad += y(i) * tmp;
  }
  return val;
}

double lagrangian(const ConstrainedProblem& problem, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (y.size() != problem.num_constraints()) throw ProblemError("lagrangian: multiplier length mismatch");
  if ((y.array() < 0.0).any()) throw ProblemError("lagrangian: negative multiplier");
  double val = problem.objective_value(x);
  if (y.size()) val += y.dot(problem.constraint_values(x));
  return val;
}

double DcConstraint::value(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const {
  if (!grad) return value(x);
  Eigen::VectorXd gh;
  const double g = g_part(x, grad);
  const double h = h_part(x, &gh);
  *grad -= gh;
  return g - h - eta;
}

double DcProblem::rho() const {
  double r = 0.0;
  for (const auto& c : constraints) r = std::max(r, c.l_h);
  return r;
}

Eigen::VectorXd DcProblem::constraint_values(const Eigen::VectorXd& x) const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(constraints.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = constraints[i].value(x);
  return v;
}

double DcProblem::max_violation(const Eigen::VectorXd& x) const {
  if (constraints.empty()) return -std::numeric_limits<double>::infinity();
  return constraint_values(x).maxCoeff();
}

Eigen::Index DcProblem::max_violation_index(const Eigen::VectorXd& x) const {
  if (constraints.empty()) return -1;
  Eigen::Index idx = 0;
  constraint_values(x).maxCoeff(&idx);  // first maximum
  return idx;
}

// ---------------------------------------------------------------- softmax

SoftmaxCache::SoftmaxCache(const Eigen::MatrixXd& scores) {
  const Eigen::Index n = scores.rows();
  log_norm.resize(n);
  log_prob.resize(n, scores.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = scores.row(i).maxCoeff();
    const double s = (scores.row(i).array() - m).exp().sum();
    log_norm(i) = m + std::log(s);
    log_prob.row(i) = scores.row(i).array() - log_norm(i);
  }
  prob = log_prob.array().exp();
}

CrossEntropy cross_entropy_loss(const Eigen::MatrixXd& scores, const Eigen::VectorXi& labels,
                                const Eigen::VectorXd& weights) {
  if (labels.size() != scores.rows() || weights.size() != scores.rows())
    throw ProblemError("cross_entropy_loss: dimension mismatch");
  SoftmaxCache sm(scores);
  CrossEntropy out;
  out.gradient = Eigen::MatrixXd::Zero(scores.rows(), scores.cols());
  WeightedLoss wl{weights, 0.0};
  out.loss = wl.accumulate(sm, labels, 1.0, &out.gradient, nullptr);
  return out;
}

Eigen::MatrixXd shrink_predictions(const Eigen::MatrixXd& probs, double floor) {
  Eigen::MatrixXd q = probs.cwiseMax(floor);
  for (Eigen::Index i = 0; i < q.rows(); ++i) q.row(i) /= q.row(i).sum();
  return q;
}

double WeightedLoss::evaluate(const SoftmaxCache& sm, const Eigen::VectorXi& labels) const {
  return accumulate(sm, labels, 1.0, nullptr, nullptr);
}

double WeightedLoss::accumulate(const SoftmaxCache& sm, const Eigen::VectorXi& labels, double coef,
                                Eigen::MatrixXd* grad, Eigen::MatrixXd* hess) const {
  const Eigen::Index n = sm.prob.rows();
  const Eigen::Index J = sm.prob.cols();
  if (weights.size() != n || labels.size() != n) throw ProblemError("weighted loss: dimension mismatch");
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double c = weights(i);
    if (c == 0.0) continue;
    const int b = labels(i);
    if (b < 0 || b >= J) throw ProblemError("weighted loss: label out of range");
    const auto p = sm.prob.row(i);
    double clamped_mass = 0.0, free_mass = 0.0;
    int n_clamped = 0;
    if (shrink_floor > 0.0) {
      for (Eigen::Index j = 0; j < J; ++j) {
        if (p(j) < shrink_floor) {
          ++n_clamped;
          clamped_mass += shrink_floor;
        } else {
          free_mass += p(j);
        }
      }
    }
    const double nll = -sm.log_prob(i, b);
    if (n_clamped == 0) {
      total += c * nll;
      if (grad) {
        grad->row(i) += coef * c * p;
        (*grad)(i, b) -= coef * c;
      }
    } else {
      const double z = clamped_mass + free_mass;
      const bool b_clamped = p(b) < shrink_floor;
      total += c * ((b_clamped ? -std::log(shrink_floor) : nll) + std::log(z));
      if (grad) {
        for (Eigen::Index k = 0; k < J; ++k) {
          double v = (p(k) >= shrink_floor ? p(k) : 0.0) - free_mass * p(k);
          double gk = v / z;
          if (!b_clamped) gk += p(k) - (k == b ? 1.0 : 0.0);
          (*grad)(i, k) += coef * c * gk;
        }
      }
    }
    if (hess) hess->row(i) += coef * c * (p.array() * (1.0 - p.array())).matrix();
  }
  return coef * total;
}

double ScoreProblem::prox_value(const Eigen::MatrixXd& scores) const {
  if (prox_weight == 0.0) return 0.0;
  return prox_weight * 0.5 * (scores - prox_center).squaredNorm();
}

double ScoreProblem::objective_value(const Eigen::MatrixXd& scores) const {
  SoftmaxCache sm(scores);
  return objective.evaluate(sm, labels) + prox_value(scores);
}

Eigen::VectorXd ScoreProblem::constraint_values(const Eigen::MatrixXd& scores) const {
  SoftmaxCache sm(scores);
  const double prox = prox_value(scores);
  Eigen::VectorXd g(num_constraints());
  for (Eigen::Index i = 0; i < g.size(); ++i)
    g(i) = constraints[i].evaluate(sm, labels) - (offsets.size() ? offsets(i) : 0.0) + prox;
  return g;
}

double ScoreProblem::combined(const Eigen::MatrixXd& scores, const Eigen::VectorXd& y, Eigen::MatrixXd* grad,
                              Eigen::MatrixXd* hess) const {
  SoftmaxCache sm(scores);
  if (grad) grad->setZero(scores.rows(), scores.cols());
  if (hess) hess->setZero(scores.rows(), scores.cols());
  double val = objective.accumulate(sm, labels, 1.0, grad, hess);
  for (Eigen::Index i = 0; i < num_constraints(); ++i) {
    if (y(i) == 0.0) continue;
    val += constraints[i].accumulate(sm, labels, y(i), grad, hess);
  }
  if (prox_weight != 0.0) {
    const double kappa = prox_weight * (1.0 + y.sum());
    val += kappa * 0.5 * (scores - prox_center).squaredNorm();
    if (grad) *grad += kappa * (scores - prox_center);
    if (hess) hess->array() += kappa;
  }
  return val;
}

// ------------------------------------------------------------------ NPC

Eigen::VectorXd balanced_weights(const Eigen::VectorXi& labels, int classes) {
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(classes);
  for (Eigen::Index i = 0; i < labels.size(); ++i) counts(labels(i)) += 1.0;
  Eigen::VectorXd w(labels.size());
  const double n = static_cast<double>(labels.size());
  for (Eigen::Index i = 0; i < labels.size(); ++i) w(i) = n / (classes * counts(labels(i)));
  return w;
}

ScoreProblem build_npc_scores(const Eigen::VectorXi& labels, int classes, const NpcSpec& spec) {
  if (labels.size() == 0) throw ProblemError("npc: empty dataset");
  if (spec.constrained_classes.empty()) throw ProblemError("npc: no constrained classes");
  if (spec.alpha.size() != static_cast<Eigen::Index>(spec.constrained_classes.size()))
    throw ProblemError("npc: alpha length does not match constrained classes");
  ScoreProblem sp;
  sp.labels = labels;
  sp.classes = classes;
  sp.objective.weights = spec.sample_weights.size() ? spec.sample_weights : balanced_weights(labels, classes);
  if (sp.objective.weights.size() != labels.size()) throw ProblemError("npc: sample weight length mismatch");
  for (int c : spec.constrained_classes) {
    if (c < 0 || c >= classes || (labels.array() == c).count() == 0)
      throw ProblemError("npc: constrained class " + std::to_string(c) + " absent from data");
    WeightedLoss wl;
    wl.weights = (labels.array() == c).cast<double>().matrix();
    wl.shrink_floor = spec.shrink_floor;
    sp.constraints.push_back(std::move(wl));
  }
  sp.offsets = spec.alpha;
  sp.constants.mu = 0.0;
  sp.constants.l_g = 1.0;
  return sp;
}

namespace {

struct LinearData {
  Eigen::MatrixXd design;
  Eigen::VectorXi labels;
  int classes;
};

double linear_eval(const LinearData& d, const std::vector<std::pair<const WeightedLoss*, double>>& terms,
                   double ridge, const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
  const Eigen::Index p = d.design.cols();
  Eigen::Map<const Eigen::MatrixXd> X(x.data(), p, d.classes);
  const Eigen::MatrixXd scores = d.design * X;
  SoftmaxCache sm(scores);
  Eigen::MatrixXd gs;
  if (grad) gs = Eigen::MatrixXd::Zero(scores.rows(), scores.cols());
  double val = 0.5 * ridge * x.squaredNorm();
  for (const auto& [loss, coef] : terms) {
    if (coef == 0.0) continue;
    val += loss->accumulate(sm, d.labels, coef, grad ? &gs : nullptr, nullptr);
  }
  if (grad) {
    grad->resize(x.size());
    Eigen::Map<Eigen::MatrixXd> G(grad->data(), p, d.classes);
    G.noalias() = d.design.transpose() * gs;
    *grad += ridge * x;
  }
  return val;
}

Oracle linear_oracle(std::shared_ptr<const LinearData> d, WeightedLoss loss, double ridge) {
  auto held = std::make_shared<const WeightedLoss>(std::move(loss));
  return [d, held, ridge](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    return linear_eval(*d, {{held.get(), 1.0}}, ridge, x, grad);
  };
}

double sum_row_norms(const Eigen::MatrixXd& a) { return a.rowwise().norm().sum(); }

// Bound on ||grad_X sum_i c_i CE_i||: |c_i| ||a_i|| ||p - e|| with ||p - e|| <= sqrt(2).
double linear_loss_lipschitz(const Eigen::MatrixXd& design, const Eigen::VectorXd& c) {
  return std::sqrt(2.0) * (c.cwiseAbs().array() * design.rowwise().norm().array()).sum();
}

}  // namespace

ConstrainedProblem linear_problem(const ScoreProblem& sp, const Eigen::MatrixXd& design, double ridge) {
  if (design.rows() != sp.samples()) throw ProblemError("linear problem: design rows mismatch");
  if (sp.prox_weight != 0.0) throw ProblemError("linear problem: score-space prox not supported");
  auto d = std::make_shared<const LinearData>(LinearData{design, sp.labels, sp.classes});
  ConstrainedProblem cp;
  cp.geometry = Geometry::identity(design.cols() * sp.classes);
  cp.objective = linear_oracle(d, sp.objective, ridge);
  for (const auto& c : sp.constraints) cp.constraints.push_back(linear_oracle(d, c, 0.0));
  cp.offsets = sp.offsets.size() ? sp.offsets : Eigen::VectorXd::Zero(sp.num_constraints());
  auto all = std::make_shared<const ScoreProblem>(sp);
  cp.weighted_sum = [d, all, ridge](const Eigen::VectorXd& x, const Eigen::VectorXd& y, Eigen::VectorXd* grad) {
    std::vector<std::pair<const WeightedLoss*, double>> terms{{&all->objective, 1.0}};
    for (Eigen::Index i = 0; i < all->num_constraints(); ++i) terms.emplace_back(&all->constraints[i], y(i));
    return linear_eval(*d, terms, ridge, x, grad);
  };
  cp.constants.mu = ridge;
  cp.constants.l_g = sum_row_norms(design);
  return cp;
}

ConstrainedProblem build_npc_problem(const Dataset& data, const NpcSpec& spec, double ridge) {
  return linear_problem(build_npc_scores(data.labels, data.num_classes(), spec), design_matrix(data.features), ridge);
}

Eigen::VectorXd estimate_alpha(const Eigen::VectorXi& labels, int classes, const std::vector<int>& constrained,
                               const Eigen::VectorXd& expected_rates, AlphaPhase phase,
                               const Eigen::MatrixXd* current_scores, double shrink_floor) {
  if (expected_rates.size() != static_cast<Eigen::Index>(constrained.size()))
    throw ProblemError("estimate_alpha: one rate per constrained class required");
  Eigen::VectorXd alpha(expected_rates.size());
  if (phase == AlphaPhase::initial) {
    for (Eigen::Index k = 0; k < alpha.size(); ++k) {
      const double nk = static_cast<double>((labels.array() == constrained[k]).count());
      alpha(k) = nk * expected_rates(k) * std::log(static_cast<double>(classes));
    }
    return alpha;
  }
  if (!current_scores) throw ProblemError("estimate_alpha: refit needs current scores");
  SoftmaxCache sm(*current_scores);
  const Eigen::MatrixXd probs = shrink_floor > 0.0 ? shrink_predictions(sm.prob, shrink_floor) : sm.prob;
  for (Eigen::Index k = 0; k < alpha.size(); ++k) {
    const int c = constrained[k];
    double acc = 0.0;
    for (Eigen::Index i = 0; i < labels.size(); ++i) {
      if (labels(i) != c) continue;
      // log of the true-class probability; the log-softmax form avoids log(0) when no floor is set
      acc += shrink_floor > 0.0 ? std::log(probs(i, c)) : (*current_scores)(i, c) - sm.log_norm(i);
    }
    alpha(k) = -expected_rates(k) * acc;
  }
  return alpha;
}

Eigen::VectorXd estimate_alpha(const Dataset& data, const Eigen::VectorXd& expected_rates,
                               const std::vector<int>& constrained, AlphaPhase phase,
                               const Eigen::MatrixXd* current_scores, double shrink_floor) {
  return estimate_alpha(data.labels, data.num_classes(), constrained, expected_rates, phase, current_scores,
                        shrink_floor);
}

// ------------------------------------------------------------- fairness

FairnessSpec FairnessSpec::uniform(const Eigen::VectorXi& groups, int num_groups, double alpha, double scale) {
  FairnessSpec s;
  s.groups = groups;
  s.group_sizes = Eigen::VectorXi::Zero(num_groups);
  for (Eigen::Index i = 0; i < groups.size(); ++i) {
    if (groups(i) < 0 || groups(i) >= num_groups) throw ProblemError("fairness: group label out of range");
    s.group_sizes(groups(i)) += 1;
  }
  s.alpha_pairs = Eigen::MatrixXd::Constant(num_groups, num_groups, alpha);
  s.alpha_pairs.diagonal().setZero();
  s.constraint_scale = scale;
  return s;
}

double ScoreDcProblem::rho() const {
  double r = 0.0;
  for (const auto& c : constraints) r = std::max(r, c.l_h);
  return r;
}

double ScoreDcProblem::objective_value(const Eigen::MatrixXd& scores) const {
  return objective.evaluate(SoftmaxCache(scores), labels);
}

Eigen::VectorXd ScoreDcProblem::constraint_values(const Eigen::MatrixXd& scores) const {
  SoftmaxCache sm(scores);
  Eigen::VectorXd v(static_cast<Eigen::Index>(constraints.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const auto& c = constraints[i];
    v(i) = WeightedLoss{c.g_weights, 0.0}.evaluate(sm, labels) - WeightedLoss{c.h_weights, 0.0}.evaluate(sm, labels) -
           c.eta;
  }
  return v;
}

double ScoreDcProblem::max_violation(const Eigen::MatrixXd& scores) const {
  if (constraints.empty()) return -std::numeric_limits<double>::infinity();
  return constraint_values(scores).maxCoeff();
}

Eigen::VectorXd group_losses(const Eigen::MatrixXd& scores, const Eigen::VectorXi& labels,
                             const Eigen::VectorXi& groups, int num_groups) {
  SoftmaxCache sm(scores);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(num_groups), cnt = Eigen::VectorXd::Zero(num_groups);
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    sum(groups(i)) += sm.log_norm(i) - scores(i, labels(i));
    cnt(groups(i)) += 1.0;
  }
  for (int k = 0; k < num_groups; ++k) sum(k) = cnt(k) > 0 ? sum(k) / cnt(k) : 0.0;
  return sum;
}

ScoreDcProblem build_fairness_scores(const Eigen::VectorXi& labels, int classes, const FairnessSpec& spec) {
  const int S = static_cast<int>(spec.group_sizes.size());
  if (S < 2) throw ProblemError("fairness: at least two groups required");
  if (spec.groups.size() != labels.size()) throw ProblemError("fairness: every sample needs a group label");
  if (spec.group_sizes.sum() != labels.size()) throw ProblemError("fairness: group sizes do not sum to n");
  for (int k = 0; k < S; ++k)
    if (spec.group_sizes(k) == 0) throw ProblemError("fairness: group " + std::to_string(k) + " is empty");

  ScoreDcProblem dc;
  dc.labels = labels;
  dc.classes = classes;
  dc.objective.weights = Eigen::VectorXd::Ones(labels.size());
  auto member = [&](int k) {
    return ((spec.groups.array() == k).cast<double>() * (spec.constraint_scale / spec.group_sizes(k))).matrix();
  };
  for (int j = 0; j < S; ++j) {
    for (int l = j + 1; l < S; ++l) {
      const double a = spec.alpha_pairs(j, l);
      if (std::isinf(a) && a > 0.0) continue;  // no constraint for this pair
      for (auto [gj, hl] : {std::pair{j, l}, std::pair{l, j}}) {
        ScoreDcConstraint c;
        c.g_weights = member(gj);
        c.h_weights = member(hl);
        c.eta = spec.constraint_scale * a;
        c.l_h = 0.5 * spec.constraint_scale / spec.group_sizes(hl);
        c.group_g = gj;
        c.group_h = hl;
        dc.constraints.push_back(std::move(c));
      }
    }
  }
  return dc;
}

double linear_group_smoothness(const Eigen::MatrixXd& design, const Eigen::VectorXi& groups, int group, double scale) {
  double acc = 0.0;
  Eigen::Index nk = 0;
  for (Eigen::Index i = 0; i < design.rows(); ++i) {
    if (groups(i) != group) continue;
    acc += design.row(i).squaredNorm();
    ++nk;
  }
  if (nk == 0) throw ProblemError("fairness: empty group");
  return scale * 0.5 * acc / static_cast<double>(nk);
}

DcProblem linear_dc_problem(const ScoreDcProblem& sp, const Eigen::MatrixXd& design, double ridge,
                            std::optional<BoxD> box) {
  auto d = std::make_shared<const LinearData>(LinearData{design, sp.labels, sp.classes});
  DcProblem dc;
  dc.geometry = Geometry::identity(design.cols() * sp.classes);
  dc.objective = linear_oracle(d, sp.objective, ridge);
  dc.mu = ridge;
  dc.box = std::move(box);
  dc.objective_lipschitz = linear_loss_lipschitz(design, sp.objective.weights);
  const Eigen::VectorXd sq = design.rowwise().squaredNorm();
  for (const auto& c : sp.constraints) {
    DcConstraint dcc;
    dcc.g_part = linear_oracle(d, WeightedLoss{c.g_weights, 0.0}, 0.0);
    dcc.h_part = linear_oracle(d, WeightedLoss{c.h_weights, 0.0}, 0.0);
    dcc.eta = c.eta;
    dcc.l_h = 0.5 * c.h_weights.cwiseAbs().dot(sq);
    dcc.lipschitz = linear_loss_lipschitz(design, c.g_weights - c.h_weights);
    dc.constraints.push_back(std::move(dcc));
  }
  if (dc.box && ridge > 0.0) dc.objective_lipschitz += ridge * dc.box->upper.cwiseAbs().cwiseMax(dc.box->lower.cwiseAbs()).norm();
  return dc;
}

DcProblem build_fairness_problem(const Dataset& data, const FairnessSpec& spec, double ridge, std::optional<BoxD> box) {
  return linear_dc_problem(build_fairness_scores(data.labels, data.num_classes(), spec), design_matrix(data.features),
                           ridge, std::move(box));
}

}  // namespace bregcon
