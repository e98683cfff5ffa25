#include "bregcon/solvers/gbm.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace bregcon {

GbmModel GbmModel::zero(Eigen::Index samples, int classes, double learning_rate, std::shared_ptr<LearnerPool> pool) {
  GbmModel m;
  m.pool = pool ? std::move(pool) : std::make_shared<LearnerPool>();
  m.scores = Eigen::MatrixXd::Zero(samples, classes);
  m.classes = classes;
  m.learning_rate = learning_rate;
  return m;
}

Eigen::Index GbmModel::active_learners() const { return (weights.array() != 0.0).count(); }

Eigen::MatrixXd GbmModel::predict_scores(const Eigen::MatrixXd& features) const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(features.rows(), classes);
  if (!pool) return out;
  for (std::size_t k = 0; k < pool->learners.size(); ++k) {
    const double w = weight(k);
    if (w == 0.0) continue;
    const auto& wl = pool->learners[k];
    for (Eigen::Index i = 0; i < features.rows(); ++i) out(i, wl.output_class) += w * wl.tree.predict(features.row(i));
  }
  return out;
}

void GbmModel::save(std::ostream& os, const std::vector<std::string>& feature_names) const {
  char buf[96];
  os << "bregcon-gbm 1\n";
  os << "classes " << classes << '\n';
  std::snprintf(buf, sizeof buf, "learning_rate %.17g\n", learning_rate);
  os << buf;
  os << "features " << feature_names.size() << '\n';
  for (const auto& f : feature_names) os << "f " << f << '\n';
  os << "learners " << active_learners() << '\n';
  if (!pool) return;
  for (std::size_t k = 0; k < pool->learners.size(); ++k) {
    const double w = weight(k);
    if (w == 0.0) continue;
    std::snprintf(buf, sizeof buf, "learner %d %.17g\n", pool->learners[k].output_class, w);
    os << buf;
    pool->learners[k].tree.save(os);
  }
}

GbmModel GbmModel::load(std::istream& is, std::vector<std::string>* feature_names) {
  std::string tag;
  int version = 0;
  is >> tag >> version;
  if (tag != "bregcon-gbm" || version != 1) throw std::runtime_error("gbm model: bad header");
  GbmModel m;
  m.pool = std::make_shared<LearnerPool>();
  std::size_t nf = 0;
  is >> tag >> m.classes >> tag >> m.learning_rate >> tag >> nf;
  std::vector<std::string> names;
  for (std::size_t j = 0; j < nf; ++j) {
    is >> tag;
    std::string name;
    std::getline(is, name);
    if (!name.empty() && name.front() == ' ') name.erase(0, 1);
    names.push_back(name);
  }
  if (feature_names) *feature_names = names;
  std::size_t count = 0;
  is >> tag >> count;
  if (tag != "learners") throw std::runtime_error("gbm model: expected learners");
  m.weights.resize(static_cast<Eigen::Index>(count));
  for (std::size_t k = 0; k < count; ++k) {
    WeakLearner wl;
    double w = 0.0;
    is >> tag >> wl.output_class >> w;
    if (tag != "learner") throw std::runtime_error("gbm model: expected learner");
    wl.tree = RegressionTree::load(is);
    m.pool->learners.push_back(std::move(wl));
    m.weights(static_cast<Eigen::Index>(k)) = w;
  }
  if (!is) throw std::runtime_error("gbm model: truncated file");
  return m;
}

GbmModel blend(const GbmModel& avg, const GbmModel& x, double w) {
  if (avg.pool != x.pool) throw std::invalid_argument("blend: models use different learner pools");
  GbmModel out = avg;
  const Eigen::Index len = std::max(avg.weights.size(), x.weights.size());
  Eigen::VectorXd a = Eigen::VectorXd::Zero(len), b = Eigen::VectorXd::Zero(len);
  a.head(avg.weights.size()) = avg.weights;
  b.head(x.weights.size()) = x.weights;
  out.weights = a + w * (b - a);
  out.scores = avg.scores + w * (x.scores - avg.scores);
  return out;
}

double gbm_composite(const ScoreProblem& problem, const Eigen::MatrixXd& scores, const Eigen::MatrixXd& anchor,
                     const Eigen::VectorXd& y, double tau, Eigen::MatrixXd* grad, Eigen::MatrixXd* hess) {
  double v = problem.combined(scores, y, grad, hess);
  const double inv_tau = std::isfinite(tau) ? 1.0 / tau : 0.0;
  if (inv_tau > 0.0) {
    v += 0.5 * inv_tau * (scores - anchor).squaredNorm();
    if (grad) *grad += inv_tau * (scores - anchor);
    if (hess) hess->array() += inv_tau;
  }
  return v;
}

SubproblemResult<GbmModel> solve_gbm_subproblem(const ScoreProblem& problem, const GbmModel& anchor,
                                                const Eigen::VectorXd& y, double tau, InexactTarget target,
                                                const FeatureIndex& index, const GbmParams& params,
                                                GbmSolveTrace* trace) {
  SubproblemResult<GbmModel> res{anchor, {}};
  GbmModel& model = res.x;
  const Eigen::Index n = anchor.scores.rows();
  const int J = anchor.classes;
  Eigen::MatrixXd grad, hess;
  double psi = gbm_composite(problem, model.scores, anchor.scores, y, tau, &grad, &hess);
  if (trace) trace->psi.push_back(psi);

  Eigen::MatrixXd out(n, J);
  for (int r = 0; r < params.rounds; ++r) {
    std::vector<RegressionTree> trees;
    for (int c = 0; c < J; ++c) {
      // curvature can dip below zero only through negatively weighted parts; keep the Newton step defined
      const Eigen::VectorXd h = hess.col(c).cwiseMax(1e-12);
      TreeFit fit = fit_tree(grad.col(c), h, index, params.tree);
      out.col(c) = fit.outputs;
      trees.push_back(std::move(fit.tree));
    }
    double step = params.learning_rate;
    bool accepted = false;
    Eigen::MatrixXd cand, g2, h2;
    double psi2 = psi;
    for (int k = 0; k <= params.max_halvings; ++k) {
      cand = model.scores + step * out;
      psi2 = gbm_composite(problem, cand, anchor.scores, y, tau, &g2, &h2);
      if (psi2 < psi) {
        accepted = true;
        break;
      }
      step *= 0.5;
      if (trace) ++trace->halvings;
    }
    if (!accepted) break;
    auto& pool = *model.pool;
    const Eigen::Index base = static_cast<Eigen::Index>(pool.learners.size());
    for (int c = 0; c < J; ++c) pool.learners.push_back({std::move(trees[static_cast<std::size_t>(c)]), c});
    Eigen::VectorXd w = Eigen::VectorXd::Zero(base + J);
    w.head(model.weights.size()) = model.weights;
    w.tail(J).setConstant(step);
    model.weights = std::move(w);
    model.scores = std::move(cand);
    grad = std::move(g2);
    hess = std::move(h2);
    psi = psi2;
    if (trace) {
      trace->psi.push_back(psi);
      ++trace->rounds;
    }
  }

  const double inv_tau = std::isfinite(tau) ? 1.0 / tau : 0.0;
  double modulus = inv_tau + problem.prox_weight * (1.0 + y.sum());
  for (Eigen::Index i = 0; i < y.size() && i < static_cast<Eigen::Index>(problem.constants.l_h.size()); ++i)
    modulus -= y(i) * problem.constants.l_h[static_cast<std::size_t>(i)];
  res.cert.target = target.nu;
  res.cert.inner_iterations = trace ? trace->rounds : params.rounds;
  res.cert.gap_bound = modulus > 0.0 ? grad.squaredNorm() / (2.0 * modulus) : std::numeric_limits<double>::infinity();
  res.cert.certified = res.cert.gap_bound <= target.nu;
  return res;
}

GbmModel train_unconstrained_gbm(const Eigen::VectorXi& labels, int classes, const Eigen::VectorXd& weights,
                                 const FeatureIndex& index, const GbmParams& params, int rounds) {
  ScoreProblem sp;
  sp.labels = labels;
  sp.classes = classes;
  sp.objective.weights = weights;
  GbmModel m = GbmModel::zero(labels.size(), classes, params.learning_rate);
  GbmParams p = params;
  p.rounds = rounds;
  auto res = solve_gbm_subproblem(sp, m, Eigen::VectorXd(), std::numeric_limits<double>::infinity(), {}, index, p);
  return res.x;
}

}  // namespace bregcon
