#include "bregcon/solvers/gbm.hpp"
#include "bregcon/solvers/linear.hpp"
#include "bregcon/solvers/tree.hpp"
#include "bregcon/verify.hpp"

#include <doctest.h>

#include "gen.hpp"

#include <set>
#include <sstream>

using namespace bregcon;

namespace {

double psi_value(const ConstrainedProblem& p, const Eigen::VectorXd& x, const Eigen::VectorXd& y, double tau,
                 const Eigen::VectorXd& anchor) {
  double v = p.objective_value(x) + 0.5 / tau * (x - anchor).squaredNorm();
  if (y.size()) v += y.dot(p.constraint_values(x));
  return v;
}

struct BestSplit {
  double gain = -1.0;
  int feature = -1;
  double threshold = 0.0;
};

// brute force over every (feature, midpoint) pair
BestSplit exhaustive_stump(const Eigen::MatrixXd& x, const Eigen::VectorXd& g, const Eigen::VectorXd& h,
                           double lambda, int min_leaf) {
  BestSplit best;
  for (Eigen::Index f = 0; f < x.cols(); ++f) {
    std::set<double> vals(x.col(f).data(), x.col(f).data() + x.rows());
    std::vector<double> v(vals.begin(), vals.end());
    for (std::size_t k = 0; k + 1 < v.size(); ++k) {
      const double thr = 0.5 * (v[k] + v[k + 1]);
      double gl = 0, hl = 0, gr = 0, hr = 0;
      int nl = 0, nr = 0;
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        if (x(i, f) <= thr) {
          gl += g(i), hl += h(i), ++nl;
        } else {
          gr += g(i), hr += h(i), ++nr;
        }
      }
      if (nl < min_leaf || nr < min_leaf) continue;
      const double gain = gl * gl / (hl + lambda) + gr * gr / (hr + lambda) -
                          (gl + gr) * (gl + gr) / (hl + hr + lambda);
      if (gain > best.gain) best = {gain, static_cast<int>(f), thr};
    }
  }
  return best;
}

ScoreProblem small_npc(const Eigen::VectorXi& labels, int J, double alpha) {
  NpcSpec spec;
  spec.constrained_classes = {0};
  spec.alpha = Eigen::VectorXd::Constant(1, alpha);
  spec.expected_error_rates = Eigen::VectorXd::Constant(1, 0.05);
  return build_npc_scores(labels, J, spec);
}

}  // namespace

TEST_CASE("linear prox of a quadratic") {
  QpInstance qp;
  qp.Q = Eigen::MatrixXd::Identity(3, 3);
  const Eigen::Vector3d c(2.0, -4.0, 1.0);
  qp.c = -c;
  qp.A.resize(0, 3);
  qp.b.resize(0);
  const auto prob = qp_problem(qp, 0.0);
  const auto res = solve_linear_subproblem(prob, Eigen::VectorXd(), 1.0, Eigen::VectorXd::Zero(3), {0.0, 1e-12});
  CHECK(res.cert.certified);
  CHECK((res.x - c / 2).norm() <= 1e-6);

  const auto loose = solve_linear_subproblem(prob, Eigen::VectorXd(), 1.0, Eigen::VectorXd::Zero(3), {0.0, 1e6});
  CHECK(loose.cert.certified);
  CHECK(loose.cert.inner_iterations <= 1);
}

TEST_CASE("property: linear certificate is sound against the analytic minimizer") {
  gen::Rng rng(41);
  for (int inst = 0; inst < 30; ++inst) {
    const int n = rng.integer(1, 5), m = rng.integer(0, 3);
    const auto qp = random_qp(700 + inst, n, m, rng.uniform(0.0, 0.5));
    const auto prob = qp_problem(qp, 0.0);
    const Eigen::VectorXd y = rng.vec(m).cwiseAbs();
    const Eigen::VectorXd anchor = rng.vec(n);
    const double tau = rng.uniform(0.1, 3.0);
    const double nu = std::pow(10.0, -rng.uniform(2, 9));
    const auto res = solve_linear_subproblem(prob, y, tau, anchor, {0.0, nu});
    Eigen::VectorXd rhs = -qp.c + anchor / tau;
    if (m) rhs -= qp.A.transpose() * y;
    const Eigen::MatrixXd H = qp.Q + Eigen::MatrixXd::Identity(n, n) / tau;
    const Eigen::VectorXd xhat = H.ldlt().solve(rhs);
    const double gap = psi_value(prob, res.x, y, tau, anchor) - psi_value(prob, xhat, y, tau, anchor);
    if (res.cert.certified) {
      CHECK(gap <= nu + 1e-13);
      CHECK(gap <= res.cert.gap_bound + 1e-13);
    }
    CHECK(res.cert.certified);
  }
}

TEST_CASE("linear subproblem with y = 0 matches plain gradient descent") {
  gen::Rng rng(2);
  Dataset data;
  data.features = rng.mat(60, 3);
  data.labels = rng.labels(60, 2);
  data.class_names = {"neg", "pos"};
  NpcSpec spec;
  spec.constrained_classes = {0};
  spec.alpha = Eigen::VectorXd::Ones(1);
  spec.expected_error_rates = Eigen::VectorXd::Constant(1, 0.05);
  const auto prob = build_npc_problem(data, spec, 0.1);
  const double tau = 1.0;
  const Eigen::VectorXd anchor = Eigen::VectorXd::Zero(prob.dim());
  const Eigen::VectorXd y = Eigen::VectorXd::Zero(1);
  const auto res = solve_linear_subproblem(prob, y, tau, anchor, {0.0, 1e-12});

  // reference: fixed-step descent on the ridge-logistic prox objective
  const double lip = 0.5 * design_matrix(data.features).squaredNorm() + 0.1 + 1.0 / tau;
  Eigen::VectorXd x = anchor, g;
  for (int it = 0; it < 20000; ++it) {
    prob.objective(x, &g);
    x -= (g + (x - anchor) / tau) / lip;
  }
  CHECK(std::abs(psi_value(prob, res.x, y, tau, anchor) - psi_value(prob, x, y, tau, anchor)) <= 1e-6);
}

TEST_CASE("relative constants") {
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(2, 2);
  const auto gbm = relative_constants_for(BackendKind::gbm, a, 0.3);
  CHECK(gbm.mu == 0.0);
  CHECK(gbm.l_g == 1.0);
  const auto lin = relative_constants_for(BackendKind::linear, a, 0.1);
  CHECK(lin.l_g == doctest::Approx(2.0));
  CHECK(lin.mu == doctest::Approx(0.1));
}

TEST_CASE("tree fit examples") {
  Eigen::MatrixXd x(6, 1);
  x << 0, 1, 2, 10, 11, 12;
  FeatureIndex idx(x);
  TreeParams tp;
  tp.leaf_ridge = 0.0;

  const auto flat = fit_tree(Eigen::VectorXd::Constant(6, 0.4), Eigen::VectorXd::Ones(6), idx, tp);
  CHECK(flat.tree.leaves() == 1);
  CHECK(flat.outputs(0) == doctest::Approx(-0.4));

  Eigen::VectorXd g(6);
  g << 1, 1, 1, -1, -1, -1;
  tp.max_depth = 1;
  const auto split = fit_tree(g, Eigen::VectorXd::Ones(6), idx, tp);
  REQUIRE(split.tree.leaves() == 2);
  CHECK(split.tree.nodes()[0].feature == 0);
  CHECK(split.tree.nodes()[0].threshold == doctest::Approx(6.0));

  tp.min_samples_leaf = 6;
  CHECK(fit_tree(g, Eigen::VectorXd::Ones(6), idx, tp).tree.leaves() == 1);

  const FeatureIndex constant(Eigen::MatrixXd::Ones(6, 2));
  tp.min_samples_leaf = 1;
  CHECK(fit_tree(g, Eigen::VectorXd::Ones(6), constant, tp).tree.leaves() == 1);
}

TEST_CASE("property: depth-1 fit matches exhaustive search") {
  gen::Rng rng(55);
  for (int inst = 0; inst < 30; ++inst) {
    const int n = rng.integer(10, 200), d = rng.integer(1, 4);
    Eigen::MatrixXd x = rng.mat(n, d);
    // ties exercise the duplicate-value path
    for (int i = 0; i < n; i += 3) x(i, 0) = std::round(x(i, 0));
    const Eigen::VectorXd g = rng.vec(n);
    Eigen::VectorXd h(n);
    for (int i = 0; i < n; ++i) h(i) = rng.uniform(0.1, 1.0);
    TreeParams tp;
    tp.max_depth = 1;
    tp.min_samples_leaf = rng.integer(1, 4);
    tp.leaf_ridge = rng.uniform(0.0, 2.0);
    const auto fit = fit_tree(g, h, FeatureIndex(x), tp);
    const auto ref = exhaustive_stump(x, g, h, tp.leaf_ridge, tp.min_samples_leaf);
    REQUIRE(fit.tree.leaves() == 2);
    const auto& root = fit.tree.nodes()[0];
    CHECK(split_gain(0, 0, 0, 0, 1.0) == 0.0);
    // compare the induced partitions; equal-gain ties may pick a different feature
    double gl = 0, hl = 0, gr = 0, hr = 0;
    for (int i = 0; i < n; ++i) {
      if (x(i, root.feature) <= root.threshold) {
        gl += g(i), hl += h(i);
      } else {
        gr += g(i), hr += h(i);
      }
    }
    const double gain = gl * gl / (hl + tp.leaf_ridge) + gr * gr / (hr + tp.leaf_ridge) -
                        (gl + gr) * (gl + gr) / (hl + hr + tp.leaf_ridge);
    CHECK(gain == doctest::Approx(ref.gain).epsilon(1e-10));
  }
}

TEST_CASE("property: trees respect depth and route every sample") {
  gen::Rng rng(56);
  for (int inst = 0; inst < 10; ++inst) {
    const int n = 150;
    const Eigen::MatrixXd x = rng.mat(n, 3);
    TreeParams tp;
    tp.max_depth = rng.integer(1, 5);
    tp.bins = inst % 2 ? 32 : 0;
    const auto fit = fit_tree(rng.vec(n), Eigen::VectorXd::Ones(n), FeatureIndex(x, tp.bins), tp);
    CHECK(fit.tree.depth() <= tp.max_depth);
    CHECK((fit.tree.predict(x) - fit.outputs).cwiseAbs().maxCoeff() <= 1e-15);
    std::stringstream ss;
    fit.tree.save(ss);
    const auto back = RegressionTree::load(ss);
    CHECK((back.predict(x) - fit.outputs).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("gbm composite derivatives match finite differences") {
  gen::Rng rng(61);
  for (int inst = 0; inst < 5; ++inst) {
    const int n = 15, J = 3;
    const Eigen::VectorXi b = rng.labels(n, J);
    const auto sp = small_npc(b, J, 2.0);
    const Eigen::MatrixXd anchor = rng.mat(n, J);
    const Eigen::VectorXd y = rng.vec(1).cwiseAbs();
    const double tau = rng.uniform(0.2, 2.0);
    Oracle f = [&](const Eigen::VectorXd& v, Eigen::VectorXd* grad) {
      const Eigen::MatrixXd s = Eigen::Map<const Eigen::MatrixXd>(v.data(), n, J);
      Eigen::MatrixXd gm = Eigen::MatrixXd::Zero(n, J);
      const double val = gbm_composite(sp, s, anchor, y, tau, grad ? &gm : nullptr, nullptr);
      if (grad) *grad = Eigen::Map<const Eigen::VectorXd>(gm.data(), n * J);
      return val;
    };
    const Eigen::VectorXd pt = rng.vec(n * J);
    CHECK(finite_difference_check(f, {pt}) <= 1e-5);

    // diagonal curvature against differences of the gradient
    const Eigen::MatrixXd s = Eigen::Map<const Eigen::MatrixXd>(pt.data(), n, J);
    Eigen::MatrixXd g0 = Eigen::MatrixXd::Zero(n, J), hess = Eigen::MatrixXd::Zero(n, J);
    gbm_composite(sp, s, anchor, y, tau, &g0, &hess);
    const double step = 1e-5;
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < J; ++c) {
        Eigen::MatrixXd sp1 = s, sm1 = s, gp = Eigen::MatrixXd::Zero(n, J), gm = gp;
        sp1(i, c) += step;
        sm1(i, c) -= step;
        gbm_composite(sp, sp1, anchor, y, tau, &gp, nullptr);
        gbm_composite(sp, sm1, anchor, y, tau, &gm, nullptr);
        const double fd = (gp(i, c) - gm(i, c)) / (2 * step);
        CHECK(std::abs(fd - hess(i, c)) <= 1e-5 * std::max(1.0, std::abs(fd)));
      }
    }
  }
}

TEST_CASE("gbm subproblem behaviour") {
  gen::Rng rng(62);
  const int n = 120, J = 3;
  const Eigen::MatrixXd x = rng.mat(n, 4);
  Eigen::VectorXi b(n);
  for (int i = 0; i < n; ++i) b(i) = x(i, 0) < -0.5 ? 0 : (x(i, 1) < 0 ? 1 : 2);
  const auto sp = small_npc(b, J, 5.0);
  const FeatureIndex idx(x);
  GbmParams params;
  params.rounds = 15;
  params.learning_rate = 0.3;

  SUBCASE("no prox, no multiplier: plain boosting decreases the loss every round") {
    const auto anchor = GbmModel::zero(n, J, params.learning_rate);
    GbmSolveTrace tr;
    const auto res = solve_gbm_subproblem(sp, anchor, Eigen::VectorXd::Zero(1),
                                          std::numeric_limits<double>::infinity(), {0, 0}, idx, params, &tr);
    REQUIRE(tr.psi.size() >= 2);
    for (std::size_t k = 1; k < tr.psi.size(); ++k) CHECK(tr.psi[k] < tr.psi[k - 1]);
    CHECK(sp.objective_value(res.x.scores) < sp.objective_value(anchor.scores));
    CHECK((res.x.predict_scores(x) - res.x.scores).cwiseAbs().maxCoeff() <= 1e-10);
  }

  SUBCASE("small tau pins the scores near the anchor") {
    auto anchor = GbmModel::zero(n, J, params.learning_rate);
    anchor.scores = rng.mat(n, J, 0.5);
    const double tau = 0.01;
    const auto res = solve_gbm_subproblem(sp, anchor, Eigen::VectorXd::Zero(1), tau, {0, 0}, idx, params);
    const double l0 = sp.objective_value(anchor.scores);
    CHECK((res.x.scores - anchor.scores).norm() <= std::sqrt(2.0 * tau * l0) + 1e-12);
  }

  SUBCASE("zero rounds leave the model unchanged") {
    params.rounds = 0;
    const auto anchor = GbmModel::zero(n, J, params.learning_rate);
    const auto res = solve_gbm_subproblem(sp, anchor, Eigen::VectorXd::Ones(1), 1.0, {0, 0}, idx, params);
    CHECK(res.x.active_learners() == 0);
    CHECK(res.x.scores.isZero(0.0));
  }

  SUBCASE("psi is monotone with an active multiplier") {
    const auto anchor = GbmModel::zero(n, J, params.learning_rate);
    GbmSolveTrace tr;
    solve_gbm_subproblem(sp, anchor, Eigen::VectorXd::Constant(1, 3.0), 0.5, {0, 0}, idx, params, &tr);
    for (std::size_t k = 1; k < tr.psi.size(); ++k) CHECK(tr.psi[k] <= tr.psi[k - 1]);
  }
}

TEST_CASE("first stump separates a one-feature set at the class boundary") {
  const int n = 40;
  Eigen::MatrixXd x(n, 1);
  Eigen::VectorXi b(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = i < 15 ? i * 0.1 : 3.0 + i * 0.1;
    b(i) = i < 15 ? 0 : 1;
  }
  const auto sp = small_npc(b, 2, 5.0);
  GbmParams params;
  params.tree.max_depth = 1;
  params.rounds = 1;
  const auto res = solve_gbm_subproblem(sp, GbmModel::zero(n, 2, 0.3), Eigen::VectorXd::Zero(1),
                                        std::numeric_limits<double>::infinity(), {0, 0}, FeatureIndex(x), params);
  REQUIRE(res.x.pool->learners.size() == 2);
  const auto& root = res.x.pool->learners[0].tree.nodes()[0];
  CHECK(root.feature == 0);
  CHECK(root.threshold == doctest::Approx(0.5 * (1.4 + 4.5)));
}

TEST_CASE("gbm model round-trips through its text format") {
  gen::Rng rng(63);
  const int n = 80, J = 3;
  const Eigen::MatrixXd x = rng.mat(n, 3);
  const Eigen::VectorXi b = rng.labels(n, J);
  GbmParams params;
  params.rounds = 4;
  const FeatureIndex idx(x);
  const auto model = train_unconstrained_gbm(b, J, Eigen::VectorXd::Ones(n), idx, params, 6);
  std::stringstream a;
  model.save(a, {"u", "v", "w"});
  std::vector<std::string> names;
  std::stringstream in(a.str());
  const auto back = GbmModel::load(in, &names);
  CHECK(names == std::vector<std::string>{"u", "v", "w"});
  CHECK((back.predict_scores(x) - model.predict_scores(x)).cwiseAbs().maxCoeff() == 0.0);
  std::stringstream again;
  back.save(again, names);
  CHECK(again.str() == a.str());
}

TEST_CASE("linear model round-trips") {
  gen::Rng rng(64);
  const Eigen::MatrixXd raw = rng.mat(30, 3, 4.0);
  const auto st = Standardizer::fit(raw);
  const auto m = LinearModel::from_vector(rng.vec(4 * 2), 3, 2, 0.1, st);
  std::stringstream ss;
  m.save(ss);
  const auto back = LinearModel::load(ss);
  CHECK((back.predict_scores(raw) - m.predict_scores(raw)).cwiseAbs().maxCoeff() == 0.0);
}
