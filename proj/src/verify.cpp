#include "bregcon/verify.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>

namespace bregcon {

double finite_difference_check(const Oracle& oracle, const std::vector<Eigen::VectorXd>& points, double step) {
  double worst = 0.0;
  for (const auto& x : points) {
    Eigen::VectorXd g(x.size());
    oracle(x, &g);
    Eigen::VectorXd xp = x;
    double err = 0.0, scale = 1.0;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      xp(j) = x(j) + step;
      const double fp = oracle(xp, nullptr);
      xp(j) = x(j) - step;
      const double fm = oracle(xp, nullptr);
      xp(j) = x(j);
      const double fd = (fp - fm) / (2.0 * step);
      err = std::max(err, std::abs(fd - g(j)));
      scale = std::max(scale, std::abs(fd));
    }
    // relative to the difference quotient
    worst = std::max(worst, err / scale);
  }
  return worst;
}

namespace {

Oracle quadratic(const Eigen::MatrixXd& Q, const Eigen::VectorXd& c) {
  return [Q, c](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    const Eigen::VectorXd qx = Q * x;
    if (grad) *grad = qx + c;
    return 0.5 * x.dot(qx) + c.dot(x);
  };
}

Oracle affine(const Eigen::VectorXd& a) {
  return [a](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    if (grad) *grad = a;
    return a.dot(x);
  };
}

Eigen::MatrixXd gaussian(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> nd;
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = nd(rng);
  return m;
}

double lambda_max(const Eigen::MatrixXd& s) {
  if (s.size() == 0) return 0.0;
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(s, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
}

double lambda_min(const Eigen::MatrixXd& s) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(s, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

}  // namespace

ConstrainedProblem qp_problem(const QpInstance& qp, double mu, std::optional<BoxD> box) {
  ConstrainedProblem p;
  const Eigen::Index n = qp.Q.rows();
  p.objective = quadratic(qp.Q, qp.c);
  for (Eigen::Index i = 0; i < qp.A.rows(); ++i) p.constraints.push_back(affine(qp.A.row(i).transpose()));
  p.offsets = qp.b;
  p.geometry = Geometry::identity(n);
  p.constants.mu = mu;
  p.constants.l_g = qp.A.rows() ? qp.A.jacobiSvd().singularValues()(0) : 1.0;
  p.constants.l_h.assign(static_cast<std::size_t>(qp.A.rows()), 0.0);
  p.feasible_box = std::move(box);
  const QpInstance q = qp;
  p.weighted_sum = [q](const Eigen::VectorXd& x, const Eigen::VectorXd& y, Eigen::VectorXd* grad) {
    const Eigen::VectorXd qx = q.Q * x;
    double v = 0.5 * x.dot(qx) + q.c.dot(x);
    if (grad) *grad = qx + q.c;
    if (y.size()) {
      const Eigen::VectorXd aty = q.A.transpose() * y;
      v += aty.dot(x);
      if (grad) *grad += aty;
    }
    return v;
  };
  return p;
}

QpInstance random_qp(std::uint64_t seed, int dim, int constraints, double mu_floor) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  QpInstance qp;
  const Eigen::MatrixXd B = gaussian(rng, dim, dim);
  qp.Q = B.transpose() * B / dim;
  qp.Q += (mu_floor - lambda_min(qp.Q)) * Eigen::MatrixXd::Identity(dim, dim);
  qp.A = gaussian(rng, constraints, dim);
  qp.b.resize(constraints);
  for (int i = 0; i < constraints; ++i) qp.b(i) = 0.2 + unit(rng);
  // Put the unconstrained minimizer outside the first constraint.
  Eigen::VectorXd target = gaussian(rng, dim, 1);
  if (constraints > 0) {
    const Eigen::VectorXd a = qp.A.row(0).transpose();
    target += (qp.b(0) + 1.0 - a.dot(target)) / a.squaredNorm() * a;
  }
  qp.c = -qp.Q * target;
  return qp;
}

QpInstance toy_qp() {
  QpInstance qp;
  qp.Q = 2.0 * Eigen::MatrixXd::Identity(2, 2);
  qp.c = Eigen::VectorXd::Zero(2);
  qp.A = Eigen::MatrixXd::Constant(1, 2, -1.0);
  qp.b = Eigen::VectorXd::Constant(1, -1.0);
  return qp;
}

DcProblem dc_instance_generator(std::uint64_t seed, int dim, int constraints, DcInstanceOptions opts) {
  if (dim < 1 || dim > 10 || constraints < 0 || constraints > 5)
    throw ProblemError("dc_instance_generator: need 1 <= dim <= 10 and 0 <= m <= 5");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  DcProblem dc;
  const Eigen::MatrixXd B = gaussian(rng, dim, dim);
  const Eigen::MatrixXd Q0 = B.transpose() * B / dim + 0.5 * Eigen::MatrixXd::Identity(dim, dim);
  const Eigen::VectorXd c0 = 2.0 * gaussian(rng, dim, 1);
  dc.objective = quadratic(Q0, c0);
  dc.mu = lambda_min(Q0);
  dc.geometry = Geometry::identity(dim);
  dc.box = BoxD::uniform(dim, -opts.radius, opts.radius);
  const double reach = opts.radius * std::sqrt(static_cast<double>(dim));
  dc.objective_lipschitz = Q0.norm() * reach + c0.norm();
  for (int i = 0; i < constraints; ++i) {
    const Eigen::MatrixXd Cg = gaussian(rng, dim, dim);
    const Eigen::MatrixXd G = Cg.transpose() * Cg / dim;
    const Eigen::VectorXd a = gaussian(rng, dim, 1);
    const Eigen::MatrixXd Ch = gaussian(rng, dim, dim);
    Eigen::MatrixXd H = 0.5 * Ch.transpose() * Ch / dim;
    Eigen::VectorXd bh = gaussian(rng, dim, 1);
    if (opts.zero_h) {
      H.setZero();
      bh.setZero();
    }
    DcConstraint c;
    c.g_part = quadratic(G, a);
    c.h_part = quadratic(H, bh);
    c.eta = 0.1 + unit(rng);
    c.l_h = lambda_max(H);
    c.lipschitz = (G - H).norm() * reach + (a - bh).norm();
    dc.constraints.push_back(std::move(c));
  }
  return dc;
}

}  // namespace bregcon
