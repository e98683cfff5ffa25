#pragma once

#include "bregcon/log.hpp"
#include "bregcon/problem.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace bregcon {

// Worst over points of max_j |fd_j - g_j| / max(1, ||g||_inf), central differences.
double finite_difference_check(const Oracle& oracle, const std::vector<Eigen::VectorXd>& points, double step = 1e-5);

template <typename Scalar>
struct QpSolution {
  Vec<Scalar> x;
  Vec<Scalar> y;
  Scalar f = 0;
  std::vector<int> active;
};

// min 1/2 x^T Q x + c^T x  s.t. A x <= b, by enumerating active sets (dim <= 5, m <= 4).
template <typename Scalar>
QpSolution<Scalar> small_qp_oracle(const Mat<Scalar>& Q, const Vec<Scalar>& c, const Mat<Scalar>& A,
                                   const Vec<Scalar>& b, Scalar tol = Scalar(1e-10)) {
  const Eigen::Index n = Q.rows(), m = A.rows();
  if (Q.cols() != n || c.size() != n || (m > 0 && A.cols() != n) || b.size() != m)
    throw ProblemError("small_qp_oracle: dimension mismatch");
  if (n > 5 || m > 4) throw ProblemError("small_qp_oracle: instance too large for enumeration");
  std::optional<QpSolution<Scalar>> best;
  int valid = 0;
  for (unsigned mask = 0; mask < (1u << m); ++mask) {
    std::vector<int> act;
    for (int i = 0; i < m; ++i)
      if (mask & (1u << i)) act.push_back(i);
    const Eigen::Index k = static_cast<Eigen::Index>(act.size());
    Mat<Scalar> K = Mat<Scalar>::Zero(n + k, n + k);
    Vec<Scalar> rhs(n + k);
    K.topLeftCorner(n, n) = Q;
    rhs.head(n) = -c;
    for (Eigen::Index j = 0; j < k; ++j) {
      K.block(0, n + j, n, 1) = A.row(act[j]).transpose();
      K.block(n + j, 0, 1, n) = A.row(act[j]);
      rhs(n + j) = b(act[j]);
    }
    Eigen::FullPivLU<Mat<Scalar>> lu(K);
    if (!lu.isInvertible()) continue;
    const Vec<Scalar> z = lu.solve(rhs);
    const Vec<Scalar> x = z.head(n);
    if (m > 0 && ((A * x - b).array() > tol).any()) continue;
    Vec<Scalar> y = Vec<Scalar>::Zero(m);
    bool ok = true;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (z(n + j) < -tol) ok = false;
      y(act[j]) = z(n + j) < Scalar(0) ? Scalar(0) : z(n + j);
    }
    if (!ok) continue;
    ++valid;
    const Scalar f = Scalar(0.5) * x.dot(Q * x) + c.dot(x);
    if (!best || f < best->f) best = QpSolution<Scalar>{x, y, f, act};
  }
  if (!best) throw ProblemError("small_qp_oracle: no KKT point (infeasible constraints)");
  if (valid > 1) log_warning("small_qp_oracle: " + std::to_string(valid) + " active sets satisfy KKT (multipliers not unique)");
  return *best;
}

// max of stationarity, primal violation, dual violation and complementarity at (x, y).
template <typename Scalar>
Scalar qp_kkt_residual(const Mat<Scalar>& Q, const Vec<Scalar>& c, const Mat<Scalar>& A, const Vec<Scalar>& b,
                       const Vec<Scalar>& x, const Vec<Scalar>& y) {
  Vec<Scalar> grad = Q * x + c;
  Scalar r = 0;
  if (A.rows() > 0) {
    grad += A.transpose() * y;
    const Vec<Scalar> s = A * x - b;
    r = std::max(r, s.cwiseMax(Scalar(0)).maxCoeff());
    r = std::max(r, (-y).cwiseMax(Scalar(0)).maxCoeff());
    r = std::max(r, y.cwiseProduct(s).cwiseAbs().maxCoeff());
  }
  return std::max(r, grad.cwiseAbs().maxCoeff());
}

struct QpInstance {
  Eigen::MatrixXd Q;
  Eigen::VectorXd c;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
};

// Convex QP with affine constraints written as ConstrainedProblem (identity geometry).
ConstrainedProblem qp_problem(const QpInstance& qp, double mu, std::optional<BoxD> box = std::nullopt);

// Random QP with lambda_min(Q) = mu_floor, origin strictly feasible (b > 0), and an
// unconstrained minimizer that violates at least one constraint.
QpInstance random_qp(std::uint64_t seed, int dim, int constraints, double mu_floor);

// min x1^2 + x2^2  s.t.  1 - x1 - x2 <= 0  over [-1, 1]^2.
QpInstance toy_qp();

struct DcInstanceOptions {
  bool zero_h = false;
  double radius = 2.0;
};

// f strongly convex quadratic; g_i, h_i random convex quadratics; eta_i = 0.1 + U(0,1) so
// phi_bar(0) <= -0.1. Box [-radius, radius]^dim, identity geometry.
DcProblem dc_instance_generator(std::uint64_t seed, int dim, int constraints, DcInstanceOptions opts = {});

}  // namespace bregcon
