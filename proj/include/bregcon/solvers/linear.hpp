#pragma once

#include "bregcon/abpd.hpp"
#include "bregcon/problem.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <string>

namespace bregcon {

struct LinearSolverOptions {
  int max_iters = 5000;
  double initial_lipschitz = 0.0;  // 0: 1/tau * sigma_max
  // Targets below floor_rel * max(1, |psi|) are not resolvable in double precision and get raised.
  double floor_rel = 1e-13;
};

// Accelerated projected gradient on psi(x) = f(x) + <y, g(x)> + D_W(x, anchor) / tau.
// Certificate: psi(x+) - min psi <= ||G||^2 / (2 m), m = (1/tau + mu) sigma_min(W^T W),
// with G the gradient mapping at the extrapolated point.
SubproblemResult<Eigen::VectorXd> solve_linear_subproblem(const ConstrainedProblem& problem, const Eigen::VectorXd& y,
                                                          double tau, const Eigen::VectorXd& anchor,
                                                          InexactTarget target, const LinearSolverOptions& opts = {},
                                                          double* lipschitz_hint = nullptr);

class LinearBackend {
 public:
  using Point = Eigen::VectorXd;

  explicit LinearBackend(const ConstrainedProblem& problem, LinearSolverOptions opts = {})
      : problem_(&problem), opts_(opts) {}

  double objective(const Point& x) const { return problem_->objective_value(x); }
  Eigen::VectorXd constraints(const Point& x) const { return problem_->constraint_values(x); }
  SubproblemResult<Point> solve(const Point& anchor, const Eigen::VectorXd& y, double tau, InexactTarget target) {
    return solve_linear_subproblem(*problem_, y, tau, anchor, target, opts_, &lipschitz_);
  }
  Point blend(const Point& avg, const Point& x, double w) const { return avg + w * (x - avg); }
  double divergence(const Point& a, const Point& b) const { return problem_->geometry.divergence(a, b); }
  const ConstrainedProblem& problem() const { return *problem_; }

 private:
  const ConstrainedProblem* problem_;
  LinearSolverOptions opts_;
  double lipschitz_ = 0.0;
};

enum class BackendKind { linear, gbm };

// linear: mu = lambda, L_g = sum_i ||a_i||; gbm: mu = 0, L_g = 1.
RelativeConstants relative_constants_for(BackendKind backend, const Eigen::MatrixXd& features, double lambda);

struct LinearModel {
  Eigen::MatrixXd weights;  // (d+1) x J, bias in the last row
  double ridge = 0.0;
  Standardizer standardizer;

  int classes() const { return static_cast<int>(weights.cols()); }
  Eigen::MatrixXd predict_scores(const Eigen::MatrixXd& raw_features) const;

  static LinearModel from_vector(const Eigen::VectorXd& x, Eigen::Index features, int classes, double ridge,
                                 Standardizer standardizer);
  void save(std::ostream& os) const;
  static LinearModel load(std::istream& is);
};

}  // namespace bregcon
