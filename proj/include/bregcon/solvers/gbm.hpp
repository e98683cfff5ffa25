#pragma once

#include "bregcon/abpd.hpp"
#include "bregcon/problem.hpp"
#include "bregcon/solvers/tree.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace bregcon {

// A tree whose output is added to one class score.
struct WeakLearner {
  RegressionTree tree;
  int output_class = 0;
};

// Append-only list shared by every iterate of one run; iterates differ only in their weights.
struct LearnerPool {
  std::vector<WeakLearner> learners;
};

struct GbmParams {
  TreeParams tree;
  int rounds = 20;
  double learning_rate = 0.1;
  int max_halvings = 8;
};

struct GbmModel {
  std::shared_ptr<LearnerPool> pool;
  Eigen::VectorXd weights;  // shorter than the pool means trailing zeros
  Eigen::MatrixXd scores;   // n x J on the training set
  int classes = 2;
  double learning_rate = 0.1;

  static GbmModel zero(Eigen::Index samples, int classes, double learning_rate,
                       std::shared_ptr<LearnerPool> pool = nullptr);

  double weight(std::size_t k) const {
    return static_cast<Eigen::Index>(k) < weights.size() ? weights(static_cast<Eigen::Index>(k)) : 0.0;
  }
  Eigen::Index active_learners() const;
  Eigen::MatrixXd predict_scores(const Eigen::MatrixXd& features) const;

  // Only learners with nonzero weight are written.
  void save(std::ostream& os, const std::vector<std::string>& feature_names) const;
  static GbmModel load(std::istream& is, std::vector<std::string>* feature_names = nullptr);
};

GbmModel blend(const GbmModel& avg, const GbmModel& x, double w);

struct GbmSolveTrace {
  std::vector<double> psi;  // psi after each accepted round, starting with the anchor
  int rounds = 0;
  int halvings = 0;
};

// Composite per-sample loss: problem.combined(S, y) + 1/(2 tau) ||S - anchor||^2.
double gbm_composite(const ScoreProblem& problem, const Eigen::MatrixXd& scores, const Eigen::MatrixXd& anchor,
                     const Eigen::VectorXd& y, double tau, Eigen::MatrixXd* grad, Eigen::MatrixXd* hess);

// Stagewise boosting on the composite loss. The certificate is ||grad psi||_F^2 / (2 m) with
// m the score-space modulus; it bounds the gap to the score-space minimum, hence to the tree optimum.
SubproblemResult<GbmModel> solve_gbm_subproblem(const ScoreProblem& problem, const GbmModel& anchor,
                                                const Eigen::VectorXd& y, double tau, InexactTarget target,
                                                const FeatureIndex& index, const GbmParams& params,
                                                GbmSolveTrace* trace = nullptr);

class GbmBackend {
 public:
  using Point = GbmModel;

  GbmBackend(const ScoreProblem& problem, const FeatureIndex& index, GbmParams params)
      : problem_(&problem), index_(&index), params_(params) {}

  double objective(const Point& p) const { return problem_->objective_value(p.scores); }
  Eigen::VectorXd constraints(const Point& p) const { return problem_->constraint_values(p.scores); }
  SubproblemResult<Point> solve(const Point& anchor, const Eigen::VectorXd& y, double tau, InexactTarget target) {
    GbmSolveTrace t;
    auto res = solve_gbm_subproblem(*problem_, anchor, y, tau, target, *index_, params_, &t);
    traces_.push_back(std::move(t));
    return res;
  }
  Point blend(const Point& avg, const Point& x, double w) const { return bregcon::blend(avg, x, w); }
  double divergence(const Point& a, const Point& b) const { return score_divergence(a.scores, b.scores); }

  const std::vector<GbmSolveTrace>& traces() const { return traces_; }
  const ScoreProblem& problem() const { return *problem_; }

 private:
  const ScoreProblem* problem_;
  const FeatureIndex* index_;
  GbmParams params_;
  std::vector<GbmSolveTrace> traces_;
};

// Plain boosting on a weighted cross-entropy for `rounds` rounds; the unconstrained reference.
GbmModel train_unconstrained_gbm(const Eigen::VectorXi& labels, int classes, const Eigen::VectorXd& weights,
                                 const FeatureIndex& index, const GbmParams& params, int rounds);

}  // namespace bregcon
