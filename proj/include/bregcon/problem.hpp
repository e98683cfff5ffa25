#pragma once

#include "bregcon/data.hpp"
#include "bregcon/geometry.hpp"

#include <Eigen/Dense>

#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

namespace bregcon {

class ProblemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Value oracle; fills grad when non-null.
using Oracle = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

struct RelativeConstants {
  double mu = 0.0;
  double l_g = 1.0;
  std::vector<double> l_h;

  double rho() const;
};

struct ConstrainedProblem {
  Oracle objective;
  std::vector<Oracle> constraints;
  Eigen::VectorXd offsets;  // constraint i reads constraints[i](x) - offsets(i)
  Geometry geometry;
  RelativeConstants constants;
  std::optional<BoxD> feasible_box;
  // Optional fused f(x) + sum_i y_i raw_i(x), offsets excluded.
  std::function<double(const Eigen::VectorXd& x, const Eigen::VectorXd& y, Eigen::VectorXd* grad)> weighted_sum;

  Eigen::Index dim() const { return geometry.dim(); }
  Eigen::Index num_constraints() const { return static_cast<Eigen::Index>(constraints.size()); }
  double offset(Eigen::Index i) const { return offsets.size() ? offsets(i) : 0.0; }

  double objective_value(const Eigen::VectorXd& x) const { return objective(x, nullptr); }
  Eigen::VectorXd constraint_values(const Eigen::VectorXd& x) const;
  double combined(const Eigen::VectorXd& x, const Eigen::VectorXd& y, Eigen::VectorXd* grad) const;
};

// f(x) + <y, g(x)>
double lagrangian(const ConstrainedProblem& problem, const Eigen::VectorXd& x, const Eigen::VectorXd& y);

struct DcConstraint {
  Oracle g_part;
  Oracle h_part;
  double eta = 0.0;
  double l_h = 0.0;
  double lipschitz = std::numeric_limits<double>::infinity();  // bound on ||grad(g - h)|| over X

  double value(const Eigen::VectorXd& x) const { return g_part(x, nullptr) - h_part(x, nullptr) - eta; }
  double value(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const;
};

struct DcProblem {
  Oracle objective;
  std::vector<DcConstraint> constraints;
  Geometry geometry;
  double mu = 0.0;  // relative strong convexity of f
  std::optional<BoxD> box;
  double objective_lipschitz = std::numeric_limits<double>::infinity();

  Eigen::Index dim() const { return geometry.dim(); }
  double rho() const;
  Eigen::VectorXd constraint_values(const Eigen::VectorXd& x) const;
  double max_violation(const Eigen::VectorXd& x) const;  // phi_bar; -inf when m = 0
  // Index achieving phi_bar, lowest index on ties.
  Eigen::Index max_violation_index(const Eigen::VectorXd& x) const;
};

// ---------------------------------------------------------------- score space

struct SoftmaxCache {
  Eigen::MatrixXd prob;      // n x J
  Eigen::MatrixXd log_prob;  // n x J
  Eigen::VectorXd log_norm;  // log sum exp per row

  explicit SoftmaxCache(const Eigen::MatrixXd& scores);
};

struct CrossEntropy {
  double loss = 0.0;
  Eigen::MatrixXd gradient;
};

CrossEntropy cross_entropy_loss(const Eigen::MatrixXd& scores, const Eigen::VectorXi& labels,
                                const Eigen::VectorXd& weights);

// Clamp each probability at floor, then renormalize the row.
Eigen::MatrixXd shrink_predictions(const Eigen::MatrixXd& probs, double floor);

// sum_i c_i * loss(s_i, b_i); loss is the shrunk cross-entropy when shrink_floor > 0.
// Weights may be negative (h-parts of DC constraints).
struct WeightedLoss {
  Eigen::VectorXd weights;
  double shrink_floor = 0.0;

  double evaluate(const SoftmaxCache& sm, const Eigen::VectorXi& labels) const;
  // Adds coef * gradient (and coef * c_i p(1-p) into hess when non-null).
  double accumulate(const SoftmaxCache& sm, const Eigen::VectorXi& labels, double coef, Eigen::MatrixXd* grad,
                    Eigen::MatrixXd* hess) const;
};

// Convex problem over training scores S (n x J). Optional proximal term
// prox_weight * 1/2 ||S - prox_center||^2 is added to the objective and to every constraint.
struct ScoreProblem {
  Eigen::VectorXi labels;
  int classes = 2;
  WeightedLoss objective;
  std::vector<WeightedLoss> constraints;
  Eigen::VectorXd offsets;
  double prox_weight = 0.0;
  Eigen::MatrixXd prox_center;
  RelativeConstants constants;

  Eigen::Index samples() const { return labels.size(); }
  Eigen::Index num_constraints() const { return static_cast<Eigen::Index>(constraints.size()); }
  double prox_value(const Eigen::MatrixXd& scores) const;
  double objective_value(const Eigen::MatrixXd& scores) const;
  Eigen::VectorXd constraint_values(const Eigen::MatrixXd& scores) const;
  // f + <y, g_raw> including prox terms, offsets excluded.
  double combined(const Eigen::MatrixXd& scores, const Eigen::VectorXd& y, Eigen::MatrixXd* grad,
                  Eigen::MatrixXd* hess) const;
};

// ------------------------------------------------------------------ NPC

struct NpcSpec {
  std::vector<int> constrained_classes;
  Eigen::VectorXd alpha;                 // one per constrained class
  Eigen::VectorXd expected_error_rates;  // one per constrained class
  Eigen::VectorXd sample_weights;        // empty: balanced default
  double shrink_floor = 0.0;
};

// n / (J n_class(i)): balanced class risk, scaled to mean weight 1.
Eigen::VectorXd balanced_weights(const Eigen::VectorXi& labels, int classes);

ScoreProblem build_npc_scores(const Eigen::VectorXi& labels, int classes, const NpcSpec& spec);

// Linear model F(a; X) = [a, 1] X with X of shape (d+1) x J, x = vec(X) column-major.
ConstrainedProblem linear_problem(const ScoreProblem& sp, const Eigen::MatrixXd& design, double ridge);
ConstrainedProblem build_npc_problem(const Dataset& data, const NpcSpec& spec, double ridge = 0.0);

enum class AlphaPhase { initial, refit };

Eigen::VectorXd estimate_alpha(const Eigen::VectorXi& labels, int classes, const std::vector<int>& constrained,
                               const Eigen::VectorXd& expected_rates, AlphaPhase phase,
                               const Eigen::MatrixXd* current_scores = nullptr, double shrink_floor = 0.0);
Eigen::VectorXd estimate_alpha(const Dataset& data, const Eigen::VectorXd& expected_rates,
                               const std::vector<int>& constrained, AlphaPhase phase,
                               const Eigen::MatrixXd* current_scores = nullptr, double shrink_floor = 0.0);

// ------------------------------------------------------------- fairness

struct FairnessSpec {
  Eigen::VectorXi groups;
  Eigen::VectorXi group_sizes;
  Eigen::MatrixXd alpha_pairs;  // symmetric |S| x |S|
  double constraint_scale = 1.0;

  static FairnessSpec uniform(const Eigen::VectorXi& groups, int num_groups, double alpha, double scale = 1.0);
};

struct ScoreDcConstraint {
  Eigen::VectorXd g_weights;
  Eigen::VectorXd h_weights;
  double eta = 0.0;
  double l_h = 0.0;
  int group_g = -1;
  int group_h = -1;

  WeightedLoss difference() const { return {g_weights - h_weights, 0.0}; }
};

struct ScoreDcProblem {
  Eigen::VectorXi labels;
  int classes = 2;
  WeightedLoss objective;
  std::vector<ScoreDcConstraint> constraints;

  double rho() const;
  double objective_value(const Eigen::MatrixXd& scores) const;
  Eigen::VectorXd constraint_values(const Eigen::MatrixXd& scores) const;
  double max_violation(const Eigen::MatrixXd& scores) const;
};

// Group-k mean cross-entropy of the given scores.
Eigen::VectorXd group_losses(const Eigen::MatrixXd& scores, const Eigen::VectorXi& labels,
                             const Eigen::VectorXi& groups, int num_groups);

ScoreDcProblem build_fairness_scores(const Eigen::VectorXi& labels, int classes, const FairnessSpec& spec);
DcProblem linear_dc_problem(const ScoreDcProblem& sp, const Eigen::MatrixXd& design, double ridge,
                            std::optional<BoxD> box);
DcProblem build_fairness_problem(const Dataset& data, const FairnessSpec& spec, double ridge = 0.0,
                                 std::optional<BoxD> box = std::nullopt);

// Linear fairness h-part constant: (1/n_k) sum_{i in k} ||a_i||^2 / 2, times scale.
double linear_group_smoothness(const Eigen::MatrixXd& design, const Eigen::VectorXi& groups, int group, double scale);

}  // namespace bregcon
