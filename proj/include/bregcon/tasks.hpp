#pragma once

#include "bregcon/abpd.hpp"
#include "bregcon/config.hpp"
#include "bregcon/data.hpp"
#include "bregcon/ilcp.hpp"
#include "bregcon/solvers/gbm.hpp"
#include "bregcon/solvers/linear.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace bregcon {

GbmParams gbm_params(const RunConfig& cfg);

struct IterateMetrics {
  double train_accuracy = 0.0, test_accuracy = 0.0;
  double train_violation = 0.0, test_violation = 0.0;
};

struct NpcOutcome {
  Eigen::VectorXd alpha_initial;
  Eigen::VectorXd alpha_refit;  // empty unless the heuristic refit ran
  long refit_iteration = -1;
  Eigen::VectorXd alpha;        // in force at the end
  double shrink_floor = 0.0;
  std::vector<AbpdRecord> records;
  int uncertified = 0;
  long boosting_rounds = 0;

  std::optional<LinearModel> linear;
  std::optional<GbmModel> gbm;
  Eigen::MatrixXd train_scores, test_scores;

  double train_accuracy = 0.0, test_accuracy = 0.0;
  double train_violation = 0.0, test_violation = 0.0;
  Eigen::VectorXd train_class_error, test_class_error;

  // both iterates, whichever one is returned
  IterateMetrics last, ergodic;
};

// ABPD on the NPC problem. test may be null.
NpcOutcome train_npc(const Dataset& train, const Dataset* test, const RunConfig& cfg);

struct FairOutcome {
  double alpha = 0.0;
  double L = 0.0;
  double eps34 = 0.0;
  std::vector<IlcpRecord> records;
  std::vector<double> group_gap_trace;  // max pairwise group-loss gap at x^0 .. x^T
  Eigen::VectorXd group_loss_initial, group_loss_final;
  FjResidual residual;
  double slack = 0.0;
  bool fj_stop = false;
  int uncertified = 0;
  long boosting_rounds = 0;

  std::optional<LinearModel> linear;
  std::optional<GbmModel> gbm;
  Eigen::MatrixXd train_scores, test_scores;

  double train_accuracy = 0.0, test_accuracy = 0.0;
  double train_gap = 0.0, test_gap = 0.0;  // misclassification-rate dispersion across groups
};

// ILCP on the fairness DC problem, started from the zero-score model.
FairOutcome train_fair(const Dataset& train, const Dataset* test, const RunConfig& cfg);

}  // namespace bregcon
