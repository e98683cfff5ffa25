#pragma once

#include "bregcon/solvers/linear.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace bregcon {

enum ExitCode : int { exit_ok = 0, exit_config = 1, exit_data = 2, exit_solver = 3, exit_verify = 4 };

enum class Task { npc, fairness };
enum class AlphaPolicy { fixed, heuristic };
enum class OutputIterate { last, ergodic };

// key = value lines, '#' comments, `version = 1` required, unknown keys rejected.
struct RunConfig {
  int version = 1;
  Task task = Task::npc;
  BackendKind backend = BackendKind::gbm;
  std::uint64_t seed = 0;
  double train_fraction = 0.8;

  std::string label_column = "label";
  std::optional<std::string> sensitive_column;
  std::vector<std::string> categorical_columns;
  std::vector<std::string> drop_columns;

  // npc
  std::vector<int> npc_classes;
  Eigen::VectorXd npc_rates;
  AlphaPolicy alpha_policy = AlphaPolicy::heuristic;
  Eigen::VectorXd alpha;
  bool balanced_objective = true;
  double shrink_floor = -1.0;  // negative: 0.01 / J
  OutputIterate output_iterate = OutputIterate::last;

  // abpd
  double tau0 = 1.0;
  double sigma0 = 0.0;  // 0: delta / (tau0 max(L_g, L_g^2))
  long iterations = 20;
  double delta = 1.0;
  double ridge = 0.0;

  // ilcp
  double ilcp_L = 0.0;  // 0: 2 max(rho, 1)
  double ilcp_eps = 1e-2;
  long ilcp_outer = 10;
  long ilcp_inner_iters = 10;
  double fair_alpha = -1.0;  // required for the fairness task
  double fair_constraint_scale = 1.0;
  double linear_box_radius = 10.0;

  // gbm
  int gbm_depth = 3;
  int gbm_rounds = 5;
  double gbm_learning_rate = 0.3;
  int gbm_min_leaf = 1;
  double gbm_leaf_ridge = 1.0;
  int gbm_bins = 0;

  int linear_max_inner = 5000;
  bool strict_certificates = false;
  int threads = 1;

  void validate() const;
};

RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::string& path);
void write_config(std::ostream& os, const RunConfig& cfg);

}  // namespace bregcon
