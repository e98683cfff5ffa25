#pragma once

#include <Eigen/Dense>

#include <vector>

namespace bregcon {

// Row argmax; ties go to the smallest class index.
Eigen::VectorXi predict_labels(const Eigen::MatrixXd& scores);

double accuracy(const Eigen::MatrixXd& scores, const Eigen::VectorXi& labels);

// Empirical P(prediction != k | label = k); NaN for classes with no samples.
Eigen::VectorXd per_class_error(const Eigen::MatrixXd& scores, const Eigen::VectorXi& labels, int classes);

// sum_k [err_k - e_k]_+ over the constrained classes; absent classes are skipped with a warning.
double npc_violation(const Eigen::MatrixXd& scores, const Eigen::VectorXi& labels,
                     const std::vector<int>& constrained_classes, const Eigen::VectorXd& expected_rates);

// Misclassification rate per group; NaN for empty groups.
Eigen::VectorXd group_error_rates(const Eigen::MatrixXd& scores, const Eigen::VectorXi& labels,
                                  const Eigen::VectorXi& groups, int num_groups);

// |r0 - r1| for two groups, population std of the rates otherwise. Empty groups are excluded.
double fairness_gap(const Eigen::MatrixXd& scores, const Eigen::VectorXi& labels, const Eigen::VectorXi& groups,
                    int num_groups);
double dispersion(const std::vector<double>& rates);

}  // namespace bregcon
