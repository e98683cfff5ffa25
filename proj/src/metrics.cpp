#include "bregcon/metrics.hpp"

#include "bregcon/log.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace bregcon {

Eigen::VectorXi predict_labels(const Eigen::MatrixXd& scores) {
  Eigen::VectorXi out(scores.rows());
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < scores.cols(); ++k)
      if (scores(i, k) > scores(i, best)) best = k;
    out(i) = static_cast<int>(best);
  }
  return out;
}

double accuracy(const Eigen::MatrixXd& scores, const Eigen::VectorXi& labels) {
  if (labels.size() == 0) throw std::invalid_argument("accuracy: empty data");
  if (scores.rows() != labels.size()) throw std::invalid_argument("accuracy: score rows do not match labels");
  return static_cast<double>((predict_labels(scores).array() == labels.array()).count()) /
         static_cast<double>(labels.size());
}

Eigen::VectorXd per_class_error(const Eigen::MatrixXd& scores, const Eigen::VectorXi& labels, int classes) {
  if (scores.rows() != labels.size()) throw std::invalid_argument("per_class_error: score rows do not match labels");
  const Eigen::VectorXi pred = predict_labels(scores);
  Eigen::VectorXd wrong = Eigen::VectorXd::Zero(classes), count = Eigen::VectorXd::Zero(classes);
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    count(labels(i)) += 1.0;
    if (pred(i) != labels(i)) wrong(labels(i)) += 1.0;
  }
  Eigen::VectorXd err(classes);
  for (int k = 0; k < classes; ++k)
    err(k) = count(k) > 0 ? wrong(k) / count(k) : std::numeric_limits<double>::quiet_NaN();
  return err;
}

double npc_violation(const Eigen::MatrixXd& scores, const Eigen::VectorXi& labels,
                     const std::vector<int>& constrained_classes, const Eigen::VectorXd& expected_rates) {
  if (static_cast<Eigen::Index>(constrained_classes.size()) != expected_rates.size())
    throw std::invalid_argument("npc_violation: one expected rate per constrained class");
  const Eigen::VectorXd err = per_class_error(scores, labels, static_cast<int>(scores.cols()));
  double v = 0.0;
  for (std::size_t j = 0; j < constrained_classes.size(); ++j) {
    const int k = constrained_classes[j];
    if (k < 0 || k >= err.size() || std::isnan(err(k))) {
      log_warning("npc_violation: class " + std::to_string(k) + " has no samples; skipped");
      continue;
    }
    v += std::max(0.0, err(k) - expected_rates(static_cast<Eigen::Index>(j)));
  }
  return v;
}

Eigen::VectorXd group_error_rates(const Eigen::MatrixXd& scores, const Eigen::VectorXi& labels,
                                  const Eigen::VectorXi& groups, int num_groups) {
  if (groups.size() != labels.size()) throw std::invalid_argument("group_error_rates: groups do not match labels");
  const Eigen::VectorXi pred = predict_labels(scores);
  Eigen::VectorXd wrong = Eigen::VectorXd::Zero(num_groups), count = Eigen::VectorXd::Zero(num_groups);
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    count(groups(i)) += 1.0;
    if (pred(i) != labels(i)) wrong(groups(i)) += 1.0;
  }
  Eigen::VectorXd r(num_groups);
  for (int g = 0; g < num_groups; ++g)
    r(g) = count(g) > 0 ? wrong(g) / count(g) : std::numeric_limits<double>::quiet_NaN();
  return r;
}

double dispersion(const std::vector<double>& rates) {
  if (rates.size() < 2) throw std::invalid_argument("fairness_gap: need at least two nonempty groups");
  if (rates.size() == 2) return std::abs(rates[0] - rates[1]);
  double mean = 0.0;
  for (double r : rates) mean += r;
  mean /= static_cast<double>(rates.size());
  double var = 0.0;
  for (double r : rates) var += (r - mean) * (r - mean);
  return std::sqrt(var / static_cast<double>(rates.size()));
}

double fairness_gap(const Eigen::MatrixXd& scores, const Eigen::VectorXi& labels, const Eigen::VectorXi& groups,
                    int num_groups) {
  const Eigen::VectorXd r = group_error_rates(scores, labels, groups, num_groups);
  std::vector<double> present;
  for (int g = 0; g < num_groups; ++g) {
    if (std::isnan(r(g))) {
      log_warning("fairness_gap: group " + std::to_string(g) + " has no samples; excluded");
      continue;
    }
    present.push_back(r(g));
  }
  return dispersion(present);
}

}  // namespace bregcon
