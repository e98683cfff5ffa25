#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <vector>

namespace bregcon {

struct TreeParams {
  int max_depth = 3;
  int min_samples_leaf = 1;
  double leaf_ridge = 1.0;
  double min_gain = 1e-12;
  int bins = 0;  // 0: exact split search; otherwise quantile bins (at most 256)
  int threads = 1;
};

// Presorted feature columns, shared by every tree fitted on one dataset.
class FeatureIndex {
 public:
  FeatureIndex() = default;
  FeatureIndex(const Eigen::MatrixXd& features, int bins = 0);

  const Eigen::MatrixXd& features() const { return features_; }
  Eigen::Index samples() const { return features_.rows(); }
  Eigen::Index dims() const { return features_.cols(); }
  const std::vector<int>& order(Eigen::Index f) const { return order_[static_cast<std::size_t>(f)]; }
  // Candidate thresholds per feature when binned; empty when exact.
  const std::vector<double>& cuts(Eigen::Index f) const { return cuts_[static_cast<std::size_t>(f)]; }
  bool binned() const { return binned_; }

 private:
  Eigen::MatrixXd features_;
  std::vector<std::vector<int>> order_;
  std::vector<std::vector<double>> cuts_;
  bool binned_ = false;
};

struct TreeNode {
  int feature = -1;  // -1: leaf
  double threshold = 0.0;
  int left = -1, right = -1;
  double value = 0.0;
};

// Scalar-leaf regression tree; x[feature] <= threshold routes left.
class RegressionTree {
 public:
  RegressionTree() : nodes_(1) {}
  explicit RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  template <typename Row>
  double predict(const Row& x) const {
    int i = 0;
    while (nodes_[i].feature >= 0) i = x(nodes_[i].feature) <= nodes_[i].threshold ? nodes_[i].left : nodes_[i].right;
    return nodes_[i].value;
  }
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  int depth() const;
  int leaves() const;

  // Preorder: "S feature threshold" for splits, "L value" for leaves.
  void save(std::ostream& os) const;
  static RegressionTree load(std::istream& is);

 private:
  std::vector<TreeNode> nodes_;
};

struct TreeFit {
  RegressionTree tree;
  Eigen::VectorXd outputs;  // tree value at each training sample
};

double split_gain(double gl, double hl, double gr, double hr, double lambda);

// Level-wise exact greedy growth on second-order statistics; leaf value -G/(H + leaf_ridge).
TreeFit fit_tree(const Eigen::VectorXd& gradients, const Eigen::VectorXd& hessians, const FeatureIndex& index,
                 const TreeParams& params);

}  // namespace bregcon
