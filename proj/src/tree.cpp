#include "bregcon/solvers/tree.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>

namespace bregcon {

FeatureIndex::FeatureIndex(const Eigen::MatrixXd& features, int bins) : features_(features) {
  const Eigen::Index n = features.rows(), d = features.cols();
  order_.resize(static_cast<std::size_t>(d));
  cuts_.resize(static_cast<std::size_t>(d));
  binned_ = bins > 0;
  for (Eigen::Index f = 0; f < d; ++f) {
    auto& ord = order_[static_cast<std::size_t>(f)];
    ord.resize(static_cast<std::size_t>(n));
    std::iota(ord.begin(), ord.end(), 0);
    std::stable_sort(ord.begin(), ord.end(), [&](int a, int b) { return features(a, f) < features(b, f); });
    if (!binned_) continue;
    std::vector<double> distinct;
    for (int i : ord)
      if (distinct.empty() || features(i, f) > distinct.back()) distinct.push_back(features(i, f));
    const std::size_t q = distinct.size();
    const std::size_t nb = static_cast<std::size_t>(std::min(bins, 256));
    auto& cuts = cuts_[static_cast<std::size_t>(f)];
    if (q <= nb) {
      for (std::size_t k = 1; k < q; ++k) cuts.push_back(distinct[k - 1] + 0.5 * (distinct[k] - distinct[k - 1]));
    } else {
      for (std::size_t b = 1; b < nb; ++b) {
        const std::size_t k = b * q / nb;
        const double c = distinct[k - 1] + 0.5 * (distinct[k] - distinct[k - 1]);
        if (cuts.empty() || c > cuts.back()) cuts.push_back(c);
      }
    }
  }
}

Eigen::VectorXd RegressionTree::predict(const Eigen::MatrixXd& x) const {
  Eigen::VectorXd out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) = predict(x.row(i));
  return out;
}

int RegressionTree::depth() const {
  std::function<int(int)> rec = [&](int i) -> int {
    if (nodes_[i].feature < 0) return 0;
    return 1 + std::max(rec(nodes_[i].left), rec(nodes_[i].right));
  };
  return rec(0);
}

int RegressionTree::leaves() const {
  return static_cast<int>(std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.feature < 0; }));
}

void RegressionTree::save(std::ostream& os) const {
  char buf[64];
  std::function<void(int)> rec = [&](int i) {
    const auto& nd = nodes_[i];
    if (nd.feature < 0) {
      std::snprintf(buf, sizeof buf, "L %.17g\n", nd.value);
      os << buf;
      return;
    }
    std::snprintf(buf, sizeof buf, "S %d %.17g\n", nd.feature, nd.threshold);
    os << buf;
    rec(nd.left);
    rec(nd.right);
  };
  os << "tree " << nodes_.size() << '\n';
  rec(0);
}

RegressionTree RegressionTree::load(std::istream& is) {
  std::string tag;
  std::size_t count = 0;
  is >> tag >> count;
  if (tag != "tree" || count == 0) throw std::runtime_error("tree: bad header");
  std::vector<TreeNode> nodes;
  nodes.reserve(count);
  std::function<int()> rec = [&]() -> int {
    if (nodes.size() >= count) throw std::runtime_error("tree: node count exceeded");
    std::string kind;
    is >> kind;
    const int id = static_cast<int>(nodes.size());
    nodes.emplace_back();
    if (kind == "L") {
      is >> nodes[id].value;
    } else if (kind == "S") {
      is >> nodes[id].feature >> nodes[id].threshold;
      const int l = rec();
      const int r = rec();
      nodes[id].left = l;
      nodes[id].right = r;
    } else {
      throw std::runtime_error("tree: bad node tag '" + kind + "'");
    }
    if (!is) throw std::runtime_error("tree: truncated");
    return id;
  };
  rec();
  if (nodes.size() != count) throw std::runtime_error("tree: node count mismatch");
  return RegressionTree(std::move(nodes));
}

double split_gain(double gl, double hl, double gr, double hr, double lambda) {
  auto score = [lambda](double g, double h) { return h + lambda > 0.0 ? g * g / (h + lambda) : 0.0; };
  return 0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr));
}

namespace {

struct NodeStat {
  double g = 0.0, h = 0.0;
  long count = 0;
};

struct Candidate {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

double midpoint(double lo, double hi) {
  const double t = lo + 0.5 * (hi - lo);
  return t < hi ? t : lo;
}

void scan_feature(int f, const FeatureIndex& index, const Eigen::VectorXd& g, const Eigen::VectorXd& h,
                  const std::vector<int>& node_of, const std::vector<int>& slot, const std::vector<NodeStat>& stats,
                  const std::vector<int>& slot_node, const TreeParams& params, std::vector<Candidate>& best) {
  const std::size_t slots = slot_node.size();
  std::vector<double> gl(slots, 0.0), hl(slots, 0.0), last(slots, 0.0);
  std::vector<long> cnt(slots, 0);
  const auto& x = index.features();
  const auto& cuts = index.cuts(f);
  auto bin_of = [&](double v) { return std::upper_bound(cuts.begin(), cuts.end(), v) - cuts.begin(); };
  for (int i : index.order(f)) {
    const int s = slot[static_cast<std::size_t>(node_of[static_cast<std::size_t>(i)])];
    if (s < 0) continue;
    const double v = x(i, f);
    if (cnt[s] > 0 && v > last[s]) {
      const NodeStat& ps = stats[static_cast<std::size_t>(slot_node[s])];
      const long nl = cnt[s], nr = ps.count - nl;
      bool allowed = nl >= params.min_samples_leaf && nr >= params.min_samples_leaf;
      double thr = 0.0;
      if (allowed && index.binned()) {
        const auto bl = bin_of(last[s]);
        allowed = bl != bin_of(v);
        if (allowed) thr = cuts[static_cast<std::size_t>(bl)];
      } else if (allowed) {
        thr = midpoint(last[s], v);
      }
      if (allowed) {
        const double gain = split_gain(gl[s], hl[s], ps.g - gl[s], ps.h - hl[s], params.leaf_ridge);
        if (gain > best[s].gain) best[s] = {gain, f, thr};
      }
    }
    gl[s] += g(i);
    hl[s] += h(i);
    cnt[s] += 1;
    last[s] = v;
  }
}

}  // namespace

TreeFit fit_tree(const Eigen::VectorXd& gradients, const Eigen::VectorXd& hessians, const FeatureIndex& index,
                 const TreeParams& params) {
  const Eigen::Index n = index.samples();
  if (gradients.size() != n || hessians.size() != n) throw std::invalid_argument("fit_tree: length mismatch");
  std::vector<TreeNode> nodes(1);
  std::vector<NodeStat> stats(1);
  std::vector<int> node_of(static_cast<std::size_t>(n), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    stats[0].g += gradients(i);
    stats[0].h += hessians(i);
  }
  stats[0].count = static_cast<long>(n);
  std::vector<int> frontier{0};

  for (int depth = 0; depth < params.max_depth && !frontier.empty(); ++depth) {
    std::vector<int> slot(nodes.size(), -1), slot_node;
    for (int nd : frontier) {
      if (stats[static_cast<std::size_t>(nd)].count < 2L * params.min_samples_leaf) continue;
      slot[static_cast<std::size_t>(nd)] = static_cast<int>(slot_node.size());
      slot_node.push_back(nd);
    }
    if (slot_node.empty()) break;

    const int d = static_cast<int>(index.dims());
    std::vector<std::vector<Candidate>> per_feature(static_cast<std::size_t>(d),
                                                    std::vector<Candidate>(slot_node.size()));
    auto work = [&](int f0, int f1) {
      for (int f = f0; f < f1; ++f)
        scan_feature(f, index, gradients, hessians, node_of, slot, stats, slot_node, params,
                     per_feature[static_cast<std::size_t>(f)]);
    };
    const int threads = std::max(1, std::min(params.threads, d));
    if (threads == 1) {
      work(0, d);
    } else {
      std::vector<std::thread> pool;
      for (int t = 0; t < threads; ++t) pool.emplace_back(work, t * d / threads, (t + 1) * d / threads);
      for (auto& th : pool) th.join();
    }
    // Reduce in feature order; ties keep the lower feature index.
    std::vector<Candidate> best(slot_node.size());
    for (int f = 0; f < d; ++f)
      for (std::size_t s = 0; s < slot_node.size(); ++s)
        if (per_feature[static_cast<std::size_t>(f)][s].gain > best[s].gain) best[s] = per_feature[static_cast<std::size_t>(f)][s];

    std::vector<int> next;
    std::vector<int> split_slot(nodes.size(), -1);
    for (std::size_t s = 0; s < slot_node.size(); ++s) {
      if (best[s].feature < 0 || !(best[s].gain > params.min_gain)) continue;
      const int nd = slot_node[s];
      const int l = static_cast<int>(nodes.size());
      nodes.emplace_back();
      nodes.emplace_back();
      stats.emplace_back();
      stats.emplace_back();
      nodes[static_cast<std::size_t>(nd)].feature = best[s].feature;
      nodes[static_cast<std::size_t>(nd)].threshold = best[s].threshold;
      nodes[static_cast<std::size_t>(nd)].left = l;
      nodes[static_cast<std::size_t>(nd)].right = l + 1;
      split_slot[static_cast<std::size_t>(nd)] = 1;
      next.push_back(l);
      next.push_back(l + 1);
    }
    if (next.empty()) break;
    const auto& x = index.features();
    for (Eigen::Index i = 0; i < n; ++i) {
      int& nd = node_of[static_cast<std::size_t>(i)];
      if (nd >= static_cast<int>(split_slot.size()) || split_slot[static_cast<std::size_t>(nd)] < 0) continue;
      const TreeNode& p = nodes[static_cast<std::size_t>(nd)];
      nd = x(i, p.feature) <= p.threshold ? p.left : p.right;
      auto& st = stats[static_cast<std::size_t>(nd)];
      st.g += gradients(i);
      st.h += hessians(i);
      st.count += 1;
    }
    frontier = std::move(next);
  }

  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (nodes[k].feature >= 0) continue;
    const double denom = stats[k].h + params.leaf_ridge;
    nodes[k].value = denom > 0.0 ? -stats[k].g / denom : 0.0;
  }
  TreeFit fit;
  fit.outputs.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) fit.outputs(i) = nodes[static_cast<std::size_t>(node_of[static_cast<std::size_t>(i)])].value;
  fit.tree = RegressionTree(std::move(nodes));
  return fit;
}

}  // namespace bregcon
