#include "bregcon/solvers/linear.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace bregcon {

SubproblemResult<Eigen::VectorXd> solve_linear_subproblem(const ConstrainedProblem& problem, const Eigen::VectorXd& y,
                                                          double tau, const Eigen::VectorXd& anchor,
                                                          InexactTarget target, const LinearSolverOptions& opts,
                                                          double* lipschitz_hint) {
  const Geometry& geom = problem.geometry;
  const double inv_tau = 1.0 / tau;
  const double m = (inv_tau + problem.constants.mu) * geom.sigma_min_effective();
  auto project = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    return problem.feasible_box ? problem.feasible_box->project(v) : v;
  };
  auto psi = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    double v = problem.combined(x, y, grad) + inv_tau * geom.divergence(x, anchor);
    if (grad) *grad += inv_tau * geom.gradient(x, anchor);
    return v;
  };

  double L = opts.initial_lipschitz > 0.0 ? opts.initial_lipschitz : inv_tau * geom.sigma_max();
  if (lipschitz_hint && *lipschitz_hint > 0.0) L = *lipschitz_hint;
  L = std::max(L, m);

  Eigen::VectorXd x = project(anchor);
  Eigen::VectorXd z = x, gz, xn;
  double fx = psi(x, nullptr);
  SubproblemResult<Eigen::VectorXd> best{x, {}};
  best.cert.gap_bound = std::numeric_limits<double>::infinity();
  best.cert.target = target.nu;

  for (int it = 1; it <= opts.max_iters; ++it) {
    const double fz = psi(z, &gz);
    double fn = 0.0;
    Eigen::VectorXd d;
    for (int bt = 0; bt < 60; ++bt) {
      xn = project(z - gz / L);
      d = xn - z;
      fn = psi(xn, nullptr);
      const double slack = 1e-15 * std::max(1.0, std::abs(fz));
      if (fn <= fz + gz.dot(d) + 0.5 * L * d.squaredNorm() + slack) break;
      L *= 2.0;
    }
    const double g2 = (L * d).squaredNorm();
    const double bound = g2 / (2.0 * m);
    const double floor = opts.floor_rel * std::max(1.0, std::abs(fn));
    const double goal = std::max(target.nu, floor);
    if (bound < best.cert.gap_bound) {
      best.x = xn;
      best.cert.gap_bound = bound;
    }
    best.cert.inner_iterations = it;
    if (bound <= goal) {
      best.x = xn;
      best.cert.gap_bound = bound;
      best.cert.certified = true;
      best.cert.floor_clamped = target.nu < floor;
      break;
    }
    const double q = std::sqrt(m / L);
    const double beta = (1.0 - q) / (1.0 + q);
    if (fn > fx) {
      z = xn;  // restart
    } else {
      z = xn + beta * (xn - x);
    }
    x = xn;
    fx = fn;
    L = std::max(m, 0.9 * L);
  }
  if (lipschitz_hint) *lipschitz_hint = L;
  return best;
}

RelativeConstants relative_constants_for(BackendKind backend, const Eigen::MatrixXd& features, double lambda) {
  RelativeConstants rc;
  if (backend == BackendKind::gbm) {
    rc.mu = 0.0;
    rc.l_g = 1.0;
  } else {
    rc.mu = lambda;
    rc.l_g = features.rowwise().norm().sum();
  }
  return rc;
}

Eigen::MatrixXd LinearModel::predict_scores(const Eigen::MatrixXd& raw_features) const {
  const Eigen::MatrixXd a = design_matrix(standardizer.mean.size() ? standardizer.apply(raw_features) : raw_features);
  return a * weights;
}

LinearModel LinearModel::from_vector(const Eigen::VectorXd& x, Eigen::Index features, int classes, double ridge,
                                     Standardizer standardizer) {
  LinearModel m;
  m.weights = Eigen::Map<const Eigen::MatrixXd>(x.data(), features + 1, classes);
  m.ridge = ridge;
  m.standardizer = std::move(standardizer);
  return m;
}

namespace {
void write_row(std::ostream& os, const char* tag, const Eigen::RowVectorXd& v) {
  os << tag << ' ' << v.size();
  char buf[32];
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    std::snprintf(buf, sizeof buf, " %.17g", v(j));
    os << buf;
  }
  os << '\n';
}
}  // namespace

void LinearModel::save(std::ostream& os) const {
  char buf[64];
  os << "bregcon-linear 1\n";
  os << "shape " << weights.rows() << ' ' << weights.cols() << '\n';
  std::snprintf(buf, sizeof buf, "ridge %.17g\n", ridge);
  os << buf;
  write_row(os, "mean", standardizer.mean);
  write_row(os, "scale", standardizer.scale);
  for (Eigen::Index i = 0; i < weights.rows(); ++i) write_row(os, "w", weights.row(i));
}

LinearModel LinearModel::load(std::istream& is) {
  std::string tag;
  int version = 0;
  is >> tag >> version;
  if (tag != "bregcon-linear" || version != 1) throw std::runtime_error("linear model: bad header");
  Eigen::Index rows = 0, cols = 0;
  LinearModel m;
  is >> tag >> rows >> cols >> tag >> m.ridge;
  auto read_row = [&](const char* expect, Eigen::Index len) {
    Eigen::Index stored = -1;
    is >> tag >> stored;
    if (tag != expect) throw std::runtime_error(std::string("linear model: expected ") + expect);
    if (len < 0) len = stored;
    if (stored != len) throw std::runtime_error("linear model: row length mismatch");
    Eigen::RowVectorXd v(len);
    for (Eigen::Index j = 0; j < len; ++j) is >> v(j);
    return v;
  };
  m.standardizer.mean = read_row("mean", -1);
  m.standardizer.scale = read_row("scale", m.standardizer.mean.size());
  m.weights.resize(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) m.weights.row(i) = read_row("w", cols);
  if (!is) throw std::runtime_error("linear model: truncated file");
  return m;
}

}  // namespace bregcon
