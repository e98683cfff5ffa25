#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace bregcon {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Axis-aligned box; infinite bounds are allowed.
template <typename Scalar = double>
struct Box {
  Vec<Scalar> lower;
  Vec<Scalar> upper;

  static Box uniform(Eigen::Index dim, Scalar lo, Scalar hi) {
    return {Vec<Scalar>::Constant(dim, lo), Vec<Scalar>::Constant(dim, hi)};
  }
  static Box unbounded(Eigen::Index dim) {
    const Scalar inf = std::numeric_limits<Scalar>::infinity();
    return uniform(dim, -inf, inf);
  }

  Eigen::Index dim() const { return lower.size(); }
  bool bounded() const { return lower.allFinite() && upper.allFinite(); }

  template <typename Derived>
  Vec<Scalar> project(const Eigen::MatrixBase<Derived>& x) const {
    return x.cwiseMax(lower).cwiseMin(upper);
  }
  template <typename Derived>
  bool contains(const Eigen::MatrixBase<Derived>& x, Scalar tol = 0) const {
    return ((x.array() >= lower.array() - tol) && (x.array() <= upper.array() + tol)).all();
  }

  // Distance from v to -N_X(x); for an interior point this is just |v|.
  template <typename A, typename B>
  Scalar stationarity(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& v, Scalar tol = 1e-12) const {
    Scalar acc = 0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      Scalar r = v(i);
      const Scalar scale = std::max<Scalar>(1, std::abs(x(i)));
      if (std::isfinite(upper(i)) && x(i) >= upper(i) - tol * scale) r = std::max<Scalar>(r, 0);
      if (std::isfinite(lower(i)) && x(i) <= lower(i) + tol * scale) r = std::min<Scalar>(r, 0);
      acc += r * r;
    }
    return std::sqrt(acc);
  }
};

template <typename Scalar>
struct SpectralExtent {
  Scalar sigma_min = 0;
  Scalar sigma_max = 0;
  bool rank_deficient = false;
  Scalar sigma_min_row_space = 0;  // smallest nonzero eigenvalue of W^T W
  int iterations = 0;
};

namespace detail {

template <typename Scalar, typename Apply>
Scalar power_iteration(Eigen::Index dim, Apply&& apply, int max_iters, Scalar tol, int& used) {
  std::mt19937 rng(0x5eedu);
  std::normal_distribution<double> gauss;
  Vec<Scalar> v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v(i) = Scalar(gauss(rng));
  v.normalize();
  Scalar lambda = 0;
  for (int it = 0; it < max_iters; ++it) {
    Vec<Scalar> w = apply(v);
    const Scalar next = v.dot(w);
    const Scalar norm = w.norm();
    used = it + 1;
    if (norm == Scalar(0)) return Scalar(0);
    v = w / norm;
    if (it > 0 && std::abs(next - lambda) <= tol * std::max<Scalar>(std::abs(next), 1)) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return lambda;
}

}  // namespace detail

// Extreme eigenvalues of G = W^T W by (shifted) power iteration.
template <typename Scalar>
SpectralExtent<Scalar> gram_extremes(const Mat<Scalar>& gram, int max_iters = 100, Scalar tol = Scalar(1e-10)) {
  SpectralExtent<Scalar> out;
  const Eigen::Index n = gram.rows();
  int used_max = 0, used_min = 0;
  out.sigma_max = detail::power_iteration<Scalar>(
      n, [&](const Vec<Scalar>& v) -> Vec<Scalar> { return gram * v; }, max_iters, tol, used_max);
  const Scalar shift = out.sigma_max;
  const Scalar top = detail::power_iteration<Scalar>(
      n, [&](const Vec<Scalar>& v) -> Vec<Scalar> { return shift * v - gram * v; }, max_iters, tol, used_min);
  out.sigma_min = std::max<Scalar>(shift - top, 0);
  out.iterations = used_max + used_min;

  const Scalar cutoff = Scalar(1e-9) * std::max<Scalar>(out.sigma_max, 1);
  if (out.sigma_min <= cutoff) {
    out.rank_deficient = true;
    out.sigma_min = 0;
    Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(gram, Eigen::EigenvaluesOnly);
    out.sigma_min_row_space = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (es.eigenvalues()(i) > cutoff) {
        out.sigma_min_row_space = es.eigenvalues()(i);
        break;
      }
    }
  } else {
    out.sigma_min_row_space = out.sigma_min;
  }
  return out;
}

enum class OperatorKind { identity, explicit_matrix, prediction_score };

// D_W(x, y) = 1/2 (x - y)^T W^T W (x - y).
// prediction_score points are n*J score vectors (column-major n x J), so W acts as identity there.
template <typename Scalar = double>
class BregmanGeometry {
 public:
  static BregmanGeometry identity(Eigen::Index dim) {
    BregmanGeometry g;
    g.kind_ = OperatorKind::identity;
    g.dim_ = dim;
    g.extent_.sigma_min = g.extent_.sigma_max = g.extent_.sigma_min_row_space = 1;
    return g;
  }

  static BregmanGeometry prediction_score(Eigen::Index samples, Eigen::Index classes) {
    BregmanGeometry g = identity(samples * classes);
    g.kind_ = OperatorKind::prediction_score;
    g.samples_ = samples;
    return g;
  }

  static BregmanGeometry from_matrix(const Mat<Scalar>& w, int max_iters = 100, Scalar tol = Scalar(1e-10)) {
    if (w.size() == 0 || w.cwiseAbs().maxCoeff() == Scalar(0))
      throw GeometryError("degenerate geometry: W is zero");
    BregmanGeometry g;
    g.kind_ = OperatorKind::explicit_matrix;
    g.dim_ = w.cols();
    g.w_ = w;
    g.gram_ = w.transpose() * w;
    g.extent_ = gram_extremes<Scalar>(g.gram_, max_iters, tol);
    return g;
  }

  OperatorKind kind() const { return kind_; }
  Eigen::Index dim() const { return dim_; }
  Eigen::Index samples() const { return samples_; }
  Scalar sigma_min() const { return extent_.sigma_min; }
  Scalar sigma_max() const { return extent_.sigma_max; }
  bool rank_deficient() const { return extent_.rank_deficient; }
  // Falls back to the row-space value when W is rank deficient.
  Scalar sigma_min_effective() const { return extent_.sigma_min_row_space; }
  const SpectralExtent<Scalar>& extent() const { return extent_; }
  const Mat<Scalar>& matrix() const { return w_; }

  template <typename A, typename B>
  Scalar divergence(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y) const {
    if (x.size() != y.size()) throw GeometryError("divergence: dimension mismatch");
    if (kind_ == OperatorKind::explicit_matrix) return Scalar(0.5) * (w_ * (x - y)).squaredNorm();
    return Scalar(0.5) * (x - y).squaredNorm();
  }

  // grad_x D_W(x, anchor) = W^T W (x - anchor)
  template <typename A, typename B>
  Vec<Scalar> gradient(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& anchor) const {
    if (kind_ == OperatorKind::explicit_matrix) return gram_ * (x - anchor);
    return x - anchor;
  }

  // Applies W^T W to a direction.
  template <typename A>
  Vec<Scalar> apply_gram(const Eigen::MatrixBase<A>& v) const {
    if (kind_ == OperatorKind::explicit_matrix) return gram_ * v;
    return v;
  }

 private:
  OperatorKind kind_ = OperatorKind::identity;
  Eigen::Index dim_ = 0;
  Eigen::Index samples_ = 0;
  Mat<Scalar> w_;
  Mat<Scalar> gram_;
  SpectralExtent<Scalar> extent_;
};

template <typename Scalar, typename A, typename B>
Scalar divergence(const BregmanGeometry<Scalar>& geom, const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y) {
  return geom.divergence(x, y);
}

// Score-matrix form: 1/2 ||S1 - S2||_F^2.
template <typename A, typename B>
typename A::Scalar score_divergence(const Eigen::MatrixBase<A>& s1, const Eigen::MatrixBase<B>& s2) {
  if (s1.rows() != s2.rows() || s1.cols() != s2.cols()) throw GeometryError("score divergence: shape mismatch");
  return typename A::Scalar(0.5) * (s1 - s2).squaredNorm();
}

// sup sqrt(2 D_W(x, y)) over the box, bounded by sqrt(sigma_max) * diagonal.
template <typename Scalar>
Scalar diameter_bound(const BregmanGeometry<Scalar>& geom, const Box<Scalar>& box) {
  if (!box.bounded()) throw GeometryError("diameter undefined: unbounded box");
  return std::sqrt(geom.sigma_max()) * (box.upper - box.lower).norm();
}

using Geometry = BregmanGeometry<double>;
using BoxD = Box<double>;

}  // namespace bregcon
