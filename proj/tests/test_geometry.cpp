#include "bregcon/geometry.hpp"

#include <doctest.h>

#include "gen.hpp"

using namespace bregcon;

TEST_CASE("divergence examples") {
  const auto id2 = Geometry::identity(2);
  CHECK(id2.divergence(Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 0)) == doctest::Approx(0.5));
  const auto id3 = Geometry::identity(3);
  const Eigen::Vector3d p(3, -2, 7);
  CHECK(id3.divergence(p, p) == 0.0);

  Eigen::Matrix2d w;
  w << 2, 0, 0, 1;
  const auto g = Geometry::from_matrix(w);
  CHECK(g.divergence(Eigen::Vector2d(1, 1), Eigen::Vector2d(0, 0)) == doctest::Approx(2.5));
  CHECK(g.sigma_max() == doctest::Approx(4.0));
  CHECK(g.sigma_min() == doctest::Approx(1.0));
  CHECK_FALSE(g.rank_deficient());
}

TEST_CASE("identity extents are one") {
  const auto g = Geometry::identity(4);
  CHECK(g.sigma_min() == 1.0);
  CHECK(g.sigma_max() == 1.0);
}

TEST_CASE("diameter examples") {
  const auto id = Geometry::identity(2);
  CHECK(diameter_bound(id, BoxD::uniform(2, 0, 1)) == doctest::Approx(std::sqrt(2.0)));
  const BoxD point{Eigen::Vector2d(0.3, -1), Eigen::Vector2d(0.3, -1)};
  CHECK(diameter_bound(id, point) == 0.0);
  Eigen::Matrix2d w;
  w << 2, 0, 0, 1;
  CHECK(diameter_bound(Geometry::from_matrix(w), BoxD::uniform(2, 0, 1)) == doctest::Approx(2.0 * std::sqrt(2.0)));
  CHECK_THROWS_AS(diameter_bound(id, BoxD::unbounded(2)), GeometryError);
}

TEST_CASE("bad inputs") {
  CHECK_THROWS_AS(Geometry::from_matrix(Eigen::MatrixXd::Zero(3, 2)), GeometryError);
  const auto id = Geometry::identity(2);
  CHECK_THROWS_AS(id.divergence(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(3)), GeometryError);
}

TEST_CASE("property: divergence matches 1/2 |W(x-y)|^2, symmetric, sandwiched") {
  gen::Rng rng(11);
  for (int inst = 0; inst < 10; ++inst) {
    const int rows = rng.integer(1, 6), cols = rng.integer(1, 5);
    const Eigen::MatrixXd w = rng.mat(rows, cols);
    const auto g = Geometry::from_matrix(w);
    CHECK(g.sigma_min() <= g.sigma_max());
    for (int k = 0; k < 100; ++k) {
      const Eigen::VectorXd x = rng.vec(cols, 3.0), y = rng.vec(cols, 3.0);
      const double d = g.divergence(x, y);
      const double ref = 0.5 * (w * (x - y)).squaredNorm();
      CHECK(std::abs(d - ref) <= 1e-12 * std::max(1.0, ref));
      CHECK(d >= 0.0);
      CHECK(d == doctest::Approx(g.divergence(y, x)).epsilon(1e-14));
      CHECK(g.divergence(x, x) == 0.0);
      const double sq = (x - y).squaredNorm();
      CHECK(0.5 * g.sigma_min() * sq <= d * (1 + 1e-8) + 1e-12);
      CHECK(d <= 0.5 * g.sigma_max() * sq * (1 + 1e-8) + 1e-12);
    }
  }
}

TEST_CASE("rank-deficient W reports row-space extent") {
  Eigen::MatrixXd w(1, 2);
  w << 1, 1;
  const auto g = Geometry::from_matrix(w);
  CHECK(g.rank_deficient());
  CHECK(g.sigma_min() == 0.0);
  CHECK(g.sigma_min_effective() == doctest::Approx(2.0));
  CHECK(g.sigma_max() == doctest::Approx(2.0));
}

TEST_CASE("property: score geometry equals explicit operator on tiny ensembles") {
  gen::Rng rng(5);
  for (int inst = 0; inst < 5; ++inst) {
    const int n = 20, J = 3, N = 15;
    // column k of F holds learner k's n*J score contribution
    const Eigen::MatrixXd F = rng.mat(n * J, N);
    const auto explicit_geom = Geometry::from_matrix(F);
    const auto score_geom = Geometry::prediction_score(n, J);
    const Eigen::VectorXd x = rng.vec(N), y = rng.vec(N);
    const Eigen::VectorXd sx = F * x, sy = F * y;
    const double a = explicit_geom.divergence(x, y);
    const double b = score_geom.divergence(sx, sy);
    const Eigen::MatrixXd Sx = Eigen::Map<const Eigen::MatrixXd>(sx.data(), n, J);
    const Eigen::MatrixXd Sy = Eigen::Map<const Eigen::MatrixXd>(sy.data(), n, J);
    CHECK(gen::rel(a, b) <= 1e-10);
    CHECK(gen::rel(score_divergence(Sx, Sy), a) <= 1e-10);
  }
}

TEST_CASE("box helpers") {
  const auto box = BoxD::uniform(2, -1, 1);
  CHECK(box.project(Eigen::Vector2d(2, -3)).isApprox(Eigen::Vector2d(1, -1)));
  CHECK(box.contains(Eigen::Vector2d(0.5, -1)));
  CHECK_FALSE(box.contains(Eigen::Vector2d(1.5, 0)));
  // at the upper face a negative component lies in -N_X
  CHECK(box.stationarity(Eigen::Vector2d(1, 0), Eigen::Vector2d(-1, 0)) == doctest::Approx(0.0));
  CHECK(box.stationarity(Eigen::Vector2d(0, 0), Eigen::Vector2d(3, 4)) == doctest::Approx(5.0));
}

TEST_CASE("geometry templated on float") {
  const auto g = BregmanGeometry<float>::identity(2);
  Eigen::Vector2f x(1, 0), y(0, 0);
  CHECK(g.divergence(x, y) == doctest::Approx(0.5f));
}
