#include "bregcon/verify.hpp"

#include <doctest.h>

#include "gen.hpp"

using namespace bregcon;

TEST_CASE("finite differences catch a scaled gradient") {
  gen::Rng rng(91);
  const Eigen::MatrixXd B = rng.mat(4, 4);
  const Eigen::MatrixXd Q = B.transpose() * B + Eigen::MatrixXd::Identity(4, 4);
  const Eigen::VectorXd c = rng.vec(4);
  Oracle good = [&](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    if (g) *g = Q * x + c;
    return 0.5 * x.dot(Q * x) + c.dot(x);
  };
  Oracle wrong = [&](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    if (g) *g = 2.0 * (Q * x + c);
    return 0.5 * x.dot(Q * x) + c.dot(x);
  };
  const std::vector<Eigen::VectorXd> pts{rng.vec(4, 3.0), rng.vec(4, 3.0)};
  CHECK(finite_difference_check(good, pts) <= 1e-9);
  CHECK(finite_difference_check(wrong, pts) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("small QP oracle examples") {
  const auto toy = toy_qp();
  const auto s = small_qp_oracle<double>(toy.Q, toy.c, toy.A, toy.b);
  CHECK(s.x.isApprox(Eigen::Vector2d(0.5, 0.5)));
  CHECK(s.y(0) == doctest::Approx(1.0));
  CHECK(s.f == doctest::Approx(0.5));
  CHECK(qp_kkt_residual<double>(toy.Q, toy.c, toy.A, toy.b, s.x, s.y) <= 1e-12);

  Eigen::Matrix2d Q;
  Q << 2, 0.5, 0.5, 1;
  const Eigen::Vector2d c(1, -1);
  const auto u = small_qp_oracle<double>(Q, c, Eigen::MatrixXd(0, 2), Eigen::VectorXd(0));
  CHECK(u.x.isApprox(-Q.inverse() * c));

  Eigen::MatrixXd A2(2, 2);
  A2 << -1, -1, -1, -1;
  const auto dup = small_qp_oracle<double>(toy.Q, toy.c, A2, Eigen::Vector2d(-1, -1));
  CHECK(dup.x.isApprox(s.x));
  CHECK(dup.y.sum() == doctest::Approx(1.0));

  Eigen::MatrixXd A3(2, 1);
  A3 << 1, -1;
  CHECK_THROWS_AS(small_qp_oracle<double>(Eigen::MatrixXd::Identity(1, 1), Eigen::VectorXd::Zero(1), A3,
                                          Eigen::Vector2d(-1, -1)),
                  ProblemError);
  CHECK_THROWS_AS(small_qp_oracle<double>(Eigen::MatrixXd::Identity(6, 6), Eigen::VectorXd::Zero(6),
                                          Eigen::MatrixXd(0, 6), Eigen::VectorXd(0)),
                  ProblemError);
}

TEST_CASE("property: oracle solutions satisfy KKT on random QPs") {
  for (int s = 0; s < 40; ++s) {
    const auto qp = random_qp(4000 + s, 1 + s % 5, s % 5, 0.05);
    const auto sol = small_qp_oracle<double>(qp.Q, qp.c, qp.A, qp.b);
    CHECK(qp_kkt_residual<double>(qp.Q, qp.c, qp.A, qp.b, sol.x, sol.y) <= 1e-12 * std::max(1.0, qp.c.norm()));
    const auto again = random_qp(4000 + s, 1 + s % 5, s % 5, 0.05);
    CHECK(again.Q == qp.Q);
    CHECK(again.b == qp.b);
  }
}

TEST_CASE("QP oracle in long double agrees") {
  const auto toy = toy_qp();
  const auto s = small_qp_oracle<long double>(toy.Q.cast<long double>(), toy.c.cast<long double>(),
                                              toy.A.cast<long double>(), toy.b.cast<long double>());
  CHECK(double(s.f) == doctest::Approx(0.5));
}
