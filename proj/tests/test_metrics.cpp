#include "bregcon/metrics.hpp"

#include <doctest.h>

#include "gen.hpp"

using namespace bregcon;

namespace {

// one-hot scores predicting the given labels
Eigen::MatrixXd predicting(const Eigen::VectorXi& pred, int J) {
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(pred.size(), J);
  for (Eigen::Index i = 0; i < pred.size(); ++i) s(i, pred(i)) = 1.0;
  return s;
}

}  // namespace

TEST_CASE("accuracy examples") {
  Eigen::VectorXi b(10);
  b << 0, 0, 0, 0, 0, 0, 0, 1, 1, 1;
  CHECK(accuracy(predicting(Eigen::VectorXi::Zero(10), 2), b) == doctest::Approx(0.7));
  CHECK(accuracy(predicting(b, 2), b) == 1.0);
  CHECK(accuracy(Eigen::MatrixXd::Zero(10, 3), Eigen::VectorXi::Zero(10)) == 1.0);
}

TEST_CASE("npc violation examples") {
  // 100 class-0 samples with 8 errors, 100 class-1 samples with 1 error
  Eigen::VectorXi b(200), p(200);
  for (int i = 0; i < 200; ++i) {
    b(i) = i < 100 ? 0 : 1;
    p(i) = b(i);
  }
  for (int i = 0; i < 8; ++i) p(i) = 1;
  p(150) = 0;
  const auto s = predicting(p, 2);
  CHECK(npc_violation(s, b, {0, 1}, Eigen::Vector2d(0.05, 0.05)) == doctest::Approx(0.03));
  CHECK(npc_violation(s, b, {0, 1}, Eigen::Vector2d(0.08, 0.01)) == doctest::Approx(0.0));
  CHECK(npc_violation(predicting(b, 2), b, {0, 1}, Eigen::Vector2d(0.0, 0.0)) == 0.0);
}

TEST_CASE("fairness gap examples") {
  CHECK(dispersion({0.2, 0.3}) == doctest::Approx(0.1));
  CHECK(dispersion({0.1, 0.2, 0.3}) == doctest::Approx(0.08165).epsilon(1e-4));
  CHECK(dispersion({0.1, 0.2, 0.3}) == doctest::Approx(std::sqrt(2.0 / 300.0)));
  CHECK(dispersion({0.25, 0.25, 0.25}) == 0.0);
}

TEST_CASE("property: metric identities on random predictions") {
  gen::Rng rng(81);
  for (int inst = 0; inst < 30; ++inst) {
    const int n = rng.integer(20, 200), J = rng.integer(2, 5), S = rng.integer(2, 4);
    const Eigen::VectorXi b = rng.labels(n, J), grp = rng.labels(n, S);
    const Eigen::MatrixXd s = rng.mat(n, J);

    // accuracy + frequency-weighted class error = 1
    const Eigen::VectorXd err = per_class_error(s, b, J);
    double weighted = 0.0;
    for (int c = 0; c < J; ++c) weighted += err(c) * double((b.array() == c).count()) / n;
    CHECK(accuracy(s, b) + weighted == doctest::Approx(1.0));

    // relabeling groups leaves the gap unchanged
    Eigen::VectorXi perm(S);
    for (int k = 0; k < S; ++k) perm(k) = (k + 1) % S;
    Eigen::VectorXi shuffled(n);
    for (int i = 0; i < n; ++i) shuffled(i) = perm(grp(i));
    CHECK(fairness_gap(s, b, grp, S) == doctest::Approx(fairness_gap(s, b, shuffled, S)));

    // flipping a correct prediction to a wrong one never lowers the violation
    std::vector<int> cls;
    for (int c = 0; c < J; ++c) cls.push_back(c);
    const Eigen::VectorXd e = Eigen::VectorXd::Constant(J, 0.1);
    const double before = npc_violation(s, b, cls, e);
    const Eigen::VectorXi pred = predict_labels(s);
    for (int i = 0; i < n; ++i) {
      if (pred(i) != b(i)) continue;
      Eigen::MatrixXd worse = s;
      worse(i, (b(i) + 1) % J) = worse.row(i).maxCoeff() + 1.0;
      CHECK(npc_violation(worse, b, cls, e) >= before);
      break;
    }
  }
}

TEST_CASE("group error rates") {
  Eigen::VectorXi b(4), g(4);
  b << 0, 1, 0, 1;
  g << 0, 0, 1, 1;
  Eigen::VectorXi p(4);
  p << 0, 0, 0, 1;
  const auto r = group_error_rates(predicting(p, 2), b, g, 2);
  CHECK(r(0) == doctest::Approx(0.5));
  CHECK(r(1) == 0.0);
  CHECK(fairness_gap(predicting(p, 2), b, g, 2) == doctest::Approx(0.5));
}
