#include "bregcon/problem.hpp"
#include "bregcon/verify.hpp"

#include <doctest.h>

#include "gen.hpp"

#include <cmath>

using namespace bregcon;

namespace {

Oracle flat_ce(const Eigen::VectorXi& labels, const Eigen::VectorXd& w, Eigen::Index n, int J) {
  return [=](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    const Eigen::MatrixXd s = Eigen::Map<const Eigen::MatrixXd>(x.data(), n, J);
    const auto ce = cross_entropy_loss(s, labels, w);
    if (grad) *grad = Eigen::Map<const Eigen::VectorXd>(ce.gradient.data(), n * J);
    return ce.loss;
  };
}

ConstrainedProblem square_with_linear_constraint() {
  ConstrainedProblem p;
  p.objective = [](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    if (g) *g = 2.0 * x;
    return x.squaredNorm();
  };
  p.constraints.push_back([](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    if (g) *g = Eigen::VectorXd::Ones(1);
    return x(0);
  });
  p.offsets = Eigen::VectorXd::Ones(1);
  p.geometry = Geometry::identity(1);
  return p;
}

}  // namespace

TEST_CASE("cross-entropy examples") {
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(1, 2);
  Eigen::VectorXi b(1);
  b << 0;
  auto ce = cross_entropy_loss(s, b, Eigen::VectorXd::Ones(1));
  CHECK(ce.loss == doctest::Approx(std::log(2.0)));
  CHECK(ce.gradient(0, 0) == doctest::Approx(-0.5));
  CHECK(ce.gradient(0, 1) == doctest::Approx(0.5));

  Eigen::MatrixXd s2(2, 2);
  s2 << 1, 0, 0, 1;
  Eigen::VectorXi b2(2);
  b2 << 0, 1;
  ce = cross_entropy_loss(s2, b2, Eigen::VectorXd::Ones(2));
  CHECK(ce.loss == doctest::Approx(2.0 * std::log(1.0 + std::exp(-1.0))));
  CHECK(ce.loss == doctest::Approx(0.6265).epsilon(1e-4));
}

TEST_CASE("property: cross-entropy gradient matches central differences") {
  gen::Rng rng(21);
  for (int inst = 0; inst < 50; ++inst) {
    const int n = rng.integer(1, 8), J = rng.integer(2, 5);
    const Eigen::VectorXi b = rng.labels(n, J);
    Eigen::VectorXd w(n);
    for (int i = 0; i < n; ++i) w(i) = rng.uniform(0.1, 2.0);
    const Eigen::VectorXd x = rng.vec(n * J, 2.0);
    CHECK(finite_difference_check(flat_ce(b, w, n, J), {x}, 1e-5) <= 1e-5);
  }
}

TEST_CASE("lagrangian examples") {
  const auto p = square_with_linear_constraint();
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 2.0);
  CHECK(lagrangian(p, x, Eigen::VectorXd::Constant(1, 3.0)) == doctest::Approx(7.0));
  CHECK(lagrangian(p, x, Eigen::VectorXd::Zero(1)) == doctest::Approx(4.0));
  CHECK_THROWS_AS(lagrangian(p, x, Eigen::VectorXd::Constant(1, -1.0)), ProblemError);
}

TEST_CASE("shrink examples") {
  Eigen::MatrixXd p(1, 2);
  p << 0.01, 0.99;
  const Eigen::MatrixXd q = shrink_predictions(p, 0.05);
  CHECK(q(0, 0) == doctest::Approx(0.05 / 1.04).epsilon(1e-14));
  CHECK(q(0, 1) == doctest::Approx(0.99 / 1.04).epsilon(1e-14));
  CHECK(q(0, 0) == doctest::Approx(0.0481).epsilon(1e-3));

  Eigen::MatrixXd safe(1, 3);
  safe << 0.2, 0.3, 0.5;
  CHECK(shrink_predictions(safe, 0.1).isApprox(safe, 1e-15));

  // an outlier at 0.01 costs log 100 against a budget of 0.01 * 300; flooring brings it near 3
  CHECK(-std::log(0.01) == doctest::Approx(4.6).epsilon(0.01));
  CHECK(-std::log(q(0, 0)) == doctest::Approx(3.0).epsilon(0.02));
}

TEST_CASE("property: shrunk rows sum to one and respect the floor") {
  gen::Rng rng(3);
  for (int inst = 0; inst < 40; ++inst) {
    const int J = rng.integer(2, 7);
    const double floor = rng.uniform(1e-3, 1.0 / J);
    const Eigen::MatrixXd q = shrink_predictions(rng.probs(20, J), floor);
    for (Eigen::Index i = 0; i < q.rows(); ++i) CHECK(std::abs(q.row(i).sum() - 1.0) <= 1e-12);
    CHECK(q.minCoeff() >= floor / (1.0 + J * floor) - 1e-15);
  }
}

TEST_CASE("alpha heuristic examples") {
  Eigen::VectorXi bin(1000);
  bin.setOnes();
  bin.head(300).setZero();
  const auto a = estimate_alpha(bin, 2, {0}, Eigen::VectorXd::Constant(1, 0.01), AlphaPhase::initial);
  CHECK(std::abs(a(0) - 300 * 0.01 * std::log(2.0)) <= 1e-12);
  CHECK(a(0) == doctest::Approx(2.0794).epsilon(1e-4));

  Eigen::VectorXi multi(700);
  for (int i = 0; i < 700; ++i) multi(i) = i / 100;
  const auto m = estimate_alpha(multi, 7, {2, 5}, Eigen::Vector2d(0.02, 0.02), AlphaPhase::initial);
  CHECK(std::abs(m(0) - 100 * 0.02 * std::log(7.0)) <= 1e-12);
  CHECK(m(1) == doctest::Approx(3.8918).epsilon(1e-4));

  CHECK_THROWS_AS(estimate_alpha(multi, 7, {2}, Eigen::Vector2d(0.02, 0.02), AlphaPhase::initial), ProblemError);
  CHECK_THROWS_AS(estimate_alpha(multi, 7, {2}, Eigen::VectorXd::Constant(1, 0.02), AlphaPhase::refit), ProblemError);
}

TEST_CASE("alpha refit") {
  gen::Rng rng(8);
  const Eigen::VectorXi b = rng.labels(60, 3);
  const Eigen::MatrixXd s = rng.mat(60, 3);
  const std::vector<int> cls{0, 2};
  const Eigen::Vector2d e(0.01, 0.03);
  const auto a1 = estimate_alpha(b, 3, cls, e, AlphaPhase::refit, &s);
  const auto a2 = estimate_alpha(b, 3, cls, Eigen::Vector2d(2 * e), AlphaPhase::refit, &s);
  CHECK(a2.isApprox(2.0 * a1, 1e-13));
  CHECK((a1.array() > 0).all());

  Eigen::MatrixXd perfect = Eigen::MatrixXd::Zero(60, 3);
  for (int i = 0; i < 60; ++i) perfect(i, b(i)) = 50.0;
  const auto a0 = estimate_alpha(b, 3, cls, e, AlphaPhase::refit, &perfect);
  CHECK(a0.maxCoeff() < 1e-18);
}

TEST_CASE("balanced weights") {
  Eigen::VectorXi b(4);
  b << 0, 0, 0, 1;
  const auto w = balanced_weights(b, 2);
  CHECK(w(0) == doctest::Approx(4.0 / 6.0));
  CHECK(w(3) == doctest::Approx(2.0));
  CHECK(w.mean() == doctest::Approx(1.0));
}

TEST_CASE("property: objective equals sum of class losses under unit weights") {
  gen::Rng rng(13);
  for (int inst = 0; inst < 10; ++inst) {
    const int J = rng.integer(2, 5), n = 40;
    const Eigen::VectorXi b = rng.labels(n, J);
    NpcSpec spec;
    for (int c = 0; c < J; ++c) spec.constrained_classes.push_back(c);
    spec.alpha = Eigen::VectorXd::LinSpaced(J, 1.0, 2.0);
    spec.expected_error_rates = Eigen::VectorXd::Constant(J, 0.05);
    spec.sample_weights = Eigen::VectorXd::Ones(n);
    const auto sp = build_npc_scores(b, J, spec);
    const Eigen::MatrixXd s = rng.mat(n, J);
    const double total = (sp.constraint_values(s) + spec.alpha).sum();
    CHECK(gen::rel(sp.objective_value(s), total) <= 1e-12);
  }
}

TEST_CASE("npc builder errors") {
  Eigen::VectorXi b(4);
  b << 0, 0, 1, 1;
  NpcSpec spec;
  spec.constrained_classes = {2};
  spec.alpha = Eigen::VectorXd::Ones(1);
  spec.expected_error_rates = Eigen::VectorXd::Constant(1, 0.1);
  CHECK_THROWS_AS(build_npc_scores(b, 3, spec), ProblemError);
  spec.constrained_classes = {};
  CHECK_THROWS_AS(build_npc_scores(b, 2, spec), ProblemError);
}

TEST_CASE("infinite alpha leaves constraints slack") {
  gen::Rng rng(2);
  const Eigen::VectorXi b = rng.labels(30, 3);
  NpcSpec spec;
  spec.constrained_classes = {0, 1};
  spec.alpha = Eigen::VectorXd::Constant(2, std::numeric_limits<double>::infinity());
  spec.expected_error_rates = Eigen::VectorXd::Constant(2, 0.01);
  const auto sp = build_npc_scores(b, 3, spec);
  const Eigen::VectorXd g = sp.constraint_values(rng.mat(30, 3, 5.0));
  CHECK(std::isinf(g(0)));
  CHECK(g.maxCoeff() < 0);
}

TEST_CASE("fairness builder") {
  gen::Rng rng(4);
  const int n = 50;
  const Eigen::VectorXi b = rng.labels(n, 2);
  Eigen::VectorXi two(n), five(n);
  for (int i = 0; i < n; ++i) {
    two(i) = i % 2;
    five(i) = i % 5;
  }
  const double alpha = 0.07;
  const auto p2 = build_fairness_scores(b, 2, FairnessSpec::uniform(two, 2, alpha));
  CHECK(p2.constraints.size() == 2);
  const auto p5 = build_fairness_scores(b, 2, FairnessSpec::uniform(five, 5, alpha));
  CHECK(p5.constraints.size() == 20);

  // zero scores make every group loss log 2
  const Eigen::VectorXd g0 = p5.constraint_values(Eigen::MatrixXd::Zero(n, 2));
  for (Eigen::Index i = 0; i < g0.size(); ++i) CHECK(g0(i) == doctest::Approx(-alpha).epsilon(1e-12));

  for (int k = 0; k < 20; ++k) {
    const Eigen::MatrixXd s = rng.mat(n, 2, 2.0);
    const Eigen::VectorXd g = p5.constraint_values(s);
    for (Eigen::Index i = 0; i + 1 < g.size(); i += 2) CHECK(g(i) + g(i + 1) == doctest::Approx(-2 * alpha));
    const Eigen::VectorXd xi = group_losses(s, b, five, 5);
    const auto& c = p5.constraints[0];
    CHECK(g(0) == doctest::Approx(xi(c.group_g) - xi(c.group_h) - alpha));
  }

  Eigen::VectorXi lonely(n);
  lonely.setZero();
  FairnessSpec bad = FairnessSpec::uniform(lonely, 2, alpha);
  CHECK_THROWS_AS(build_fairness_scores(b, 2, bad), ProblemError);
  CHECK_THROWS_AS(build_fairness_scores(b, 2, FairnessSpec::uniform(lonely, 1, alpha)), ProblemError);
}

TEST_CASE("fairness with infinite alpha has no constraints") {
  Eigen::VectorXi b(4), s(4);
  b << 0, 1, 0, 1;
  s << 0, 0, 1, 1;
  const auto p = build_fairness_scores(b, 2, FairnessSpec::uniform(s, 2, std::numeric_limits<double>::infinity()));
  CHECK(p.constraints.empty());
}

TEST_CASE("property: linear NPC and fairness oracles pass finite differences") {
  gen::Rng rng(31);
  for (int inst = 0; inst < 5; ++inst) {
    const int n = 30, d = 3, J = 3;
    Dataset data;
    data.features = rng.mat(n, d);
    data.labels = rng.labels(n, J);
    data.class_names = {"a", "b", "c"};
    NpcSpec spec;
    spec.constrained_classes = {0, 2};
    spec.alpha = Eigen::Vector2d(1.0, 2.0);
    spec.expected_error_rates = Eigen::Vector2d(0.05, 0.05);
    spec.shrink_floor = 0.01;
    const auto p = build_npc_problem(data, spec, 0.1);
    std::vector<Eigen::VectorXd> pts{rng.vec(p.dim()), rng.vec(p.dim())};
    CHECK(finite_difference_check(p.objective, pts) <= 1e-6);
    for (const auto& c : p.constraints) CHECK(finite_difference_check(c, pts) <= 1e-6);

    data.groups = Eigen::VectorXi(n);
    for (int i = 0; i < n; ++i) (*data.groups)(i) = i % 2;
    data.group_names = {"g0", "g1"};
    const auto dc = build_fairness_problem(data, FairnessSpec::uniform(*data.groups, 2, 0.1), 0.0);
    CHECK(finite_difference_check(dc.objective, pts) <= 1e-6);
    for (const auto& c : dc.constraints) {
      CHECK(finite_difference_check(c.g_part, pts) <= 1e-6);
      CHECK(finite_difference_check(c.h_part, pts) <= 1e-6);
    }
  }
}
