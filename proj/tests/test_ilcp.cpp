#include "bregcon/ilcp.hpp"
#include "bregcon/verify.hpp"

#include <doctest.h>

#include "gen.hpp"

using namespace bregcon;

namespace {

Oracle scaled_square(double a, double shift) {
  return [a, shift](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    if (g) *g = 2.0 * a * (x.array() - shift).matrix();
    return a * (x.array() - shift).square().sum();
  };
}

// f = x^2, g - h = x^2 - (x - 1)^2 = 2x - 1
DcProblem one_dim() {
  DcProblem dc;
  dc.objective = scaled_square(1.0, 0.0);
  dc.geometry = Geometry::identity(1);
  dc.mu = 2.0;
  dc.box = BoxD::uniform(1, -2, 2);
  DcConstraint c;
  c.g_part = scaled_square(1.0, 0.0);
  c.h_part = scaled_square(1.0, 1.0);
  c.eta = 0.0;
  c.l_h = 2.0;
  c.lipschitz = 2.0;
  dc.constraints.push_back(c);
  return dc;
}

IlcpConfig small_config(const DcProblem& dc, double eps = 0.05) {
  IlcpConfig cfg;
  cfg.L = 1.5 * std::max(dc.rho(), 1.0) + 0.5;
  cfg.eps = eps;
  cfg.max_outer = 200;
  return cfg;
}

}  // namespace

TEST_CASE("one-dimensional subproblem") {
  const auto dc = one_dim();
  const Eigen::VectorXd anchor = Eigen::VectorXd::Zero(1);
  // L = rho = 2 is rejected; the hand example needs only L > rho
  CHECK_THROWS_AS(assemble_subproblem(dc, anchor, 2.0), ProblemError);

  const double L = 2.5;
  const auto sub = assemble_subproblem(dc, anchor, L);
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 0.3);
  CHECK(sub.objective_value(x) == doctest::Approx(0.09 + 0.5 * L * 0.09));
  CHECK(sub.constraint_values(x)(0) == doctest::Approx(2 * 0.3 - 1 + 0.5 * L * 0.09));
  CHECK(sub.constraint_values(anchor)(0) == doctest::Approx(-1.0));
  CHECK(sub.constants.mu == doctest::Approx(L - 2.0));

  LinearBackend backend(sub);
  AbpdConfig ac;
  ac.mu = sub.constants.mu;
  ac.tau0 = 2.0 / ac.mu;
  ac.l_g = sub.constants.l_g;
  ac.sigma0 = default_sigma0(ac.tau0, ac.l_g);
  ac.max_iters = 200;
  const auto res = abpd_run(backend, ac, anchor);
  CHECK(std::abs(res.x_last(0)) <= 1e-6);
}

TEST_CASE("property: subproblem agrees with the DC problem at its anchor") {
  for (int s = 0; s < 10; ++s) {
    const auto dc = dc_instance_generator(300 + s, 1 + s % 5, 1 + s % 4);
    gen::Rng rng(s);
    const Eigen::VectorXd anchor = rng.vec(dc.dim(), 0.5);
    const auto sub = assemble_subproblem(dc, anchor, dc.rho() + 1.0);
    CHECK((sub.constraint_values(anchor) - dc.constraint_values(anchor)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(sub.objective_value(anchor) == doctest::Approx(dc.objective(anchor, nullptr)));
    CHECK(dc.max_violation(Eigen::VectorXd::Zero(dc.dim())) <= -0.1);
  }
}

TEST_CASE("generator is reproducible") {
  const auto a = dc_instance_generator(5, 4, 3);
  const auto b = dc_instance_generator(5, 4, 3);
  gen::Rng rng(1);
  const Eigen::VectorXd x = rng.vec(4);
  CHECK(a.constraint_values(x) == b.constraint_values(x));
  CHECK(a.objective(x, nullptr) == b.objective(x, nullptr));
}

TEST_CASE("large L keeps the step near the anchor") {
  const auto dc = dc_instance_generator(9, 3, 2);
  IlcpConfig cfg = small_config(dc);
  cfg.L = 1e4;
  cfg.max_outer = 1;
  const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(3);
  const auto res = ilcp_run(VectorDcModel(dc), cfg, x0);
  CHECK(res.x.norm() <= 1e-2);
}

TEST_CASE("zero outer iterations return the start") {
  const auto dc = dc_instance_generator(4, 2, 2);
  IlcpConfig cfg = small_config(dc);
  cfg.max_outer = 0;
  const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(2);
  const auto res = ilcp_run(VectorDcModel(dc), cfg, x0);
  CHECK(res.records.empty());
  CHECK(res.x == x0);
}

TEST_CASE("infeasible start is rejected") {
  auto dc = dc_instance_generator(4, 2, 2);
  dc.constraints[0].eta = -50.0;
  CHECK_THROWS_AS(ilcp_run(VectorDcModel(dc), small_config(dc), Eigen::VectorXd::Zero(2)), InfeasibleStart);
}

TEST_CASE("config validation and eps34") {
  IlcpConfig cfg;
  cfg.L = 1.0;
  CHECK_THROWS_AS(cfg.validate(2.0, 1.0), ConfigError);
  CHECK_THROWS_AS(cfg.validate(0.1, 0.5), ConfigError);  // 1/sigma_max = 2
  cfg.L = 3.0;
  CHECK_NOTHROW(cfg.validate(2.0, 1.0));
  cfg.eps = 0.1;
  CHECK(cfg.eps34_value(1.0, 1.0, 1.0) == doctest::Approx(2.0 * 0.01 / 36.0));
}

TEST_CASE("without constraints the outer loop is proximal point on f") {
  const auto dc = dc_instance_generator(12, 3, 0);
  IlcpConfig cfg = small_config(dc, 1e-3);
  cfg.max_outer = 500;
  const auto res = ilcp_run(VectorDcModel(dc), cfg, Eigen::VectorXd::Zero(3));
  CHECK(res.fj_stop);
  for (std::size_t t = 1; t < res.records.size(); ++t)
    CHECK(res.records[t].objective <= res.records[t - 1].objective + 1e-12);
  // box-projected stationarity of f at the exit point
  Eigen::VectorXd g;
  dc.objective(res.x, &g);
  CHECK(dc.box->stationarity(res.x, g) <= 2 * cfg.eps);
  CHECK(res.residual.y0 == doctest::Approx(1.0));
}

TEST_CASE("strictly slack constraints do not change the path") {
  auto loose = dc_instance_generator(13, 3, 2);
  for (auto& c : loose.constraints) c.eta = 1e6;
  const auto free = dc_instance_generator(13, 3, 0);
  IlcpConfig cfg = small_config(free, 1e-3);
  cfg.L = 1.5 * std::max(loose.rho(), 1.0) + 0.5;
  cfg.max_outer = 2000;
  const auto a = ilcp_run(VectorDcModel(loose), cfg, Eigen::VectorXd::Zero(3));
  const auto b = ilcp_run(VectorDcModel(free), cfg, Eigen::VectorXd::Zero(3));
  CHECK((a.x - b.x).norm() <= 1e-2);
}

TEST_CASE("FJ residual at the toy KKT point") {
  DcProblem dc;
  dc.objective = scaled_square(1.0, 0.0);
  dc.geometry = Geometry::identity(2);
  DcConstraint c;
  c.g_part = [](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    if (g) *g = -Eigen::VectorXd::Ones(2);
    return 1.0 - x.sum();
  };
  c.h_part = [](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    if (g) *g = Eigen::VectorXd::Zero(x.size());
    return 0.0;
  };
  dc.constraints.push_back(c);
  const auto r = fj_residual(dc, Eigen::Vector2d(0.5, 0.5), Eigen::VectorXd::Ones(1));
  CHECK(r.y0 + r.y.sum() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r.stationarity <= 1e-8);
  CHECK(r.max_complementarity() <= 1e-8);
  CHECK(std::abs(r.feasibility) <= 1e-12);

  const auto u = fj_residual(dc, Eigen::Vector2d(2.0, 0.0), Eigen::VectorXd());
  CHECK(u.y0 == 1.0);
  CHECK(u.stationarity == doctest::Approx(4.0));
}

TEST_CASE("property: outer iterates stay feasible and descend on random DC instances") {
  for (int s = 0; s < 8; ++s) {
    const auto dc = dc_instance_generator(2000 + s, 2 + s % 4, 1 + s % 3);
    const auto cfg = small_config(dc, 0.05);
    const auto res = ilcp_run(VectorDcModel(dc), cfg, Eigen::VectorXd::Zero(dc.dim()));
    const double descent = 3.0 * res.eps34;
    for (const auto& r : res.records) {
      CHECK(r.max_violation <= 0.0);
      if (&r == &res.records.back() && res.fj_stop) {
        // the stopping step only carries the subproblem tolerance
        CHECK(r.next_violation <= res.eps34);
        continue;
      }
      CHECK(r.next_violation <= 0.0);
      CHECK(r.objective - r.next_objective >= 0.9 * descent);
    }
    CHECK(res.residual.y0 + res.residual.y.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(res.residual.y.minCoeff() >= 0.0);
  }
}

TEST_CASE("convex instance: ILCP and a direct ABPD solve agree") {
  DcInstanceOptions opts;
  opts.zero_h = true;
  for (int s = 0; s < 4; ++s) {
    const auto dc = dc_instance_generator(77 + s, 3, 2, opts);
    REQUIRE(dc.rho() == 0.0);
    auto cfg = small_config(dc, 1e-3);
    cfg.max_outer = 3000;
    const auto il = ilcp_run(VectorDcModel(dc), cfg, Eigen::VectorXd::Zero(3));

    ConstrainedProblem p;
    p.objective = dc.objective;
    p.offsets.resize(2);
    double lg2 = 0.0;
    for (int i = 0; i < 2; ++i) {
      p.constraints.push_back(dc.constraints[i].g_part);
      p.offsets(i) = dc.constraints[i].eta;
      lg2 += dc.constraints[i].lipschitz * dc.constraints[i].lipschitz;
    }
    p.geometry = dc.geometry;
    p.feasible_box = dc.box;
    p.constants.mu = dc.mu;
    p.constants.l_g = std::sqrt(lg2);
    LinearBackend backend(p);
    AbpdConfig ac;
    ac.mu = dc.mu;
    ac.tau0 = 2.0 / dc.mu;
    ac.l_g = p.constants.l_g;
    ac.sigma0 = default_sigma0(ac.tau0, ac.l_g);
    ac.max_iters = 3000;
    const auto direct = abpd_run(backend, ac, Eigen::VectorXd::Zero(3));

    CHECK(dc.max_violation(il.x) <= 0.0);
    CHECK(dc.max_violation(direct.xbar) <= 1e-3);
    CHECK(dc.objective(il.x, nullptr) == doctest::Approx(dc.objective(direct.xbar, nullptr)).epsilon(1e-2));
  }
}
