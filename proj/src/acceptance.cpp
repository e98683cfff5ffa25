#include "bregcon/acceptance.hpp"

#include "bregcon/abpd.hpp"
#include "bregcon/ilcp.hpp"
#include "bregcon/metrics.hpp"
#include "bregcon/synthetic.hpp"
#include "bregcon/tasks.hpp"
#include "bregcon/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <sstream>

namespace bregcon {

namespace {

struct Outcome {
  bool ok = true;
  int failures = 0;
  std::ostringstream detail;

  void fail(const std::string& why) {
    if (ok) detail.str("");
    ok = false;
    if (++failures > 4) {
      if (failures == 5) detail << "; ...";
      return;
    }
    if (failures > 1) detail << "; ";
    detail << why;
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// ------------------------------------------------------------------ 1

void parameters(Outcome& out) {
  const long K = 10000;
  double worst_product = 0.0, worst_err_sum = 0.0;
  int configs = 0;
  for (double mu : {0.0, 0.5, 1.0, 2.0})
    for (double tau0 : {0.25, 1.0})
      for (double sigma0 : {0.25, 1.0}) {
        if (mu * tau0 > 2.0) continue;
        ++configs;
        const std::string tag = "(mu " + fmt(mu) + ", tau0 " + fmt(tau0) + ", sigma0 " + fmt(sigma0) + ")";
        const auto trace = parameter_trace(tau0, sigma0, mu, K + 1);
        const auto bad = check_parameter_conditions(trace, mu, 1.0, 1.0, 1e-10);
        if (!bad.empty())
          out.fail(tag + " condition " + std::to_string(bad.front().condition) + " fails at k " +
                   std::to_string(bad.front().k));

        double T = 0.0;
        for (long k = 0; k < K; ++k) {
          const auto& p = trace[static_cast<std::size_t>(k)];
          const double rel = std::abs(p.tau * p.sigma - tau0 * sigma0) / (tau0 * sigma0);
          worst_product = std::max(worst_product, rel);
          if (rel > 1e-12) {
            out.fail(tag + " tau*sigma drifts at k " + std::to_string(k));
            break;
          }
          T += p.t;
          const double Kk = static_cast<double>(k + 1);
          if (T < 1.0 + mu * tau0 * (Kk - 1.0) * Kk / 6.0 - 1e-9 * T) {
            out.fail(tag + " T_K below its lower bound at K " + std::to_string(k + 1));
            break;
          }
        }

        // mu > 0 pairs with the (k+2)^-7 schedule; the (k+2)^-4 one is only claimed for mu = 0.
        std::vector<double> schedule_mus{mu};
        if (mu == 0.0) schedule_mus.push_back(1.0);
        for (double smu : schedule_mus) {
          double sd = 0.0, sn = 0.0;
          for (long k = 0; k < K; ++k) {
            const auto& p = trace[static_cast<std::size_t>(k)];
            const InexactTarget e = inexactness_schedule(k, tau0, smu);
            sd += p.t * std::sqrt(e.delta * (mu + 1.0 / p.tau));
            sn += p.t * std::sqrt(e.nu * (mu + 1.0 / p.tau));
          }
          worst_err_sum = std::max({worst_err_sum, sd, sn});
          if (sd > 1.0 || sn > 1.0) out.fail(tag + " error sum " + fmt(std::max(sd, sn)) + " > 1");
        }
      }
  if (out.ok)
    out.detail << configs << " configs, K " << K << ", max |tau sigma - tau0 sigma0| rel " << fmt(worst_product)
               << ", max error sum " << fmt(worst_err_sum);
}

// ------------------------------------------------------------------ 2

double qp_residual(const ConstrainedProblem& p, const Eigen::VectorXd& x, double fstar) {
  return std::max(p.objective_value(x) - fstar, p.constraint_values(x).cwiseMax(0.0).norm());
}

// Ergodic residual of ABPD at each K in ks (single run; the iterates do not depend on the horizon).
std::vector<double> residual_curve(const ConstrainedProblem& p, double mu, double fstar, const std::vector<long>& ks) {
  LinearBackend be(p);
  AbpdConfig ac;
  ac.mu = mu;
  ac.tau0 = mu > 0.0 ? std::min(1.0, 2.0 / mu) : 1.0;
  ac.l_g = p.constants.l_g;
  ac.sigma0 = default_sigma0(ac.tau0, ac.l_g);
  ac.max_iters = ks.back();
  ac.track_ergodic = false;
  std::vector<double> res;
  AbpdMonitor<Eigen::VectorXd> mon = [&](AbpdState<Eigen::VectorXd>& s, const AbpdRecord&) {
    if (std::find(ks.begin(), ks.end(), s.k + 1) != ks.end()) res.push_back(qp_residual(p, s.xbar, fstar));
    return Control::proceed;
  };
  abpd_run(be, ac, Eigen::VectorXd::Zero(p.dim()).eval(), std::nullopt, mon);
  return res;
}

void rates(Outcome& out) {
  const std::vector<long> ks{100, 200, 400, 800};
  const double mu_floor = 0.1;
  double worst_fit = 0.0, worst_ratio = 0.0;
  for (int s = 0; s < 20; ++s) {
    const int dim = 2 + s % 4, m = 1 + s % 4;
    const QpInstance qp = random_qp(500 + static_cast<std::uint64_t>(s), dim, m, mu_floor);
    const auto ref = small_qp_oracle<double>(qp.Q, qp.c, qp.A, qp.b);
    const std::string tag = "qp " + std::to_string(s);

    // mu = 0 schedule
    {
      const ConstrainedProblem p = qp_problem(qp, 0.0);
      const auto r = residual_curve(p, 0.0, ref.f, ks);
      const double C = 100.0 * r[0];
      for (std::size_t i = 1; i < ks.size(); ++i) {
        const double ratio = r[i] * static_cast<double>(ks[i]) / C;
        worst_fit = std::max(worst_fit, ratio);
        if (ratio > 1.5) out.fail(tag + " mu=0: res(" + std::to_string(ks[i]) + ") K / C = " + fmt(ratio));
      }
    }
    // mu = lambda_min(Q) schedule
    {
      const ConstrainedProblem p = qp_problem(qp, mu_floor);
      const auto r = residual_curve(p, mu_floor, ref.f, ks);
      for (std::size_t i = 1; i < ks.size(); ++i) {
        const double ratio = r[i] / r[i - 1];
        worst_ratio = std::max(worst_ratio, ratio);
        if (ratio > 1.0 / 3.0)
          out.fail(tag + " mu>0: res(" + std::to_string(ks[i]) + ") / res(" + std::to_string(ks[i - 1]) +
                   ") = " + fmt(ratio));
      }
    }
  }
  if (out.ok)
    out.detail << "20 QPs; mu=0 worst res(K) K / C " << fmt(worst_fit) << " (limit 1.5); mu=" << mu_floor
               << " worst res(2K)/res(K) " << fmt(worst_ratio) << " (limit 0.333)";
}

// ------------------------------------------------------------------ 3

void eps_optimality(Outcome& out) {
  const QpInstance qp = toy_qp();
  const double mu = 2.0, tau0 = 1.0, eps = 1e-4;
  const BoxD box = BoxD::uniform(2, -1.0, 1.0);
  const ConstrainedProblem p = qp_problem(qp, mu, box);
  const auto ref = small_qp_oracle<double>(qp.Q, qp.c, qp.A, qp.b);
  const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(2);

  AbpdConfig ac;
  ac.mu = mu;
  ac.tau0 = tau0;
  ac.l_g = p.constants.l_g;
  ac.sigma0 = default_sigma0(tau0, ac.l_g);
  ac.track_ergodic = false;

  // predicted budget from the measured constants
  const double m = static_cast<double>(qp.A.rows());
  const double yplus = (ref.y.lpNorm<1>() + 1.0) / std::sqrt(m);
  const double delta_star = p.geometry.divergence(x0, ref.x) / tau0 + yplus * yplus / (2.0 * ac.sigma0);
  const double dx = diameter_bound(p.geometry, box);
  const double K_pred = std::sqrt(6.0 / (mu * tau0) * (delta_star + dx * dx + std::sqrt(2.0) * dx) / eps) + 1.0;
  ac.max_iters = static_cast<long>(std::ceil(2.0 * K_pred));

  LinearBackend be(p);
  long reached = -1;
  double gap = 0.0, viol = 0.0;
  AbpdMonitor<Eigen::VectorXd> mon = [&](AbpdState<Eigen::VectorXd>& s, const AbpdRecord&) {
    gap = p.objective_value(s.xbar) - ref.f;
    viol = p.constraint_values(s.xbar).cwiseMax(0.0).norm();
    if (gap <= eps && viol <= eps) {
      reached = s.k + 1;
      return Control::stop;
    }
    return Control::proceed;
  };
  abpd_run(be, ac, x0, std::nullopt, mon);
  out.detail << "K_pred " << fmt(K_pred) << " (Delta " << fmt(delta_star) << ", D_X " << fmt(dx) << ", sigma0 "
             << fmt(ac.sigma0) << "); ";
  if (reached < 0) {
    out.ok = false;
    out.detail << "not eps-optimal within " << ac.max_iters << " iterations (gap " << fmt(gap) << ", violation "
               << fmt(viol) << ")";
  } else {
    out.detail << "eps-optimal at K " << reached << " (gap " << fmt(gap) << ", violation " << fmt(viol) << ")";
  }
}

// ------------------------------------------------------------------ 4

void ilcp_suite(Outcome& out) {
  const double eps = 1e-2;
  double worst_phi = -std::numeric_limits<double>::infinity(), worst_descent = std::numeric_limits<double>::infinity();
  double worst_bound_use = 0.0, worst_fj = 0.0;
  for (int s = 0; s < 20; ++s) {
    const int dim = 2 + s % 5, m = 1 + s % 3;
    const DcProblem dc = dc_instance_generator(1000 + static_cast<std::uint64_t>(s), dim, m);
    const std::string tag = "instance " + std::to_string(s);
    VectorDcModel model(dc);
    const double rho = dc.rho();
    IlcpConfig cfg;
    cfg.L = 1.5 * std::max(rho, 1.0) + 0.5;
    cfg.eps = eps;
    cfg.max_outer = 2000;
    cfg.max_inner = 5000;
    const auto res = ilcp_run(model, cfg, Eigen::VectorXd::Zero(dim).eval());
    if (!res.fj_stop) {
      out.fail(tag + ": no FJ stop within " + std::to_string(cfg.max_outer) + " outer iterations");
      continue;
    }
    const double smin = model.sigma_min(), smax = model.sigma_max();
    const double d = 3.0 * (cfg.L - rho) * smin * eps * eps / (4.0 * cfg.L * cfg.L * smax * smax);
    const auto& rec = res.records;

    // (a) every outer iterate up to the identified point is feasible
    for (const auto& r : rec) {
      worst_phi = std::max(worst_phi, r.max_violation);
      if (r.max_violation > 1e-8) {
        out.fail(tag + ": phi_bar(x^" + std::to_string(r.t) + ") = " + fmt(r.max_violation));
        break;
      }
    }
    // (b) sufficient decrease on every step that did not trigger the stop
    double fmin = rec.front().objective;
    for (std::size_t i = 0; i + 1 < rec.size(); ++i) {
      const double desc = rec[i].objective - rec[i].next_objective;
      worst_descent = std::min(worst_descent, desc / d);
      if (desc < 0.9 * d) out.fail(tag + ": step " + std::to_string(i) + " descent " + fmt(desc) + " < 0.9 d");
      fmin = std::min(fmin, rec[i].next_objective);
    }
    // (c) iteration bound from measured f(x^0) - min f
    const double T = static_cast<double>(rec.size() - 1);
    const double bound = (rec.front().objective - fmin) / d;
    if (bound > 0.0) worst_bound_use = std::max(worst_bound_use, T / bound);
    if (T > bound && T > 0.0) out.fail(tag + ": " + fmt(T) + " outer steps exceed bound " + fmt(bound));
    // (d) FJ residual at exit
    const double lim = eps + res.slack;
    const double comp = std::max({res.residual.stationarity, res.residual.max_complementarity(),
                                  res.residual.feasibility});
    worst_fj = std::max(worst_fj, comp / lim);
    if (comp > lim) out.fail(tag + ": FJ residual " + fmt(comp) + " > eps + slack " + fmt(lim));
  }
  if (out.ok)
    out.detail << "20 instances: max phi_bar " << fmt(worst_phi) << ", min descent/d " << fmt(worst_descent)
               << ", max T/bound " << fmt(worst_bound_use) << ", max FJ residual/(eps+slack) " << fmt(worst_fj);
}

// ------------------------------------------------------------------ 5

std::vector<Eigen::VectorXd> random_points(std::mt19937_64& rng, Eigen::Index dim, int count, double scale) {
  std::normal_distribution<double> nd(0.0, scale);
  std::vector<Eigen::VectorXd> pts;
  for (int k = 0; k < count; ++k) {
    Eigen::VectorXd x(dim);
    for (Eigen::Index j = 0; j < dim; ++j) x(j) = nd(rng);
    pts.push_back(std::move(x));
  }
  return pts;
}

void gradients(Outcome& out) {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  auto check = [&](const std::string& what, const Oracle& o, const std::vector<Eigen::VectorXd>& pts) {
    const double e = finite_difference_check(o, pts);
    worst = std::max(worst, e);
    if (!(e <= 1e-5)) out.fail(what + " FD error " + fmt(e));
  };

  // NPC, linear model, shrunk cross-entropy
  const Dataset npc = drybean_surrogate(5, 80);
  NpcSpec spec;
  spec.constrained_classes = {1, 2, 4};
  spec.expected_error_rates = Eigen::Vector3d(0.01, 0.03, 0.02);
  spec.shrink_floor = 0.01 / npc.num_classes();
  spec.alpha = estimate_alpha(npc, spec.expected_error_rates, spec.constrained_classes, AlphaPhase::initial);
  const ConstrainedProblem np = build_npc_problem(npc, spec, 0.1);
  const auto npts = random_points(rng, np.dim(), 50, 0.3);
  check("NPC objective", np.objective, npts);
  for (std::size_t i = 0; i < np.constraints.size(); ++i)
    check("NPC constraint " + std::to_string(i), np.constraints[i], npts);

  // fairness DC parts
  const Dataset fair = fairness_skew(5, 90);
  const FairnessSpec fs = FairnessSpec::uniform(*fair.groups, fair.num_groups(), 0.05, 10.0);
  const DcProblem fp = build_fairness_problem(fair, fs, 0.0);
  const auto fpts = random_points(rng, fp.dim(), 50, 0.5);
  check("fairness objective", fp.objective, fpts);
  for (std::size_t i = 0; i < fp.constraints.size(); ++i) {
    check("fairness g part " + std::to_string(i), fp.constraints[i].g_part, fpts);
    check("fairness h part " + std::to_string(i), fp.constraints[i].h_part, fpts);
  }

  // GBM composite loss in score space
  const int J = npc.num_classes();
  const Eigen::Index n = npc.n();
  const ScoreProblem sp = build_npc_scores(npc.labels, J, spec);
  const Eigen::MatrixXd anchor = Eigen::Map<const Eigen::MatrixXd>(random_points(rng, n * J, 1, 0.5)[0].data(), n, J);
  Eigen::VectorXd y(sp.num_constraints());
  std::uniform_real_distribution<double> unit(0.0, 2.0);
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = unit(rng);
  const Oracle composite = [&](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    const Eigen::MatrixXd S = Eigen::Map<const Eigen::MatrixXd>(x.data(), n, J);
    Eigen::MatrixXd G;
    const double v = gbm_composite(sp, S, anchor, y, 0.7, grad ? &G : nullptr, nullptr);
    if (grad) *grad = Eigen::Map<const Eigen::VectorXd>(G.data(), G.size());
    return v;
  };
  check("GBM composite", composite, random_points(rng, n * J, 50, 1.0));
  if (out.ok) out.detail << "objective, " << np.constraints.size() << " NPC constraints, " << fp.constraints.size()
                         << " fairness g/h pairs, GBM composite; worst relative FD error " << fmt(worst);
}

// ------------------------------------------------------------------ 6

// W maps learner weights to stacked (column-major n x J) training scores.
Eigen::MatrixXd score_operator(const GbmModel& m, const Eigen::MatrixXd& features) {
  const Eigen::Index n = features.rows();
  const auto& learners = m.pool->learners;
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(n * m.classes, static_cast<Eigen::Index>(learners.size()));
  for (std::size_t k = 0; k < learners.size(); ++k)
    for (Eigen::Index i = 0; i < n; ++i)
      W(i + n * learners[k].output_class, static_cast<Eigen::Index>(k)) = learners[k].tree.predict(features.row(i));
  return W;
}

struct ExhaustiveSplit {
  double gain = 0.0;
  int feature = -1;
  std::vector<bool> left;
};

ExhaustiveSplit exhaustive_stump(const Eigen::MatrixXd& x, const Eigen::VectorXd& g, const Eigen::VectorXd& h,
                                 double lambda) {
  ExhaustiveSplit best;
  const double G = g.sum(), H = h.sum();
  for (Eigen::Index f = 0; f < x.cols(); ++f)
    for (Eigen::Index t = 0; t < x.rows(); ++t) {
      const double thr = x(t, f);
      double gl = 0.0, hl = 0.0;
      long nl = 0;
      for (Eigen::Index i = 0; i < x.rows(); ++i)
        if (x(i, f) <= thr) {
          gl += g(i);
          hl += h(i);
          ++nl;
        }
      if (nl == 0 || nl == x.rows()) continue;
      const double gain = split_gain(gl, hl, G - gl, H - hl, lambda);
      if (gain > best.gain) {
        best.gain = gain;
        best.feature = static_cast<int>(f);
        best.left.assign(static_cast<std::size_t>(x.rows()), false);
        for (Eigen::Index i = 0; i < x.rows(); ++i) best.left[static_cast<std::size_t>(i)] = x(i, f) <= thr;
      }
    }
  return best;
}

void gbm_suite(Outcome& out, int threads) {
  std::mt19937_64 rng(77);
  // (i) score-space divergence against the explicit operator
  double worst_div = 0.0;
  for (int inst = 0; inst < 5; ++inst) {
    const Dataset d = drybean_surrogate(30 + static_cast<std::uint64_t>(inst), 50);
    const FeatureIndex index(d.features);
    GbmParams gp;
    gp.rounds = 4;
    gp.tree.max_depth = 2;
    ScoreProblem sp;
    sp.labels = d.labels;
    sp.classes = d.num_classes();
    sp.objective.weights = Eigen::VectorXd::Ones(d.n());
    const GbmModel fit = train_unconstrained_gbm(d.labels, d.num_classes(), sp.objective.weights, index, gp, 4);
    const Eigen::Index K = static_cast<Eigen::Index>(fit.pool->learners.size());
    std::normal_distribution<double> nd;
    GbmModel a = fit, b = fit;
    a.weights = Eigen::VectorXd::NullaryExpr(K, [&] { return nd(rng); });
    b.weights = Eigen::VectorXd::NullaryExpr(K, [&] { return nd(rng); });
    const double ds = score_divergence(a.predict_scores(d.features), b.predict_scores(d.features));
    const Geometry W = Geometry::from_matrix(score_operator(fit, d.features));
    const double dw = W.divergence(a.weights, b.weights);
    const double err = std::abs(ds - dw) / std::max(1.0, std::abs(dw));
    worst_div = std::max(worst_div, err);
    if (err > 1e-10) out.fail("divergence mismatch " + fmt(err) + " on instance " + std::to_string(inst));
  }

  // (ii) depth-1 splits against exhaustive search
  int agreed = 0;
  for (int t = 0; t < 20; ++t) {
    const Eigen::Index n = 10 + 2 * t, dims = 1 + t % 4;
    Eigen::MatrixXd x(n, dims);
    Eigen::VectorXd g(n), h(n);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> unit(0.1, 1.0);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < dims; ++j) x(i, j) = t % 3 == 0 ? std::round(3.0 * nd(rng)) : nd(rng);
      g(i) = nd(rng);
      h(i) = unit(rng);
    }
    TreeParams tp;
    tp.max_depth = 1;
    tp.min_samples_leaf = 1;
    tp.leaf_ridge = 1.0;
    tp.min_gain = 0.0;
    const TreeFit fit = fit_tree(g, h, FeatureIndex(x), tp);
    const ExhaustiveSplit ref = exhaustive_stump(x, g, h, tp.leaf_ridge);
    const auto& root = fit.tree.nodes().front();
    bool same = root.feature == ref.feature;
    if (same && ref.feature >= 0)
      for (Eigen::Index i = 0; i < n; ++i) same = same && ((x(i, root.feature) <= root.threshold) == ref.left[static_cast<std::size_t>(i)]);
    if (same) ++agreed;
    else out.fail("toy set " + std::to_string(t) + ": split differs from exhaustive search");
  }

  // (iii) psi decreases within every subproblem of a 10-iteration ABPD run
  const Dataset d = drybean_surrogate(9, 600);
  const FeatureIndex index(d.features, 32);
  NpcSpec spec;
  spec.constrained_classes = {1, 3};
  spec.expected_error_rates = Eigen::Vector2d(0.03, 0.02);
  spec.alpha = estimate_alpha(d.labels, d.num_classes(), spec.constrained_classes, spec.expected_error_rates,
                              AlphaPhase::initial);
  spec.shrink_floor = 0.01 / d.num_classes();
  ScoreProblem sp = build_npc_scores(d.labels, d.num_classes(), spec);
  sp.constants = relative_constants_for(BackendKind::gbm, d.features, 0.0);
  GbmParams gp;
  gp.rounds = 5;
  gp.learning_rate = 0.3;
  gp.tree.max_depth = 3;
  gp.tree.threads = threads;
  GbmBackend backend(sp, index, gp);
  AbpdConfig ac;
  ac.l_g = sp.constants.l_g;
  ac.sigma0 = 0.01;
  ac.max_iters = 10;
  ac.track_ergodic = false;
  abpd_run(backend, ac, GbmModel::zero(d.n(), d.num_classes(), gp.learning_rate));
  long steps = 0;
  for (std::size_t k = 0; k < backend.traces().size(); ++k) {
    const auto& psi = backend.traces()[k].psi;
    for (std::size_t r = 1; r < psi.size(); ++r) {
      ++steps;
      if (!(psi[r] <= psi[r - 1])) out.fail("psi increased in subproblem " + std::to_string(k) + " round " + std::to_string(r));
    }
  }
  if (backend.traces().size() != 10) out.fail("expected 10 subproblem solves");
  if (out.ok)
    out.detail << "divergence identity worst " << fmt(worst_div) << " (5 instances, n 50); " << agreed
               << "/20 stumps match; psi monotone over " << steps << " boosting rounds in 10 solves";
}

// ------------------------------------------------------------------ 7

RunConfig npc_reproduction_config(int threads) {
  RunConfig cfg;
  cfg.task = Task::npc;
  cfg.backend = BackendKind::gbm;
  cfg.npc_classes = {1, 2, 3, 4};
  cfg.npc_rates = Eigen::Vector4d(0.01, 0.03, 0.02, 0.02);
  cfg.alpha_policy = AlphaPolicy::heuristic;
  cfg.iterations = 20;
  cfg.gbm_rounds = 5;
  cfg.tau0 = 1.0;
  cfg.sigma0 = 0.01;
  cfg.gbm_depth = 3;
  cfg.gbm_learning_rate = 0.3;
  cfg.gbm_bins = 64;
  cfg.threads = threads;
  return cfg;
}

void npc_reproduction(Outcome& out, int threads) {
  const Dataset d = drybean_surrogate(7, 10000);
  const Split sp = stratified_split(d, 0.8, 7);
  const RunConfig cfg = npc_reproduction_config(threads);
  const NpcOutcome o = train_npc(sp.train, &sp.test, cfg);

  const FeatureIndex index(sp.train.features, cfg.gbm_bins);
  const GbmModel base = train_unconstrained_gbm(sp.train.labels, d.num_classes(), Eigen::VectorXd::Ones(sp.train.n()),
                                                index, gbm_params(cfg), static_cast<int>(o.boosting_rounds));
  const Eigen::MatrixXd bs = base.predict_scores(sp.test.features);
  const double base_acc = accuracy(bs, sp.test.labels);
  const double base_viol = npc_violation(bs, sp.test.labels, cfg.npc_classes, cfg.npc_rates);
  const double drop = base_acc - o.test_accuracy;
  out.ok = o.test_violation < base_viol && drop <= 0.06;
  out.detail << "test violation " << fmt(o.test_violation) << " vs baseline " << fmt(base_viol) << "; accuracy "
             << fmt(o.test_accuracy) << " vs " << fmt(base_acc) << " (drop " << fmt(100.0 * drop) << " pp, limit 6); "
             << o.boosting_rounds << " rounds each";
}

// ------------------------------------------------------------------ 8

void fairness_reproduction(Outcome& out, int threads) {
  const Dataset d = fairness_skew(11, 4000);
  const Split sp = stratified_split(d, 0.8, 11);
  RunConfig cfg;
  cfg.task = Task::fairness;
  cfg.backend = BackendKind::gbm;
  cfg.ilcp_outer = 20;
  cfg.ilcp_inner_iters = 10;
  cfg.ilcp_eps = 1e-2;
  cfg.gbm_rounds = 5;
  cfg.fair_constraint_scale = static_cast<double>(sp.train.n());
  cfg.sigma0 = 1e-3;
  cfg.gbm_depth = 3;
  cfg.gbm_learning_rate = 0.3;
  cfg.gbm_bins = 64;
  cfg.threads = threads;

  // Unconstrained model with the same tree settings and the full boosting budget of the ILCP run.
  const FeatureIndex index(sp.train.features, cfg.gbm_bins);
  const int rounds = static_cast<int>(cfg.ilcp_outer * cfg.ilcp_inner_iters * cfg.gbm_rounds);
  const GbmModel base =
      train_unconstrained_gbm(sp.train.labels, 2, Eigen::VectorXd::Ones(sp.train.n()), index, gbm_params(cfg), rounds);
  const Eigen::VectorXd gl = group_losses(base.scores, sp.train.labels, *sp.train.groups, 2);
  const double base_loss_gap = std::abs(gl(0) - gl(1));
  const double base_test_gap = fairness_gap(base.predict_scores(sp.test.features), sp.test.labels, *sp.test.groups, 2);
  cfg.fair_alpha = 0.5 * base_loss_gap;

  const FairOutcome o = train_fair(sp.train, &sp.test, cfg);
  const double loss_gap = std::abs(o.group_loss_final(0) - o.group_loss_final(1));
  const double f0 = o.records.empty() ? 0.0 : o.records.front().objective;
  const double fT = o.records.empty() ? 0.0 : o.records.back().next_objective;
  out.ok = loss_gap < base_loss_gap && o.test_gap <= base_test_gap;
  out.detail << "train group-loss gap " << fmt(loss_gap) << " vs unconstrained " << fmt(base_loss_gap) << " (alpha "
             << fmt(cfg.fair_alpha) << "); test fairness gap " << fmt(o.test_gap) << " vs " << fmt(base_test_gap)
             << "; objective " << fmt(f0) << " -> " << fmt(fT) << " over " << o.records.size() << " outer steps";
}

// ------------------------------------------------------------------ 9

bool two_sig_equal(double v, double want) {
  const double p = std::pow(10.0, std::floor(std::log10(std::abs(want))) - 1.0);
  return std::round(v / p) == std::round(want / p);
}

void alpha_heuristic(Outcome& out) {
  Eigen::VectorXi binary(1000);
  binary.head(300).setZero();
  binary.tail(700).setOnes();
  const double a0 = estimate_alpha(binary, 2, {0}, Eigen::VectorXd::Constant(1, 0.01), AlphaPhase::initial)(0);
  const double want0 = 300.0 * 0.01 * std::log(2.0);
  if (std::abs(a0 - want0) > 1e-12) out.fail("binary alpha " + fmt(a0) + " != " + fmt(want0));

  Eigen::VectorXi seven(700);
  for (Eigen::Index i = 0; i < 700; ++i) seven(i) = static_cast<int>(i / 100);
  const double a1 = estimate_alpha(seven, 7, {3}, Eigen::VectorXd::Constant(1, 0.02), AlphaPhase::initial)(0);
  const double want1 = 100.0 * 0.02 * std::log(7.0);
  if (std::abs(a1 - want1) > 1e-12) out.fail("7-class alpha " + fmt(a1) + " != " + fmt(want1));

  // outlier with true-class probability 0.01 among 300 class samples at rate 0.01
  const double outlier = -std::log(0.01);
  const double budget = 0.01 * 300.0;
  Eigen::MatrixXd probs(1, 2);
  probs << 0.01, 0.99;
  const double shrunk = -std::log(shrink_predictions(probs, 0.05)(0, 0));
  if (!two_sig_equal(outlier, 4.6)) out.fail("outlier loss " + fmt(outlier));
  if (!two_sig_equal(budget, 3.0) || !(outlier > budget)) out.fail("budget " + fmt(budget));
  if (!two_sig_equal(shrunk, 3.0)) out.fail("floored outlier loss " + fmt(shrunk));
  if (out.ok)
    out.detail << "alpha " << fmt(a0) << " and " << fmt(a1) << " exact; outlier loss " << fmt(outlier)
               << " vs budget " << fmt(budget) << ", floored " << fmt(shrunk);
}

struct Spec {
  const char* name;
  double limit;
};

constexpr Spec kSpecs[kCriteria] = {
    {"parameter recurrences", 5.0},   {"convex rates", 60.0},     {"eps-optimality", 10.0},
    {"ILCP suite", 300.0},            {"gradients", 10.0},        {"GBM identities", 30.0},
    {"NPC reproduction", 600.0},      {"fairness reproduction", 600.0}, {"alpha heuristic", 10.0},
};

}  // namespace

const char* criterion_name(int id) {
  if (id < 1 || id > kCriteria) return "unknown";
  return kSpecs[id - 1].name;
}

CriterionResult run_criterion(int id, const AcceptanceOptions& opts) {
  CriterionResult r;
  r.id = id;
  r.name = criterion_name(id);
  r.limit = id >= 1 && id <= kCriteria ? kSpecs[id - 1].limit : 0.0;
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    switch (id) {
      case 1: parameters(out); break;
      case 2: rates(out); break;
      case 3: eps_optimality(out); break;
      case 4: ilcp_suite(out); break;
      case 5: gradients(out); break;
      case 6: gbm_suite(out, opts.threads); break;
      case 7: npc_reproduction(out, opts.threads); break;
      case 8: fairness_reproduction(out, opts.threads); break;
      case 9: alpha_heuristic(out); break;
      default: out.fail("no such criterion");
    }
  } catch (const std::exception& e) {
    out.fail(std::string("error: ") + e.what());
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.detail = out.detail.str();
  r.passed = out.ok && r.seconds < r.limit;
  if (out.ok && !r.passed) r.detail += "; over the time limit";
  return r;
}

std::string format_result(const CriterionResult& r) {
  char head[160];
  std::snprintf(head, sizeof head, "criterion %d [%s]: %s (", r.id, r.name.c_str(), r.passed ? "PASS" : "FAIL");
  char tail[64];
  std::snprintf(tail, sizeof tail, ") %.2fs / %.0fs", r.seconds, r.limit);
  return head + r.detail + tail;
}

}  // namespace bregcon
