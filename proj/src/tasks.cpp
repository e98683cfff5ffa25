#include "bregcon/tasks.hpp"

#include "bregcon/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace bregcon {

GbmParams gbm_params(const RunConfig& cfg) {
  GbmParams p;
  p.tree.max_depth = cfg.gbm_depth;
  p.tree.min_samples_leaf = cfg.gbm_min_leaf;
  p.tree.leaf_ridge = cfg.gbm_leaf_ridge;
  p.tree.bins = cfg.gbm_bins;
  p.tree.threads = cfg.threads;
  p.rounds = cfg.gbm_rounds;
  p.learning_rate = cfg.gbm_learning_rate;
  return p;
}

namespace {

AbpdConfig abpd_config(const RunConfig& cfg, const RelativeConstants& constants) {
  AbpdConfig ac;
  ac.tau0 = cfg.tau0;
  ac.mu = constants.mu;
  ac.l_g = constants.l_g;
  ac.delta_param = cfg.delta;
  ac.sigma0 = cfg.sigma0 > 0.0 ? cfg.sigma0 : default_sigma0(cfg.tau0, constants.l_g, cfg.delta);
  ac.max_iters = cfg.iterations;
  ac.strict = cfg.strict_certificates;
  ac.track_ergodic = false;
  return ac;
}

void fill_npc_metrics(NpcOutcome& out, const Dataset& train, const Dataset* test, const RunConfig& cfg) {
  const int J = train.num_classes();
  out.train_accuracy = accuracy(out.train_scores, train.labels);
  out.train_class_error = per_class_error(out.train_scores, train.labels, J);
  out.train_violation = npc_violation(out.train_scores, train.labels, cfg.npc_classes, cfg.npc_rates);
  if (test) {
    out.test_accuracy = accuracy(out.test_scores, test->labels);
    out.test_class_error = per_class_error(out.test_scores, test->labels, J);
    out.test_violation = npc_violation(out.test_scores, test->labels, cfg.npc_classes, cfg.npc_rates);
  }
}

IterateMetrics iterate_metrics(const Eigen::MatrixXd& train_scores, const Eigen::MatrixXd* test_scores,
                               const Dataset& train, const Dataset* test, const RunConfig& cfg) {
  IterateMetrics m;
  m.train_accuracy = accuracy(train_scores, train.labels);
  m.train_violation = npc_violation(train_scores, train.labels, cfg.npc_classes, cfg.npc_rates);
  if (test && test_scores) {
    m.test_accuracy = accuracy(*test_scores, test->labels);
    m.test_violation = npc_violation(*test_scores, test->labels, cfg.npc_classes, cfg.npc_rates);
  }
  return m;
}

}  // namespace

NpcOutcome train_npc(const Dataset& train, const Dataset* test, const RunConfig& cfg) {
  const int J = train.num_classes();
  NpcOutcome out;
  out.shrink_floor = cfg.shrink_floor >= 0.0 ? cfg.shrink_floor : 0.01 / J;
  for (int c : cfg.npc_classes)
    if (c < 0 || c >= J) throw ConfigError("npc: constrained class " + std::to_string(c) + " out of range");

  NpcSpec spec;
  spec.constrained_classes = cfg.npc_classes;
  spec.shrink_floor = out.shrink_floor;
  if (!cfg.balanced_objective) spec.sample_weights = Eigen::VectorXd::Ones(train.n());
  if (cfg.alpha_policy == AlphaPolicy::heuristic) {
    spec.expected_error_rates = cfg.npc_rates;
    out.alpha_initial = estimate_alpha(train.labels, J, cfg.npc_classes, cfg.npc_rates, AlphaPhase::initial);
  } else {
    out.alpha_initial = cfg.alpha;
  }
  spec.alpha = out.alpha_initial;
  ScoreProblem sp = build_npc_scores(train.labels, J, spec);
  out.alpha = spec.alpha;
  const long refit_at = cfg.alpha_policy == AlphaPolicy::heuristic && cfg.iterations >= 2 ? cfg.iterations / 2 : -1;

  auto refit = [&](const Eigen::MatrixXd& scores, Eigen::VectorXd& offsets) {
    out.alpha_refit = estimate_alpha(train.labels, J, cfg.npc_classes, cfg.npc_rates, AlphaPhase::refit, &scores,
                                     out.shrink_floor);
    offsets = out.alpha_refit;
    out.alpha = out.alpha_refit;
  };

  if (cfg.backend == BackendKind::gbm) {
    const FeatureIndex index(train.features, cfg.gbm_bins);
    sp.constants = relative_constants_for(BackendKind::gbm, train.features, 0.0);
    GbmBackend backend(sp, index, gbm_params(cfg));
    const AbpdConfig ac = abpd_config(cfg, sp.constants);
    const GbmModel x0 = GbmModel::zero(train.n(), J, cfg.gbm_learning_rate);
    AbpdMonitor<GbmModel> monitor = [&](AbpdState<GbmModel>& s, const AbpdRecord&) {
      if (s.k + 1 != refit_at) return Control::proceed;
      out.refit_iteration = refit_at;
      refit(s.x_curr.scores, sp.offsets);
      return Control::refresh_constraints;
    };
    auto res = abpd_run(backend, ac, x0, std::nullopt, monitor);
    out.records = std::move(res.records);
    out.uncertified = res.uncertified;
    for (const GbmModel* m : {&res.x_last, &res.xbar}) {
      const Eigen::MatrixXd ts = test ? m->predict_scores(test->features) : Eigen::MatrixXd();
      (m == &res.x_last ? out.last : out.ergodic) = iterate_metrics(m->scores, test ? &ts : nullptr, train, test, cfg);
    }
    GbmModel model = cfg.output_iterate == OutputIterate::last ? std::move(res.x_last) : std::move(res.xbar);
    out.boosting_rounds = static_cast<long>(model.pool->learners.size()) / J;
    out.train_scores = model.scores;
    if (test) out.test_scores = model.predict_scores(test->features);
    out.gbm = std::move(model);
  } else {
    const Standardizer st = Standardizer::fit(train.features);
    const Eigen::MatrixXd design = design_matrix(st.apply(train.features));
    ConstrainedProblem cp = linear_problem(sp, design, cfg.ridge);
    LinearSolverOptions lo;
    lo.max_iters = cfg.linear_max_inner;
    LinearBackend backend(cp, lo);
    const AbpdConfig ac = abpd_config(cfg, cp.constants);
    const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(design.cols() * J);
    AbpdMonitor<Eigen::VectorXd> monitor = [&](AbpdState<Eigen::VectorXd>& s, const AbpdRecord&) {
      if (s.k + 1 != refit_at) return Control::proceed;
      out.refit_iteration = refit_at;
      const Eigen::MatrixXd scores = design * Eigen::Map<const Eigen::MatrixXd>(s.x_curr.data(), design.cols(), J);
      refit(scores, cp.offsets);
      return Control::refresh_constraints;
    };
    auto res = abpd_run(backend, ac, x0, std::nullopt, monitor);
    out.records = std::move(res.records);
    out.uncertified = res.uncertified;
    for (const Eigen::VectorXd* v : {&res.x_last, &res.xbar}) {
      const LinearModel m = LinearModel::from_vector(*v, train.d(), J, cfg.ridge, st);
      const Eigen::MatrixXd ts = test ? m.predict_scores(test->features) : Eigen::MatrixXd();
      (v == &res.x_last ? out.last : out.ergodic) =
          iterate_metrics(m.predict_scores(train.features), test ? &ts : nullptr, train, test, cfg);
    }
    const Eigen::VectorXd& x = cfg.output_iterate == OutputIterate::last ? res.x_last : res.xbar;
    LinearModel model = LinearModel::from_vector(x, train.d(), J, cfg.ridge, st);
    out.train_scores = model.predict_scores(train.features);
    if (test) out.test_scores = model.predict_scores(test->features);
    out.linear = std::move(model);
  }
  fill_npc_metrics(out, train, test, cfg);
  return out;
}

namespace {

template <typename Point>
void copy_ilcp(FairOutcome& out, const IlcpResult<Point>& res, double scale) {
  out.records = res.records;
  out.residual = res.residual;
  out.slack = res.slack;
  out.fj_stop = res.fj_stop;
  out.uncertified = res.uncertified;
  out.eps34 = res.eps34;
  // phi_bar = scale * (max pairwise gap - alpha)
  for (const auto& r : res.records) out.group_gap_trace.push_back(r.max_violation / scale + out.alpha);
  if (!res.records.empty()) out.group_gap_trace.push_back(res.records.back().next_violation / scale + out.alpha);
}

}  // namespace

FairOutcome train_fair(const Dataset& train, const Dataset* test, const RunConfig& cfg) {
  if (!train.groups) throw DataError("fairness: dataset has no sensitive column");
  const int J = train.num_classes(), G = train.num_groups();
  FairOutcome out;
  out.alpha = cfg.fair_alpha;
  const FairnessSpec spec = FairnessSpec::uniform(*train.groups, G, cfg.fair_alpha, cfg.fair_constraint_scale);
  const ScoreDcProblem sdc = build_fairness_scores(train.labels, J, spec);

  IlcpConfig ic;
  ic.eps = cfg.ilcp_eps;
  ic.max_outer = cfg.ilcp_outer;
  ic.max_inner = cfg.ilcp_inner_iters;
  ic.check_every = 1;
  ic.strict = cfg.strict_certificates;

  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(train.n(), J);
  out.group_loss_initial = group_losses(zero, train.labels, *train.groups, G);

  if (cfg.backend == BackendKind::gbm) {
    const double rho = sdc.rho();
    ic.L = cfg.ilcp_L > 0.0 ? cfg.ilcp_L : 2.0 * std::max(rho, 1.0);
    ic.tau0 = std::min(cfg.tau0, 2.0 / (ic.L - rho));
    ic.sigma0 = cfg.sigma0;
    const FeatureIndex index(train.features, cfg.gbm_bins);
    ScoreDcModel model(sdc, index, gbm_params(cfg));
    const GbmModel x0 = GbmModel::zero(train.n(), J, cfg.gbm_learning_rate);
    auto res = ilcp_run(model, ic, x0);
    copy_ilcp(out, res, cfg.fair_constraint_scale);
    out.boosting_rounds = static_cast<long>(res.x.pool->learners.size()) / J;
    out.train_scores = res.x.scores;
    if (test) out.test_scores = res.x.predict_scores(test->features);
    out.gbm = res.x;
  } else {
    const Standardizer st = Standardizer::fit(train.features);
    const Eigen::MatrixXd design = design_matrix(st.apply(train.features));
    const Eigen::Index dim = design.cols() * J;
    const DcProblem dcp =
        linear_dc_problem(sdc, design, cfg.ridge, BoxD::uniform(dim, -cfg.linear_box_radius, cfg.linear_box_radius));
    const double rho = dcp.rho();
    ic.L = cfg.ilcp_L > 0.0 ? cfg.ilcp_L : 2.0 * std::max(rho, 1.0);
    ic.tau0 = std::min(cfg.tau0, 2.0 / (ic.L - rho));
    ic.sigma0 = cfg.sigma0;
    LinearSolverOptions lo;
    lo.max_iters = cfg.linear_max_inner;
    VectorDcModel model(dcp, lo);
    auto res = ilcp_run(model, ic, Eigen::VectorXd::Zero(dim).eval());
    copy_ilcp(out, res, cfg.fair_constraint_scale);
    LinearModel lm = LinearModel::from_vector(res.x, train.d(), J, cfg.ridge, st);
    out.train_scores = lm.predict_scores(train.features);
    if (test) out.test_scores = lm.predict_scores(test->features);
    out.linear = std::move(lm);
  }
  out.L = ic.L;
  out.group_loss_final = group_losses(out.train_scores, train.labels, *train.groups, G);
  out.train_accuracy = accuracy(out.train_scores, train.labels);
  out.train_gap = fairness_gap(out.train_scores, train.labels, *train.groups, G);
  if (test) {
    if (!test->groups) throw DataError("fairness: test split has no groups");
    out.test_accuracy = accuracy(out.test_scores, test->labels);
    out.test_gap = fairness_gap(out.test_scores, test->labels, *test->groups, G);
  }
  return out;
}

}  // namespace bregcon
