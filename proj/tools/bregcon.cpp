#include "bregcon/acceptance.hpp"
#include "bregcon/config.hpp"
#include "bregcon/data.hpp"
#include "bregcon/log.hpp"
#include "bregcon/metrics.hpp"
#include "bregcon/synthetic.hpp"
#include "bregcon/tasks.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace bregcon;

namespace {

// Exit code for an infeasible ILCP starting point (distinct from generic solver failures).
constexpr int exit_infeasible_start = 5;

struct TrainArgs {
  std::string config, data, out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> backend;
  bool strict = false;
};

std::vector<double> vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

RunConfig resolve_config(const TrainArgs& a, Task expected) {
  RunConfig cfg = load_config(a.config);
  if (cfg.task != expected) throw ConfigError("config: task does not match the subcommand");
  if (a.seed) cfg.seed = *a.seed;
  if (a.backend) cfg.backend = *a.backend == "linear" ? BackendKind::linear : BackendKind::gbm;
  if (a.strict) cfg.strict_certificates = true;
  if (const char* t = std::getenv("BREGCON_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(t, &end, 10);
    if (end == t || *end != '\0' || n < 1) throw ConfigError("BREGCON_THREADS must be a positive integer");
    cfg.threads = static_cast<int>(n);
  }
  cfg.validate();
  return cfg;
}

Dataset load_dataset(const std::string& path, const RunConfig& cfg) {
  if (path.size() > 4 && path.ends_with(".bin")) return load_cache(path);
  CsvSchema schema;
  schema.label = cfg.label_column;
  schema.sensitive = cfg.sensitive_column;
  schema.categorical = cfg.categorical_columns;
  schema.drop = cfg.drop_columns;
  return load_csv(path, schema);
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw DataError("cannot write '" + p.string() + "'");
  return os;
}

void write_json(const fs::path& p, const json& j) {
  auto os = open_out(p);
  os << j.dump(2) << '\n';
}

json dataset_json(const Split& sp) {
  return {{"train_rows", sp.train.n()},
          {"test_rows", sp.test.n()},
          {"features", sp.train.d()},
          {"classes", sp.train.class_names}};
}

json iterate_json(const IterateMetrics& m) {
  return {{"train_accuracy", m.train_accuracy},
          {"test_accuracy", m.test_accuracy},
          {"train_violation", m.train_violation},
          {"test_violation", m.test_violation}};
}

int train_npc_cmd(const TrainArgs& a) {
  const RunConfig cfg = resolve_config(a, Task::npc);
  const Dataset data = load_dataset(a.data, cfg);
  const Split sp = stratified_split(data, cfg.train_fraction, cfg.seed);
  const fs::path out = a.out;
  fs::create_directories(out);

  const NpcOutcome o = train_npc(sp.train, &sp.test, cfg);

  std::ostringstream log;
  log << "alpha initial:";
  for (double v : vec(o.alpha_initial)) log << ' ' << v;
  log << '\n';
  if (o.refit_iteration >= 0) {
    log << "alpha refit at iteration " << o.refit_iteration << ':';
    for (double v : vec(o.alpha_refit)) log << ' ' << v;
    log << '\n';
  }
  if (o.uncertified > 0) log << o.uncertified << " of " << o.records.size() << " subproblems uncertified\n";
  std::cout << log.str();
  open_out(out / "run.log") << log.str();

  {
    auto os = open_out(out / "iterations.csv");
    write_diagnostics_csv(os, o.records);
  }
  {
    auto os = open_out(out / "model.txt");
    if (o.gbm) o.gbm->save(os, sp.train.feature_names);
    else o.linear->save(os);
  }
  {
    auto os = open_out(out / "config_used.txt");
    write_config(os, cfg);
  }

  json budgets = json::array();
  for (std::size_t k = 0; k < cfg.npc_classes.size(); ++k) {
    const int c = cfg.npc_classes[k];
    budgets.push_back({{"class", c},
                       {"class_name", sp.train.class_names[static_cast<std::size_t>(c)]},
                       {"rate", cfg.npc_rates(static_cast<Eigen::Index>(k))},
                       {"alpha_initial", o.alpha_initial(static_cast<Eigen::Index>(k))},
                       {"alpha_final", o.alpha(static_cast<Eigen::Index>(k))},
                       {"train_error", o.train_class_error(c)},
                       {"test_error", o.test_class_error(c)}});
  }
  json s = {{"task", "npc"},
            {"backend", cfg.backend == BackendKind::gbm ? "gbm" : "linear"},
            {"seed", cfg.seed},
            {"data", dataset_json(sp)},
            {"iterations", o.records.size()},
            {"uncertified_subproblems", o.uncertified},
            {"shrink_floor", o.shrink_floor},
            {"alpha_refit_iteration", o.refit_iteration},
            {"budgets", budgets},
            {"output_iterate", cfg.output_iterate == OutputIterate::last ? "last" : "ergodic"},
            {"train_accuracy", o.train_accuracy},
            {"test_accuracy", o.test_accuracy},
            {"train_violation", o.train_violation},
            {"test_violation", o.test_violation},
            {"train_class_error", vec(o.train_class_error)},
            {"test_class_error", vec(o.test_class_error)},
            {"last_iterate", iterate_json(o.last)},
            {"ergodic_iterate", iterate_json(o.ergodic)}};
  if (o.gbm) s["boosting_rounds"] = o.boosting_rounds;
  write_json(out / "summary.json", s);
  std::printf("test accuracy %.4f, test npc violation %.4f (summary in %s)\n", o.test_accuracy, o.test_violation,
              (out / "summary.json").string().c_str());
  return exit_ok;
}

int train_fair_cmd(const TrainArgs& a) {
  const RunConfig cfg = resolve_config(a, Task::fairness);
  const Dataset data = load_dataset(a.data, cfg);
  if (!data.groups) throw DataError("fairness: dataset has no sensitive column");
  const Split sp = stratified_split(data, cfg.train_fraction, cfg.seed);
  const fs::path out = a.out;
  fs::create_directories(out);

  const FairOutcome o = train_fair(sp.train, &sp.test, cfg);
  const int G = sp.train.num_groups();

  {
    auto os = open_out(out / "iterations.csv");
    write_ilcp_csv(os, o.records);
  }
  {
    // iteration vs training loss and vs group-loss difference
    auto os = open_out(out / "trace.csv");
    os << "t,training_loss,group_loss_gap\n";
    char buf[128];
    for (std::size_t t = 0; t < o.group_gap_trace.size(); ++t) {
      const double f = t < o.records.size() ? o.records[t].objective : o.records.back().next_objective;
      std::snprintf(buf, sizeof buf, "%zu,%.10g,%.10g\n", t, f / static_cast<double>(sp.train.n()),
                    o.group_gap_trace[t]);
      os << buf;
    }
  }
  {
    auto os = open_out(out / "model.txt");
    if (o.gbm) o.gbm->save(os, sp.train.feature_names);
    else o.linear->save(os);
  }
  {
    auto os = open_out(out / "config_used.txt");
    write_config(os, cfg);
  }

  const Eigen::VectorXd& xi = o.group_loss_final;
  double gap = 0.0;
  for (int j = 0; j < G; ++j)
    for (int l = 0; l < G; ++l) gap = std::max(gap, std::abs(xi(j) - xi(l)));
  json s = {{"task", "fairness"},
            {"backend", cfg.backend == BackendKind::gbm ? "gbm" : "linear"},
            {"seed", cfg.seed},
            {"data", dataset_json(sp)},
            {"groups", sp.train.group_names},
            {"alpha", cfg.fair_alpha},
            {"L", o.L},
            {"eps", cfg.ilcp_eps},
            {"eps34", o.eps34},
            {"outer_iterations", o.records.size()},
            {"fj_stop", o.fj_stop},
            {"uncertified_subproblems", o.uncertified},
            {"fj_residual",
             {{"y0", o.residual.y0},
              {"y", vec(o.residual.y)},
              {"stationarity", o.residual.stationarity},
              {"complementarity", vec(o.residual.complementarity)},
              {"feasibility", o.residual.feasibility},
              {"slack", o.slack}}},
            {"group_loss_initial", vec(o.group_loss_initial)},
            {"group_loss", vec(xi)},
            {"group_loss_gap", gap},
            {"train_accuracy", o.train_accuracy},
            {"test_accuracy", o.test_accuracy},
            {"train_fairness_gap", o.train_gap},
            {"test_fairness_gap", o.test_gap},
            {"test_group_error", vec(group_error_rates(o.test_scores, sp.test.labels, *sp.test.groups, G))}};
  if (o.gbm) s["boosting_rounds"] = o.boosting_rounds;
  write_json(out / "summary.json", s);
  std::printf("test accuracy %.4f, test fairness gap %.4f, group-loss gap %.4g (alpha %.4g)\n", o.test_accuracy,
              o.test_gap, gap, cfg.fair_alpha);
  return exit_ok;
}

const std::map<std::string, std::vector<int>>& suites() {
  static const std::map<std::string, std::vector<int>> m = {
      {"params", {1}},   {"rates", {2}}, {"eps", {3}},      {"ilcp", {4}},  {"gradients", {5}},
      {"gbm", {6}},      {"npc", {7}},   {"fairness", {8}}, {"alpha", {9}},
      {"all", {1, 2, 3, 4, 5, 6, 7, 8, 9}}};
  return m;
}

int verify_cmd(const std::string& suite, const std::string& out) {
  AcceptanceOptions opts;
  if (const char* t = std::getenv("BREGCON_THREADS")) opts.threads = std::max(1, std::atoi(t));
  json results = json::array();
  bool ok = true;
  for (int id : suites().at(suite)) {
    const CriterionResult r = run_criterion(id, opts);
    std::cout << format_result(r) << std::endl;
    ok = ok && r.passed;
    results.push_back({{"id", r.id},
                       {"name", r.name},
                       {"passed", r.passed},
                       {"detail", r.detail},
                       {"seconds", r.seconds},
                       {"limit_seconds", r.limit}});
  }
  write_json(out, {{"suite", suite}, {"passed", ok}, {"criteria", results}});
  return ok ? exit_ok : exit_verify;
}

int make_data_cmd(const std::string& kind, std::uint64_t seed, int rows, const std::string& out) {
  const Dataset d = kind == "drybean" ? drybean_surrogate(seed, rows) : fairness_skew(seed, rows);
  if (out.ends_with(".bin")) save_cache(d, out);
  else write_csv(d, out);
  std::printf("%ld rows, %ld features, %d classes -> %s\n", static_cast<long>(d.n()), static_cast<long>(d.d()),
              d.num_classes(), out.c_str());
  return exit_ok;
}

void add_train_options(CLI::App* cmd, TrainArgs& a) {
  cmd->add_option("--config", a.config, "run configuration file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--data", a.data, "CSV dataset, or a .bin cache")->required();
  cmd->add_option("--out", a.out, "output directory")->required();
  cmd->add_option("--seed", a.seed, "overrides the config seed");
  cmd->add_option("--backend", a.backend, "overrides the config backend")->check(CLI::IsMember({"linear", "gbm"}));
  cmd->add_flag("--strict-certificates", a.strict, "abort when a subproblem is not certified");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bregman primal-dual and proximal-point training for constrained classifiers"};
  app.require_subcommand(1);

  TrainArgs npc_args, fair_args;
  auto* npc = app.add_subcommand("train-npc", "Neyman-Pearson classification with ABPD");
  add_train_options(npc, npc_args);
  auto* fair = app.add_subcommand("train-fair", "group-fair classification with ILCP");
  add_train_options(fair, fair_args);

  std::string suite = "all", verify_out = "verify_results.json";
  auto* verify = app.add_subcommand("verify", "run acceptance suites");
  std::vector<std::string> names;
  for (const auto& [name, _] : suites()) names.push_back(name);
  verify->add_option("suite", suite, "params|rates|eps|ilcp|gradients|gbm|npc|fairness|alpha|all")
      ->check(CLI::IsMember(names));
  verify->add_option("--out", verify_out, "JSON result file");

  std::string kind, data_out;
  std::uint64_t data_seed = 0;
  int rows = 0;
  auto* make = app.add_subcommand("make-data", "write a bundled synthetic dataset");
  make->add_option("kind", kind, "drybean|fairness")->required()->check(CLI::IsMember({"drybean", "fairness"}));
  make->add_option("--out", data_out, "CSV path, or .bin for the binary cache")->required();
  make->add_option("--seed", data_seed, "generator seed");
  make->add_option("--rows", rows, "sample count (default 10000 / 4000)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? exit_ok : exit_config;
  }

  try {
    if (*npc) return train_npc_cmd(npc_args);
    if (*fair) return train_fair_cmd(fair_args);
    if (*verify) return verify_cmd(suite, verify_out);
    if (*make) return make_data_cmd(kind, data_seed, rows > 0 ? rows : (kind == "drybean" ? 10000 : 4000), data_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return exit_data;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return exit_data;
  } catch (const InfeasibleStart& e) {
    std::cerr << "infeasible start: " << e.what() << '\n';
    return exit_infeasible_start;
  } catch (const std::exception& e) {
    std::cerr << "solver error: " << e.what() << '\n';
    return exit_solver;
  }
  return exit_ok;
}
