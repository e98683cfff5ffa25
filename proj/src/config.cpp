#include "bregcon/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace bregcon {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  if (v == "inf" || v == "+inf") return std::numeric_limits<double>::infinity();
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError("config: " + key + ": not a number: '" + v + "'");
  return out;
}

long to_long(const std::string& key, const std::string& v) {
  long out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError("config: " + key + ": not an integer: '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: " + key + ": expected true/false, got '" + v + "'");
}

Eigen::VectorXd to_vector(const std::string& key, const std::string& v) {
  const auto items = split_list(v);
  Eigen::VectorXd out(static_cast<Eigen::Index>(items.size()));
  for (std::size_t i = 0; i < items.size(); ++i) out(static_cast<Eigen::Index>(i)) = to_double(key, items[i]);
  return out;
}

template <typename T>
T pick(const std::string& key, const std::string& v, const std::map<std::string, T>& options) {
  const auto it = options.find(v);
  if (it != options.end()) return it->second;
  std::string allowed;
  for (const auto& [name, _] : options) allowed += (allowed.empty() ? "" : ", ") + name;
  throw ConfigError("config: " + key + ": expected one of {" + allowed + "}, got '" + v + "'");
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"version", [](RunConfig& c, const std::string& k, const std::string& v) { c.version = static_cast<int>(to_long(k, v)); }},
      {"task", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.task = pick<Task>(k, v, {{"npc", Task::npc}, {"fairness", Task::fairness}});
       }},
      {"backend", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.backend = pick<BackendKind>(k, v, {{"linear", BackendKind::linear}, {"gbm", BackendKind::gbm}});
       }},
      {"seed", [](RunConfig& c, const std::string& k, const std::string& v) {
         const long s = to_long(k, v);
         if (s < 0) throw ConfigError("config: seed must be nonnegative");
         c.seed = static_cast<std::uint64_t>(s);
       }},
      {"train_fraction", [](RunConfig& c, const std::string& k, const std::string& v) { c.train_fraction = to_double(k, v); }},
      {"label_column", [](RunConfig& c, const std::string&, const std::string& v) { c.label_column = v; }},
      {"sensitive_column", [](RunConfig& c, const std::string&, const std::string& v) { c.sensitive_column = v; }},
      {"categorical_columns", [](RunConfig& c, const std::string&, const std::string& v) { c.categorical_columns = split_list(v); }},
      {"drop_columns", [](RunConfig& c, const std::string&, const std::string& v) { c.drop_columns = split_list(v); }},
      {"npc_classes", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.npc_classes.clear();
         for (const auto& s : split_list(v)) c.npc_classes.push_back(static_cast<int>(to_long(k, s)));
       }},
      {"npc_rates", [](RunConfig& c, const std::string& k, const std::string& v) { c.npc_rates = to_vector(k, v); }},
      {"alpha_policy", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.alpha_policy = pick<AlphaPolicy>(k, v, {{"fixed", AlphaPolicy::fixed}, {"heuristic", AlphaPolicy::heuristic}});
       }},
      {"alpha", [](RunConfig& c, const std::string& k, const std::string& v) { c.alpha = to_vector(k, v); }},
      {"npc_objective", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.balanced_objective = pick<bool>(k, v, {{"balanced", true}, {"uniform", false}});
       }},
      {"shrink_floor", [](RunConfig& c, const std::string& k, const std::string& v) { c.shrink_floor = to_double(k, v); }},
      {"output_iterate", [](RunConfig& c, const std::string& k, const std::string& v) {
         c.output_iterate = pick<OutputIterate>(k, v, {{"last", OutputIterate::last}, {"ergodic", OutputIterate::ergodic}});
       }},
      {"tau0", [](RunConfig& c, const std::string& k, const std::string& v) { c.tau0 = to_double(k, v); }},
      {"sigma0", [](RunConfig& c, const std::string& k, const std::string& v) { c.sigma0 = to_double(k, v); }},
      {"iterations", [](RunConfig& c, const std::string& k, const std::string& v) { c.iterations = to_long(k, v); }},
      {"delta", [](RunConfig& c, const std::string& k, const std::string& v) { c.delta = to_double(k, v); }},
      {"ridge", [](RunConfig& c, const std::string& k, const std::string& v) { c.ridge = to_double(k, v); }},
      {"ilcp_L", [](RunConfig& c, const std::string& k, const std::string& v) { c.ilcp_L = to_double(k, v); }},
      {"ilcp_eps", [](RunConfig& c, const std::string& k, const std::string& v) { c.ilcp_eps = to_double(k, v); }},
      {"ilcp_outer", [](RunConfig& c, const std::string& k, const std::string& v) { c.ilcp_outer = to_long(k, v); }},
      {"ilcp_inner_iters", [](RunConfig& c, const std::string& k, const std::string& v) { c.ilcp_inner_iters = to_long(k, v); }},
      {"fair_alpha", [](RunConfig& c, const std::string& k, const std::string& v) { c.fair_alpha = to_double(k, v); }},
      {"fair_constraint_scale", [](RunConfig& c, const std::string& k, const std::string& v) { c.fair_constraint_scale = to_double(k, v); }},
      {"linear_box_radius", [](RunConfig& c, const std::string& k, const std::string& v) { c.linear_box_radius = to_double(k, v); }},
      {"gbm_depth", [](RunConfig& c, const std::string& k, const std::string& v) { c.gbm_depth = static_cast<int>(to_long(k, v)); }},
      {"gbm_rounds", [](RunConfig& c, const std::string& k, const std::string& v) { c.gbm_rounds = static_cast<int>(to_long(k, v)); }},
      {"gbm_learning_rate", [](RunConfig& c, const std::string& k, const std::string& v) { c.gbm_learning_rate = to_double(k, v); }},
      {"gbm_min_leaf", [](RunConfig& c, const std::string& k, const std::string& v) { c.gbm_min_leaf = static_cast<int>(to_long(k, v)); }},
      {"gbm_leaf_ridge", [](RunConfig& c, const std::string& k, const std::string& v) { c.gbm_leaf_ridge = to_double(k, v); }},
      {"gbm_bins", [](RunConfig& c, const std::string& k, const std::string& v) { c.gbm_bins = static_cast<int>(to_long(k, v)); }},
      {"linear_max_inner", [](RunConfig& c, const std::string& k, const std::string& v) { c.linear_max_inner = static_cast<int>(to_long(k, v)); }},
      {"strict_certificates", [](RunConfig& c, const std::string& k, const std::string& v) { c.strict_certificates = to_bool(k, v); }},
      {"threads", [](RunConfig& c, const std::string& k, const std::string& v) { c.threads = static_cast<int>(to_long(k, v)); }},
  };
  return table;
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
  return s;
}

std::string join(const Eigen::VectorXd& v) {
  std::string s;
  char buf[40];
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", v(i));
    s += (i ? "," : "") + std::string(buf);
  }
  return s;
}

}  // namespace

void RunConfig::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError("config: " + msg);
  };
  require(version == 1, "unsupported version " + std::to_string(version));
  require(train_fraction > 0.0 && train_fraction < 1.0, "train_fraction must lie in (0, 1)");
  require(tau0 > 0.0, "tau0 must be positive");
  require(sigma0 >= 0.0, "sigma0 must be nonnegative");
  require(iterations >= 0, "iterations must be nonnegative");
  require(delta > 0.0 && delta <= 1.0, "delta must lie in (0, 1]");
  require(ridge >= 0.0, "ridge must be nonnegative");
  require(ilcp_L >= 0.0, "ilcp_L must be nonnegative");
  require(ilcp_eps > 0.0, "ilcp_eps must be positive");
  require(ilcp_outer >= 0 && ilcp_inner_iters >= 1, "ilcp_outer >= 0 and ilcp_inner_iters >= 1 required");
  require(fair_constraint_scale > 0.0, "fair_constraint_scale must be positive");
  require(linear_box_radius > 0.0, "linear_box_radius must be positive");
  require(gbm_depth >= 1 && gbm_rounds >= 1 && gbm_min_leaf >= 1, "gbm depth, rounds and min_leaf must be >= 1");
  require(gbm_learning_rate > 0.0, "gbm_learning_rate must be positive");
  require(gbm_leaf_ridge >= 0.0, "gbm_leaf_ridge must be nonnegative");
  require(gbm_bins >= 0 && gbm_bins <= 256, "gbm_bins must lie in [0, 256]");
  require(linear_max_inner >= 1, "linear_max_inner must be >= 1");
  require(threads >= 1, "threads must be >= 1");
  if (task == Task::npc) {
    require(!npc_classes.empty(), "npc task needs npc_classes");
    require(npc_rates.size() == static_cast<Eigen::Index>(npc_classes.size()), "npc_rates needs one rate per class");
    if (alpha_policy == AlphaPolicy::fixed)
      require(alpha.size() == static_cast<Eigen::Index>(npc_classes.size()), "alpha needs one value per class");
    if (alpha.size()) require((alpha.array() > 0.0).all(), "alpha entries must be positive");
    require((npc_rates.array() > 0.0).all() && (npc_rates.array() < 1.0).all(), "npc_rates must lie in (0, 1)");
  } else {
    require(sensitive_column.has_value(), "fairness task needs sensitive_column");
    require(fair_alpha > 0.0, "fairness task needs fair_alpha > 0");
  }
}

RunConfig parse_config(std::istream& in) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    try {
      it->second(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!seen.count("version")) throw ConfigError("config: missing 'version = 1'");
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  return parse_config(in);
}

void write_config(std::ostream& os, const RunConfig& c) {
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  os << "version = " << c.version << '\n';
  os << "task = " << (c.task == Task::npc ? "npc" : "fairness") << '\n';
  os << "backend = " << (c.backend == BackendKind::linear ? "linear" : "gbm") << '\n';
  os << "seed = " << c.seed << '\n';
  os << "train_fraction = " << num(c.train_fraction) << '\n';
  os << "label_column = " << c.label_column << '\n';
  if (c.sensitive_column) os << "sensitive_column = " << *c.sensitive_column << '\n';
  if (!c.categorical_columns.empty()) os << "categorical_columns = " << join(c.categorical_columns) << '\n';
  if (!c.drop_columns.empty()) os << "drop_columns = " << join(c.drop_columns) << '\n';
  if (!c.npc_classes.empty()) {
    std::string s;
    for (int k : c.npc_classes) s += (s.empty() ? "" : ",") + std::to_string(k);
    os << "npc_classes = " << s << '\n';
  }
  if (c.npc_rates.size()) os << "npc_rates = " << join(c.npc_rates) << '\n';
  os << "alpha_policy = " << (c.alpha_policy == AlphaPolicy::fixed ? "fixed" : "heuristic") << '\n';
  if (c.alpha.size()) os << "alpha = " << join(c.alpha) << '\n';
  os << "npc_objective = " << (c.balanced_objective ? "balanced" : "uniform") << '\n';
  os << "shrink_floor = " << num(c.shrink_floor) << '\n';
  os << "output_iterate = " << (c.output_iterate == OutputIterate::last ? "last" : "ergodic") << '\n';
  os << "tau0 = " << num(c.tau0) << "\nsigma0 = " << num(c.sigma0) << "\niterations = " << c.iterations
     << "\ndelta = " << num(c.delta) << "\nridge = " << num(c.ridge) << '\n';
  os << "ilcp_L = " << num(c.ilcp_L) << "\nilcp_eps = " << num(c.ilcp_eps) << "\nilcp_outer = " << c.ilcp_outer
     << "\nilcp_inner_iters = " << c.ilcp_inner_iters << "\nfair_alpha = " << num(c.fair_alpha)
     << "\nfair_constraint_scale = " << num(c.fair_constraint_scale) << "\nlinear_box_radius = " << num(c.linear_box_radius)
     << '\n';
  os << "gbm_depth = " << c.gbm_depth << "\ngbm_rounds = " << c.gbm_rounds << "\ngbm_learning_rate = "
     << num(c.gbm_learning_rate) << "\ngbm_min_leaf = " << c.gbm_min_leaf << "\ngbm_leaf_ridge = " << num(c.gbm_leaf_ridge)
     << "\ngbm_bins = " << c.gbm_bins << '\n';
  os << "linear_max_inner = " << c.linear_max_inner << "\nstrict_certificates = " << (c.strict_certificates ? "true" : "false")
     << "\nthreads = " << c.threads << '\n';
}

}  // namespace bregcon
