#include "chdbc/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <vector>

#include "detail_format.hpp"

namespace chdbc {

InteriorField InitialDataSpec::build(const Grid& g) const {
  constexpr double pi = 3.14159265358979323846;
  InteriorField f(g);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      f.at(i, j) =
          mean + amplitude * std::cos(2.0 * pi * x_mode * g.x(i)) * std::cos(pi * y_mode * g.y(j));
  return f;
}

const char* experiment_kind_name(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Run: return "run";
    case ExperimentKind::LambdaSweep: return "lambda-sweep";
    case ExperimentKind::EpsilonSweep: return "eps-sweep";
    case ExperimentKind::StabilityPair: return "stability";
    case ExperimentKind::Mms: return "mms";
  }
  return "?";
}

namespace {

ExperimentKind parse_kind(const std::string& s) {
  for (ExperimentKind k : {ExperimentKind::Run, ExperimentKind::LambdaSweep,
                           ExperimentKind::EpsilonSweep, ExperimentKind::StabilityPair,
                           ExperimentKind::Mms})
    if (s == experiment_kind_name(k)) return k;
  throw ConfigError("experiment.kind: unknown experiment '" + s +
                    "' (expected run, lambda-sweep, eps-sweep, stability, or mms)");
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double to_double(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return x;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

int to_int(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    int x = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return x;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
}

bool to_bool(const std::string& v, const std::string& key) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

MonotoneGraph to_graph(const std::string& v, const std::string& key) {
  try {
    return MonotoneGraph::parse(v);
  } catch (const ConfigError& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

SourceSpec parse_source(const std::string& v, const std::string& key) {
  std::istringstream in(v);
  std::string kind;
  in >> kind;
  auto need = [&](double& slot, const char* what) {
    if (!(in >> slot)) throw ConfigError(key + ": missing " + what + " in '" + v + "'");
  };
  SourceSpec s;
  if (kind == "zero") {
    s = SourceSpec::zero();
  } else if (kind == "constant") {
    double val;
    need(val, "value");
    s = SourceSpec::constant(val);
  } else if (kind == "mode") {
    double a, kx, ky, rate;
    need(a, "amplitude");
    need(kx, "x mode");
    need(ky, "y mode");
    need(rate, "decay rate");
    s = SourceSpec::mode(a, static_cast<int>(kx), static_cast<int>(ky), rate);
  } else {
    throw ConfigError(key + ": unknown source kind '" + kind +
                      "' (expected zero, constant, or mode)");
  }
  std::string rest;
  if (in >> rest) throw ConfigError(key + ": trailing token '" + rest + "'");
  return s;
}

std::string source_to_string(const SourceSpec& s) {
  switch (s.kind) {
    case SourceSpec::Kind::Zero:
      return "zero";
    case SourceSpec::Kind::Constant:
      return "constant " + detail::g17(s.value);
    case SourceSpec::Kind::SeparableMode:
      return "mode " + detail::g17(s.amplitude) + " " + std::to_string(s.x_mode) + " " +
             std::to_string(s.y_mode) + " " + detail::g17(s.decay_rate);
  }
  return "?";
}

std::vector<double> assumption_probes(const ExperimentPlan& plan) {
  double lo = -2.0, hi = 2.0;
  for (const MonotoneGraph* g :
       {&plan.base.alpha, &plan.base.alpha_g, &plan.base.beta, &plan.base.beta_g}) {
    lo = std::max(lo, std::isinf(g->domain_lo()) ? -2.0 : g->domain_lo());
    hi = std::min(hi, std::isinf(g->domain_hi()) ? 2.0 : g->domain_hi());
  }
  double margin = 0.05 * (hi - lo);
  lo += margin;
  hi -= margin;
  std::vector<double> probes;
  for (int k = 0; k <= 16; ++k) probes.push_back(lo + (hi - lo) * k / 16.0);
  return probes;
}

}  // namespace

void validate_plan(ExperimentPlan& plan) {
  ProblemConfig& cfg = plan.base;
  cfg.validate();
  if (cfg.tau > cfg.t_final) throw ConfigError("time.tau: must not exceed time.t_final");
  if (plan.halvings < 1 || plan.halvings > 8)
    throw ConfigError("experiment.halvings: must be between 1 and 8");
  if (!(plan.stability_delta > 0.0))
    throw ConfigError("experiment.stability_delta: must be > 0");
  if (plan.stability_mode < 1)
    throw ConfigError("experiment.stability_mode: must be >= 1 (mean-free perturbation)");
  if (!(plan.stability_phase >= 0.0 && plan.stability_phase < 1.0))
    throw ConfigError("experiment.stability_phase: must lie in [0, 1)");
  if (plan.init.x_mode < 0 || plan.init.y_mode < 0)
    throw ConfigError("init.x_mode/init.y_mode: must be >= 0");
  if (plan.init.amplitude != 0.0 && plan.init.x_mode == 0 && plan.init.y_mode == 0)
    throw ConfigError("init.x_mode: a nonzero-amplitude mode needs x_mode + y_mode >= 1 "
                      "so the datum mean stays init.mean");

  plan.assumptions = check_assumptions(cfg.alpha, cfg.alpha_g, cfg.beta, cfg.beta_g,
                                       assumption_probes(plan));
  if (!plan.assumptions.coercive_alpha_gamma.holds)
    throw ConfigError("model.alpha_g: boundary rate graph must be coercive "
                      "(s*h(s) >= b1*s^2 - b2 fails for this kind)");
  if (!plan.assumptions.domination.holds)
    throw ConfigError("model.beta_g: the boundary potential graph must dominate the bulk "
                      "one (domain inclusion or growth comparison failed)");
  if (!plan.assumptions.coercive_alpha.holds && !cfg.strong_regime)
    throw ConfigError("model.alpha: bulk rate graph is not coercive; set "
                      "model.strong_regime = true to run the smoothed-source regime");

  const MonotoneGraph& bg = cfg.beta_g;
  if (!(plan.init.mean > bg.domain_lo() && plan.init.mean < bg.domain_hi()))
    throw ConfigError("init.mean: " + detail::g17(plan.init.mean) +
                      " lies outside the interior of the boundary potential domain (" +
                      detail::g17(bg.domain_lo()) + ", " + detail::g17(bg.domain_hi()) + ")");

  if (plan.kind == ExperimentKind::Mms) {
    bool ok = cfg.alpha.kind() == GraphKind::Linear && cfg.alpha_g.kind() == GraphKind::Linear &&
              cfg.beta.kind() == GraphKind::Zero && cfg.beta_g.kind() == GraphKind::Zero &&
              cfg.pi.is_zero() && cfg.pi_g.is_zero() && cfg.source.is_zero() &&
              cfg.source_g.is_zero() && !cfg.strong_regime;
    if (!ok)
      throw ConfigError("experiment.kind: mms requires linear rate graphs, zero potential "
                        "graphs, zero perturbations, and zero sources (the driver supplies "
                        "the manufactured forcing)");
  }
}

ExperimentPlan parse_config(const std::string& text) {
  ExperimentPlan plan;
  ProblemConfig& cfg = plan.base;
  int nx = cfg.grid.nx, ny = cfg.grid.ny;
  std::set<std::string> seen;

  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value', got '" +
                        line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("line " + std::to_string(line_no) + ": empty key or value");
    if (!seen.insert(key).second)
      throw ConfigError(key + ": duplicate key (line " + std::to_string(line_no) + ")");

    if (key == "model.lambda") cfg.lambda = to_double(value, key);
    else if (key == "model.epsilon") cfg.epsilon = to_double(value, key);
    else if (key == "model.c_dom") cfg.c_dom = to_double(value, key);
    else if (key == "model.alpha") cfg.alpha = to_graph(value, key);
    else if (key == "model.alpha_g") cfg.alpha_g = to_graph(value, key);
    else if (key == "model.beta") cfg.beta = to_graph(value, key);
    else if (key == "model.beta_g") cfg.beta_g = to_graph(value, key);
    else if (key == "model.pi_slope") cfg.pi.slope = to_double(value, key);
    else if (key == "model.pi_cubic") cfg.pi.cubic = to_double(value, key);
    else if (key == "model.pi_g_slope") cfg.pi_g.slope = to_double(value, key);
    else if (key == "model.pi_g_cubic") cfg.pi_g.cubic = to_double(value, key);
    else if (key == "model.source") cfg.source = parse_source(value, key);
    else if (key == "model.source_g") cfg.source_g = parse_source(value, key);
    else if (key == "model.strong_regime") cfg.strong_regime = to_bool(value, key);
    else if (key == "grid.nx") nx = to_int(value, key);
    else if (key == "grid.ny") ny = to_int(value, key);
    else if (key == "time.tau") cfg.tau = to_double(value, key);
    else if (key == "time.t_final") cfg.t_final = to_double(value, key);
    else if (key == "init.mean") plan.init.mean = to_double(value, key);
    else if (key == "init.amplitude") plan.init.amplitude = to_double(value, key);
    else if (key == "init.x_mode") plan.init.x_mode = to_int(value, key);
    else if (key == "init.y_mode") plan.init.y_mode = to_int(value, key);
    else if (key == "experiment.kind") plan.kind = parse_kind(value);
    else if (key == "experiment.halvings") plan.halvings = to_int(value, key);
    else if (key == "experiment.stability_delta") plan.stability_delta = to_double(value, key);
    else if (key == "experiment.stability_mode") plan.stability_mode = to_int(value, key);
    else if (key == "experiment.stability_phase") plan.stability_phase = to_double(value, key);
    else throw ConfigError("unknown key '" + key + "' (line " + std::to_string(line_no) + ")");
  }

  try {
    cfg.grid = Grid(nx, ny);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("grid.nx/grid.ny: ") + e.what());
  }
  validate_plan(plan);
  return plan;
}

std::string emit_config(const ExperimentPlan& plan) {
  const ProblemConfig& cfg = plan.base;
  std::ostringstream out;
  out << "model.lambda = " << detail::g17(cfg.lambda) << '\n';
  out << "model.epsilon = " << detail::g17(cfg.epsilon) << '\n';
  out << "model.c_dom = " << detail::g17(cfg.c_dom) << '\n';
  out << "model.alpha = " << cfg.alpha.to_string() << '\n';
  out << "model.alpha_g = " << cfg.alpha_g.to_string() << '\n';
  out << "model.beta = " << cfg.beta.to_string() << '\n';
  out << "model.beta_g = " << cfg.beta_g.to_string() << '\n';
  out << "model.pi_slope = " << detail::g17(cfg.pi.slope) << '\n';
  out << "model.pi_cubic = " << detail::g17(cfg.pi.cubic) << '\n';
  out << "model.pi_g_slope = " << detail::g17(cfg.pi_g.slope) << '\n';
  out << "model.pi_g_cubic = " << detail::g17(cfg.pi_g.cubic) << '\n';
  out << "model.source = " << source_to_string(cfg.source) << '\n';
  out << "model.source_g = " << source_to_string(cfg.source_g) << '\n';
  out << "model.strong_regime = " << (cfg.strong_regime ? "true" : "false") << '\n';
  out << "grid.nx = " << cfg.grid.nx << '\n';
  out << "grid.ny = " << cfg.grid.ny << '\n';
  out << "time.tau = " << detail::g17(cfg.tau) << '\n';
  out << "time.t_final = " << detail::g17(cfg.t_final) << '\n';
  out << "init.mean = " << detail::g17(plan.init.mean) << '\n';
  out << "init.amplitude = " << detail::g17(plan.init.amplitude) << '\n';
  out << "init.x_mode = " << plan.init.x_mode << '\n';
  out << "init.y_mode = " << plan.init.y_mode << '\n';
  out << "experiment.kind = " << experiment_kind_name(plan.kind) << '\n';
  out << "experiment.halvings = " << plan.halvings << '\n';
  out << "experiment.stability_delta = " << detail::g17(plan.stability_delta) << '\n';
  out << "experiment.stability_mode = " << plan.stability_mode << '\n';
  out << "experiment.stability_phase = " << detail::g17(plan.stability_phase) << '\n';
  return out.str();
}

std::string config_hash(const ExperimentPlan& plan) {
  std::string text = emit_config(plan);
  unsigned long long h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", h);
  return buf;
}

}  // namespace chdbc
