// Flat key-value configuration: defaults, canonical emission round trips,
// the FNV hash, structural rejections, and the hypothesis gates that keep
// ill-posed graph combinations out of the drivers.

#include <cmath>
#include <string>

#include "chdbc/config.hpp"
#include "doctest.h"

using namespace chdbc;

namespace {

// frozen FNV-1a hash of the canonical default emission; changing the
// emission format or any default value must show up here
constexpr const char* kDefaultHash = "98638d9e4c124837";

bool parses(const std::string& text) {
  try {
    parse_config(text);
    return true;
  } catch (const ConfigError&) {
    return false;
  }
}

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
    return "";
  } catch (const ConfigError& e) {
    return e.what();
  }
}

}  // namespace

TEST_CASE("empty document yields the documented defaults") {
  ExperimentPlan plan = parse_config("");
  CHECK(plan.kind == ExperimentKind::Run);
  CHECK(plan.base.lambda == 0.1);
  CHECK(plan.base.epsilon == 0.1);
  CHECK(plan.base.tau == 1e-3);
  CHECK(plan.base.t_final == 0.05);
  CHECK(plan.base.grid.nx == 32);
  CHECK(plan.base.grid.ny == 33);
  CHECK(plan.base.alpha == MonotoneGraph::linear(1.0));
  CHECK(plan.base.beta == MonotoneGraph::polynomial(3, 1.0));
  CHECK(plan.base.source.is_zero());
  CHECK_FALSE(plan.base.strong_regime);
  CHECK(plan.init.mean == 0.0);
  CHECK(plan.init.amplitude == 0.1);
  CHECK(plan.halvings == 4);
  CHECK(plan.assumptions.all_hold());
  CHECK_FALSE(plan.assumptions.sample_grid.empty());
  CHECK(config_hash(plan) == kDefaultHash);

  // comments and blank lines are ignored
  ExperimentPlan p2 = parse_config("# comment only\n\n   # another\n");
  CHECK(config_hash(p2) == kDefaultHash);

  // a default-constructed plan validates to the same canonical form
  ExperimentPlan p3;
  validate_plan(p3);
  CHECK(emit_config(p3) == emit_config(plan));
}

TEST_CASE("emission round-trips exactly") {
  std::string text =
      "model.lambda = 0.25\n"
      "model.epsilon = 0.05\n"
      "model.c_dom = 0.8\n"
      "model.alpha = linear 2\n"
      "model.alpha_g = linear 0.5\n"
      "model.beta = log 1.5\n"
      "model.beta_g = log 1\n"
      "model.pi_slope = -1.5\n"
      "model.pi_g_cubic = 0.25\n"
      "model.source = mode 0.75 2 1 1.5\n"
      "model.source_g = constant 0.125\n"
      "model.strong_regime = true\n"
      "grid.nx = 16\n"
      "grid.ny = 17\n"
      "time.tau = 0.0005\n"
      "time.t_final = 0.01\n"
      "init.mean = 0.125\n"
      "init.amplitude = 0.0625\n"
      "init.x_mode = 2\n"
      "init.y_mode = 0\n"
      "experiment.kind = stability\n"
      "experiment.halvings = 3\n"
      "experiment.stability_delta = 0.0005\n"
      "experiment.stability_mode = 2\n"
      "experiment.stability_phase = 0.25\n";
  ExperimentPlan plan = parse_config(text);
  CHECK(plan.kind == ExperimentKind::StabilityPair);
  CHECK(plan.base.beta == MonotoneGraph::logarithmic(1.5));
  CHECK(plan.base.source == SourceSpec::mode(0.75, 2, 1, 1.5));
  CHECK(plan.base.grid == Grid(16, 17));

  std::string emitted = emit_config(plan);
  ExperimentPlan back = parse_config(emitted);
  CHECK(emit_config(back) == emitted);  // canonical fixed point
  CHECK(config_hash(back) == config_hash(plan));

  // whitespace and comments do not change the parsed plan
  ExperimentPlan spaced = parse_config("  model.lambda   =  0.25\n# c\nmodel.strong_regime=true\n"
                                       "model.beta = log 1.5\nmodel.beta_g = log 1\n"
                                       "model.alpha = linear 2\nmodel.alpha_g = linear 0.5\n"
                                       "model.epsilon = 0.05\nmodel.c_dom = 0.8\n"
                                       "model.pi_slope = -1.5\nmodel.pi_g_cubic = 0.25\n"
                                       "model.source = mode 0.75 2 1 1.5\n"
                                       "model.source_g = constant 0.125\n"
                                       "grid.nx = 16\ngrid.ny = 17\n"
                                       "time.tau = 0.0005\ntime.t_final = 0.01\n"
                                       "init.mean = 0.125\ninit.amplitude = 0.0625\n"
                                       "init.x_mode = 2\ninit.y_mode = 0\n"
                                       "experiment.kind = stability\nexperiment.halvings = 3\n"
                                       "experiment.stability_delta = 0.0005\n"
                                       "experiment.stability_mode = 2\n"
                                       "experiment.stability_phase = 0.25\n");
  CHECK(emit_config(spaced) == emitted);
}

TEST_CASE("hash is sensitive to every field") {
  ExperimentPlan base = parse_config("");
  CHECK(config_hash(base).size() == 16);
  for (const char* change : {"model.lambda = 0.2", "model.epsilon = 0.2", "model.beta = linear 1",
                             "grid.nx = 16", "time.tau = 0.002", "init.amplitude = 0.05",
                             "experiment.kind = lambda-sweep", "experiment.halvings = 2"}) {
    ExperimentPlan p = parse_config(change);
    CHECK(config_hash(p) != config_hash(base));
  }
}

TEST_CASE("structural rejections name the offending key") {
  CHECK(error_of("nonsense").find("expected 'key = value'") != std::string::npos);
  CHECK(error_of("model.bogus = 1").find("unknown key 'model.bogus'") != std::string::npos);
  CHECK(error_of("model.lambda = 0.1\nmodel.lambda = 0.2").find("duplicate") !=
        std::string::npos);
  CHECK(error_of("model.lambda = abc").find("expected a number") != std::string::npos);
  CHECK(error_of("grid.nx = 7.5").find("expected an integer") != std::string::npos);
  CHECK(error_of("model.strong_regime = maybe").find("true or false") != std::string::npos);
  CHECK(error_of("model.beta = cubic 3").find("model.beta") != std::string::npos);
  CHECK(error_of("model.source = wave 1 2").find("unknown source kind") != std::string::npos);
  CHECK(error_of("model.source = constant 1 2").find("trailing token") != std::string::npos);
  CHECK(error_of("experiment.kind = diffusion").find("unknown experiment") != std::string::npos);
  CHECK(error_of("grid.nx = 3").find("grid.nx/grid.ny") != std::string::npos);
  CHECK(error_of("model.lambda = ").find("empty key or value") != std::string::npos);
}

TEST_CASE("parameter range guards") {
  CHECK_FALSE(parses("time.tau = 0.1\ntime.t_final = 0.05"));
  CHECK_FALSE(parses("model.lambda = 0"));
  CHECK_FALSE(parses("model.epsilon = -0.1"));
  CHECK_FALSE(parses("experiment.halvings = 0"));
  CHECK_FALSE(parses("experiment.halvings = 9"));
  CHECK_FALSE(parses("experiment.stability_delta = 0"));
  CHECK_FALSE(parses("experiment.stability_mode = 0"));
  CHECK_FALSE(parses("experiment.stability_phase = 1.0"));
  CHECK_FALSE(parses("init.x_mode = -1"));
  // a nonzero-amplitude constant mode would silently shift the datum mean
  CHECK_FALSE(parses("init.x_mode = 0\ninit.y_mode = 0"));
  CHECK(parses("init.x_mode = 0\ninit.y_mode = 0\ninit.amplitude = 0"));
}

TEST_CASE("hypothesis gates: graph combinations") {
  // logarithmic wells confine the initial mean to (-1, 1)
  std::string log_pair = "model.beta = log 1\nmodel.beta_g = log 1\ninit.amplitude = 0\n";
  CHECK(parses(log_pair + "init.mean = 0.5"));
  std::string e = error_of(log_pair + "init.mean = 1.5");
  CHECK(e.find("init.mean") != std::string::npos);
  CHECK(e.find("interior") != std::string::npos);
  CHECK_FALSE(parses(log_pair + "init.mean = 1.0"));  // endpoint is not interior

  // non-coercive bulk viscosity needs the smoothed-source regime
  std::string sign_err = error_of("model.alpha = sign");
  CHECK(sign_err.find("strong_regime") != std::string::npos);
  ExperimentPlan strong = parse_config("model.alpha = sign\nmodel.strong_regime = true");
  CHECK(strong.base.strong_regime);
  CHECK_FALSE(strong.assumptions.coercive_alpha.holds);
  CHECK(strong.assumptions.coercive_alpha_gamma.holds);

  // the boundary rate graph must stay coercive even in the strong regime
  CHECK_FALSE(parses("model.alpha_g = sign\nmodel.strong_regime = true"));

  // domination: a quintic bulk well cannot ride on a linear boundary graph
  CHECK(error_of("model.beta = poly 5 1\nmodel.beta_g = linear 1").find("dominate") !=
        std::string::npos);
  // domain inclusion: bulk log well with a real-line boundary graph
  CHECK_FALSE(parses("model.beta = log 1\nmodel.beta_g = poly 3 1"));
  CHECK(parses("model.beta = poly 5 1\nmodel.beta_g = poly 5 1"));

  // mms runs only on the forced linear configuration
  CHECK_FALSE(parses("experiment.kind = mms"));
  std::string mms_lin =
      "experiment.kind = mms\nmodel.beta = zero\nmodel.beta_g = zero\n";
  CHECK(parses(mms_lin));
  CHECK_FALSE(parses(mms_lin + "model.source = constant 1\n"));
  CHECK_FALSE(parses(mms_lin + "model.pi_slope = -1\n"));
}

TEST_CASE("initial data spec builds exact-mean data") {
  Grid g(32, 33);
  InitialDataSpec spec{0.25, 0.3, 1, 1};
  InteriorField u0 = spec.build(g);
  CHECK(mean(u0) == doctest::Approx(0.25).epsilon(1e-14));
  // nodewise formula
  double x = g.x(3), y = g.y(5);
  double expected = 0.25 + 0.3 * std::cos(2.0 * 3.14159265358979323846 * x) *
                               std::cos(3.14159265358979323846 * y);
  CHECK(u0.at(3, 5) == doctest::Approx(expected).epsilon(1e-14));

  // zero amplitude gives the constant datum regardless of modes
  InitialDataSpec flat{-0.4, 0.0, 0, 0};
  InteriorField uf = flat.build(g);
  for (double v : uf.data()) CHECK(v == -0.4);

  // pure-y modes keep the quadrature mean exact as well
  InitialDataSpec ym{0.1, 0.5, 0, 2};
  CHECK(mean(ym.build(g)) == doctest::Approx(0.1).epsilon(1e-14));

  CHECK(spec == InitialDataSpec{0.25, 0.3, 1, 1});
  CHECK_FALSE(spec == flat);
}

TEST_CASE("experiment kind names round-trip") {
  for (ExperimentKind k :
       {ExperimentKind::Run, ExperimentKind::LambdaSweep, ExperimentKind::EpsilonSweep,
        ExperimentKind::StabilityPair, ExperimentKind::Mms}) {
    std::string text = std::string("experiment.kind = ") + experiment_kind_name(k);
    if (k == ExperimentKind::Mms) text += "\nmodel.beta = zero\nmodel.beta_g = zero";
    ExperimentPlan p = parse_config(text);
    CHECK(p.kind == k);
  }
}
