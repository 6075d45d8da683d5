// ---------------------------------------------------------------------------
// chdbc — command-line driver.
//
// Verbs: run, sweep-lambda, sweep-eps, stability, mms, check-config.
// Exit codes: 0 all asserted invariants passed, 2 invariant violation
// (details in the emitted report), 1 operational error.
// ---------------------------------------------------------------------------

#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "chdbc/experiments.hpp"

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw chdbc::IoError("cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void print_assumptions(const chdbc::GraphAssumptionReport& r) {
  auto flag = [](bool b) { return b ? "holds" : "FAILS"; };
  std::cout << "assumptions:\n";
  std::cout << "  bulk rate coercivity:     " << flag(r.coercive_alpha.holds) << " (a1="
            << r.coercive_alpha.c1 << ", a2=" << r.coercive_alpha.c2 << ")\n";
  std::cout << "  boundary rate coercivity: " << flag(r.coercive_alpha_gamma.holds) << " (b1="
            << r.coercive_alpha_gamma.c1 << ", b2=" << r.coercive_alpha_gamma.c2 << ")\n";
  std::cout << "  linear growth:            " << flag(r.linear_growth.holds)
            << " (L=" << r.linear_growth.constant << ")\n";
  std::cout << "  potential domination:     " << flag(r.domination.holds)
            << " (c=" << r.domination.constant << ")\n";
  std::cout << "  probes: " << r.sample_grid.size() << " points in ["
            << r.sample_grid.front() << ", " << r.sample_grid.back() << "]\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-difference simulator and verification harness for a doubly nonlinear "
               "viscous phase-field system with dynamic boundary conditions"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  int threads = 1;
  unsigned long long seed = 0;

  struct Verb {
    const char* name;
    const char* help;
    chdbc::ExperimentKind kind;
    CLI::App* cmd = nullptr;
  };
  Verb verbs[] = {
      {"run", "single diagnosed trajectory", chdbc::ExperimentKind::Run},
      {"sweep-lambda", "halve the regularization parameter and check convergence",
       chdbc::ExperimentKind::LambdaSweep},
      {"sweep-eps", "halve the boundary diffusion and check the vanishing limit",
       chdbc::ExperimentKind::EpsilonSweep},
      {"stability", "two perturbed trajectories, quadratic scaling and growth fit",
       chdbc::ExperimentKind::StabilityPair},
      {"mms", "manufactured-solution order check (forced linear configuration)",
       chdbc::ExperimentKind::Mms},
  };
  for (auto& v : verbs) {
    v.cmd = app.add_subcommand(v.name, v.help);
    v.cmd->add_option("--config", config_path, "configuration file")->required();
    v.cmd->add_option("--out", out_dir, "output directory (default: out)");
    v.cmd->add_option("--threads", threads, "sweep-member concurrency (default: 1)");
    v.cmd->add_option("--seed", seed,
                      "nonzero: randomize the stability perturbation phase (default: 0)");
  }
  CLI::App* check = app.add_subcommand("check-config",
                                       "parse, validate, and print the canonical form");
  check->add_option("--config", config_path, "configuration file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;  // help/version exit 0, usage errors are operational
  }

  try {
    chdbc::ExperimentPlan plan = chdbc::parse_config(slurp(config_path));

    if (check->parsed()) {
      std::cout << chdbc::emit_config(plan);
      std::cout << "config_hash = " << chdbc::config_hash(plan) << '\n';
      print_assumptions(plan.assumptions);
      return 0;
    }

    for (const auto& v : verbs)
      if (v.cmd->parsed()) plan.kind = v.kind;
    if (seed != 0) {
      std::mt19937_64 rng(seed);
      plan.stability_phase = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    }

    chdbc::ExperimentOutcome outcome = chdbc::run_experiment(plan, threads);
    chdbc::emit_report(outcome, out_dir);

    std::cout << outcome.report.kind << ": " << (outcome.report.pass ? "PASS" : "FAIL") << '\n';
    for (const auto& n : outcome.report.notes) std::cout << "  " << n << '\n';
    std::cout << "report written to " << out_dir << "/summary.json\n";
    return outcome.report.pass ? 0 : 2;
  } catch (const chdbc::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
}
