#pragma once
// ---------------------------------------------------------------------------
// Experiment drivers: single diagnosed run, regularization (lambda) sweep,
// boundary-diffusion (epsilon) sweep, two-trajectory stability study, and the
// manufactured-solution order check.  Sweep members may run concurrently;
// results and emitted files are independent of the thread count.
// ---------------------------------------------------------------------------

#include <optional>
#include <string>
#include <vector>

#include "chdbc/config.hpp"
#include "chdbc/diagnostics.hpp"

namespace chdbc {

struct RunArtifact {
  std::string name;
  ProblemConfig cfg;
  std::vector<DiagnosticsRecord> records;  // step 0 first
  State final_state;
  EstimateSuite estimates;
  double max_abs_mass_residual = 0.0;
  double max_energy_residual = 0.0;  // most positive ledger slack over steps >= 1
  int steps = 0;
};

struct SweepReport {
  std::string kind;
  std::vector<double> values;            // swept parameter (lambda, eps, or tau)
  std::vector<double> successive_diffs;  // max_t |u_k - u_{k+1}|_H between neighbours
  // max-over-runs / first-run value, per estimate-suite quantity (sweeps only).
  std::vector<std::pair<std::string, double>> suite_ratios;
  std::optional<double> fitted_order;   // least-squares order from successive_diffs
  std::optional<double> fit_residual;
  std::optional<double> temporal_order;  // mms
  std::optional<double> spatial_order;   // mms
  std::vector<double> spatial_values;    // mms: grid nx list
  std::vector<double> spatial_errors;    // mms: |u_h(T) - exact(T)|_H
  std::optional<double> stability_ratio;      // grad_diff(delta) / grad_diff(delta/2)
  std::optional<StabilityFit> gronwall;
  bool pass = false;
  std::vector<std::string> notes;
};

struct ExperimentOutcome {
  ExperimentPlan plan;
  SweepReport report;
  std::vector<RunArtifact> artifacts;
  std::vector<StabilityRecord> stability_delta;       // base vs +delta
  std::vector<StabilityRecord> stability_half_delta;  // base vs +delta/2
};

// One trajectory with per-step diagnostics.  Optional captures: the u field
// at every emitted step, or the full states.
RunArtifact run_one(const ProblemConfig& cfg, const InteriorField& u0, const std::string& name,
                    std::vector<InteriorField>* u_trajectory = nullptr,
                    std::vector<State>* states = nullptr);

// Invariant thresholds applied to every accepted run.
inline constexpr double kMassTol = 1e-11;
inline constexpr double kEnergySlackScale = 1e-8;  // times max(1, E_0)

ExperimentOutcome run_experiment(const ExperimentPlan& plan, int threads = 1);

// Manufactured-solution helpers (linear rate graphs, zero potentials):
// exact field exp(-t) cos(2 pi x) cos(pi y) and the forcing that makes it
// solve the system at the given lambda/epsilon.
InteriorField mms_exact_field(const Grid& g, double t);
SourceSpec mms_bulk_source(const ProblemConfig& cfg);
SourceSpec mms_boundary_source(const ProblemConfig& cfg);

// summary.json plus per-run diagnostics and final-state CSVs under dir; the
// file list (with checkpoint t / step / config hash) is the summary manifest.
// Re-emitting the same outcome produces byte-identical files.
void emit_report(const ExperimentOutcome& outcome, const std::string& dir);

}  // namespace chdbc
