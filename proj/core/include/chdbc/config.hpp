#pragma once
// ---------------------------------------------------------------------------
// Flat key-value configuration: "section.key = value" lines, one level of
// dotted sections (model.*, grid.*, time.*, init.*, experiment.*), comments
// with '#'.  parse_config validates hard structural assumptions and attaches
// the full assumption report; emit_config produces the canonical form, and
// parse(emit(plan)) round-trips exactly.
// ---------------------------------------------------------------------------

#include <string>

#include "chdbc/graphs.hpp"
#include "chdbc/stepper.hpp"

namespace chdbc {

// Initial datum mean + amplitude * cos(2 pi kx x) * cos(pi ky y); the cosine
// part has exactly zero quadrature mean for kx >= 1.
struct InitialDataSpec {
  double mean = 0.0;
  double amplitude = 0.1;
  int x_mode = 1;
  int y_mode = 1;

  InteriorField build(const Grid& g) const;
  bool operator==(const InitialDataSpec&) const = default;
};

enum class ExperimentKind { Run, LambdaSweep, EpsilonSweep, StabilityPair, Mms };

const char* experiment_kind_name(ExperimentKind k);

struct ExperimentPlan {
  ExperimentKind kind = ExperimentKind::Run;
  ProblemConfig base;
  InitialDataSpec init;
  int halvings = 4;               // sweep length: halvings+1 parameter values
  double stability_delta = 1e-3;  // perturbation amplitude (second run uses delta/2)
  int stability_mode = 1;         // x-mode of the mean-free perturbation
  double stability_phase = 0.0;   // x-shift of the perturbation, in [0,1)

  GraphAssumptionReport assumptions;  // attached by parse_config / revalidate
};

// Parses and validates.  Rejections (ConfigError with the offending key):
// unknown keys, malformed values, non-coercive boundary rate graph, broken
// domination, non-coercive bulk rate graph without model.strong_regime, an
// initial mean outside the interior of the boundary potential domain, and
// mms plans on anything but the linear/zero-graph configuration.
ExperimentPlan parse_config(const std::string& text);

// Canonical emission: every key, fixed order, 17 significant digits.
std::string emit_config(const ExperimentPlan& plan);

// FNV-1a 64-bit hash of the canonical emission, as 16 hex digits.
std::string config_hash(const ExperimentPlan& plan);

// Re-runs the structural validation of parse_config on an in-memory plan
// (used by drivers that synthesize plans programmatically).
void validate_plan(ExperimentPlan& plan);

}  // namespace chdbc
