#pragma once

// Backward-Euler stepping of the regularized viscous phase-field system with
// dynamic boundary conditions.  Unknowns per step are the bulk order
// parameter u (whose boundary rows are the boundary order parameter v) and
// the chemical potential mu.  The scheme is the nodal Galerkin form of
//
//   d_t u + lambda*mu - Lap mu = 0                      (all nodes)
//   mu = lambda*d_t u + alpha_lambda(d_t u) + lambda*u
//        - Lap u + beta_lambda(u) + T_lambda(pi(u)) - g  (interior nodes)
//   lambda*d_t v + alpha_g_lambda(d_t v) + dn(u)
//        - eps*Lap_surf v + beta_g_{c*lambda}(v)
//        + T_lambda(pi_g(v)) = g_g                       (boundary nodes)
//
// assembled against the trapezoid quadrature, so mass and energy ledgers
// close to solver precision.  The nonlinear system is solved by a damped
// semismooth Newton iteration (sparse LU on the linearization) with a
// frozen-perturbation fixed-point fallback.

#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "chdbc/graphs.hpp"
#include "chdbc/grid.hpp"

namespace chdbc {

// Forcing term: zero, constant, or a separable cosine mode with exponential
// decay in time, A * cos(2 pi kx x) * cos(pi ky y) * exp(-rate * t).
// Boundary evaluation takes the trace at y = 0 and y = 1.
struct SourceSpec {
  enum class Kind { Zero, Constant, SeparableMode };
  Kind kind = Kind::Zero;
  double value = 0.0;      // Constant
  double amplitude = 0.0;  // SeparableMode
  int x_mode = 0;
  int y_mode = 0;
  double decay_rate = 0.0;

  static SourceSpec zero() { return {}; }
  static SourceSpec constant(double v);
  static SourceSpec mode(double amplitude, int x_mode, int y_mode, double decay_rate);

  double eval(double t, double x, double y) const;
  bool is_zero() const { return kind == Kind::Zero; }
  bool operator==(const SourceSpec&) const = default;
};

// Lipschitz perturbation pi(r) = slope*r + cubic*clamped_cubic(r), where the
// cubic part follows r^3 on [-cap, cap] and continues linearly (C^1) outside,
// keeping the map globally Lipschitz with pi(0) = 0.
struct Perturbation {
  double slope = 0.0;
  double cubic = 0.0;
  double cap = 2.0;

  double eval(double r) const;
  double deriv(double r) const;
  bool is_zero() const { return slope == 0.0 && cubic == 0.0; }
  bool operator==(const Perturbation&) const = default;
};

struct ProblemConfig {
  double epsilon = 0.1;  // boundary gradient coefficient
  double lambda = 0.1;   // regularization strength (viscosity + Yosida parameter)
  double tau = 1e-3;     // time step
  double t_final = 0.05;
  double c_dom = 1.0;  // domination constant: boundary potential graph uses parameter c_dom*lambda
  Grid grid{32, 33};
  MonotoneGraph alpha = MonotoneGraph::linear(1.0);    // bulk viscosity graph
  MonotoneGraph alpha_g = MonotoneGraph::linear(1.0);  // boundary viscosity graph
  MonotoneGraph beta = MonotoneGraph::polynomial(3, 1.0);
  MonotoneGraph beta_g = MonotoneGraph::polynomial(3, 1.0);
  Perturbation pi;
  Perturbation pi_g;
  SourceSpec source;
  SourceSpec source_g;
  bool strong_regime = false;  // elliptic smoothing of sources, non-coercive viscosity allowed

  double beta_g_param() const { return c_dom * lambda; }
  void validate() const;  // parameter sanity; throws ConfigError
};

// Time-slab state.  trace(u) == v exactly; w/w_g are the backward rates that
// produced the state, eta/eta_g/xi/xi_g the Yosida values at those fields.
struct State {
  double t = 0.0;
  InteriorField u, mu, w, eta, xi;
  BoundaryField v, w_g, eta_g, xi_g;
};

struct SystemResidual {
  InteriorField time_eq;   // all nodes
  InteriorField bulk_eq;   // interior nodes (boundary rows zero)
  BoundaryField boundary_eq;
  double combined_norm = 0.0;  // sqrt(|r1|_H^2 + |r2|_H^2 + |r3|_HG^2)
};

// Residual of the three discrete equations at time prev.t + tau for a
// candidate (u, mu) pair; rates are backward differences against prev.
SystemResidual residual(const ProblemConfig& cfg, const State& prev, const State& candidate);

struct StepStats {
  int newton_iterations = 0;
  int fallback_rounds = 0;
  bool used_fallback = false;
  double residual_norm = 0.0;
  std::vector<double> residual_trace;
};

// One backward-Euler step; residual norm of the returned state is at most
// 1e-9 (usually near round-off), otherwise SolveError with iteration trace.
State step(const ProblemConfig& cfg, const State& prev, StepStats* stats = nullptr);

// One solve of the step system with the (truncated) perturbation terms frozen
// at the supplied fields instead of the unknown: the fixed-point map whose
// iteration is the fallback solver.  Exposed for contraction measurements.
State step_frozen_perturbation(const ProblemConfig& cfg, const State& prev,
                               const InteriorField& frozen_bulk, const BoundaryField& frozen_bnd,
                               StepStats* stats = nullptr);

// Compatible rates at t = 0: the unique triple (u_rate0, v_rate0, mu0) solving
// the three equations at the initial datum (data terms frozen at u0).  Note
// v_rate0 is not constrained to be the trace of u_rate0.
struct InitialRates {
  InteriorField u_rate0;
  InteriorField mu0;
  BoundaryField v_rate0;
  double residual_norm = 0.0;
};
InitialRates initial_rates(const ProblemConfig& cfg, const InteriorField& u0);

// State at t = 0 with rate fields from initial_rates.
State make_initial_state(const ProblemConfig& cfg, const InteriorField& u0);

// March from u0 to t_final (t_final/tau steps, at most 1e7; at least 1).
// The hook sees the initial state as step 0 and each accepted step after.
using StateHook = std::function<void(int step_index, const State&)>;
State run(const ProblemConfig& cfg, const InteriorField& u0, const StateHook& hook = nullptr);

// The rate-side operator of the compact reformulation:
//   (lambda*x + alpha_lambda(x) + (lambda - Lap)^{-1} x, lambda*y + alpha_g_lambda(y)).
// Exposed for the coercivity/boundedness property checks.
std::pair<InteriorField, BoundaryField> apply_rate_operator(const ProblemConfig& cfg,
                                                            const InteriorField& x,
                                                            const BoundaryField& y);

// Sources actually seen by the scheme at time t (elliptically smoothed when
// strong_regime is on).
InteriorField bulk_source_field(const ProblemConfig& cfg, double t);
BoundaryField boundary_source_field(const ProblemConfig& cfg, double t);

// State serialization: one CSV ("field,x,y,value") per state; boundary fields
// use y = 0 / y = 1 rows.
void write_state_csv(const State& s, std::ostream& out);
State read_state_csv(const Grid& g, std::istream& in);

}  // namespace chdbc
