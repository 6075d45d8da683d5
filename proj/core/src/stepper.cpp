#include "chdbc/stepper.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "detail_format.hpp"

namespace chdbc {

// ---------------------------------------------------------------------------
// sources and perturbations
// ---------------------------------------------------------------------------

SourceSpec SourceSpec::constant(double v) {
  SourceSpec s;
  s.kind = Kind::Constant;
  s.value = v;
  return s;
}

SourceSpec SourceSpec::mode(double amplitude, int x_mode, int y_mode, double decay_rate) {
  SourceSpec s;
  s.kind = Kind::SeparableMode;
  s.amplitude = amplitude;
  s.x_mode = x_mode;
  s.y_mode = y_mode;
  s.decay_rate = decay_rate;
  return s;
}

double SourceSpec::eval(double t, double x, double y) const {
  switch (kind) {
    case Kind::Zero:
      return 0.0;
    case Kind::Constant:
      return value;
    case Kind::SeparableMode: {
      constexpr double pi = 3.14159265358979323846;
      return amplitude * std::cos(2.0 * pi * x_mode * x) * std::cos(pi * y_mode * y) *
             std::exp(-decay_rate * t);
    }
  }
  return 0.0;
}

double Perturbation::eval(double r) const {
  double c3;
  if (r > cap)
    c3 = cap * cap * cap + 3.0 * cap * cap * (r - cap);
  else if (r < -cap)
    c3 = -cap * cap * cap + 3.0 * cap * cap * (r + cap);
  else
    c3 = r * r * r;
  return slope * r + cubic * c3;
}

double Perturbation::deriv(double r) const {
  double d3 = (r > cap || r < -cap) ? 3.0 * cap * cap : 3.0 * r * r;
  return slope + cubic * d3;
}

void ProblemConfig::validate() const {
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
  if (!(lambda > 0.0)) throw ConfigError("lambda must be > 0");
  if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
  if (!(t_final > 0.0)) throw ConfigError("t_final must be > 0");
  if (!(c_dom > 0.0)) throw ConfigError("c_dom must be > 0");
  if (grid.nx < 4 || grid.ny < 4) throw ConfigError("grid too small");
}

namespace {

InteriorField sample_interior(const Grid& g, const SourceSpec& s, double t) {
  InteriorField f(g);
  if (s.is_zero()) return f;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) f.at(i, j) = s.eval(t, g.x(i), g.y(j));
  return f;
}

BoundaryField sample_boundary(const Grid& g, const SourceSpec& s, double t) {
  BoundaryField f(g);
  if (s.is_zero()) return f;
  for (int i = 0; i < g.nx; ++i) {
    f.bottom()[i] = s.eval(t, g.x(i), 0.0);
    f.top()[i] = s.eval(t, g.x(i), 1.0);
  }
  return f;
}

// (I - lambda * Lap_surf)^{-1} per circle, small unpreconditioned CG.
std::vector<double> circle_helmholtz(double lambda, const std::vector<double>& b, double hx) {
  const int n = static_cast<int>(b.size());
  auto apply = [&](const std::vector<double>& p) {
    std::vector<double> ap(n);
    double ax = lambda / (hx * hx);
    for (int i = 0; i < n; ++i) {
      int ip = (i + 1) % n, im = (i + n - 1) % n;
      ap[i] = p[i] - ax * (p[ip] - 2.0 * p[i] + p[im]);
    }
    return ap;
  };
  std::vector<double> x(n, 0.0), r = b, p = b;
  double rr = 0.0, bb = 0.0;
  for (int i = 0; i < n; ++i) {
    rr += r[i] * r[i];
    bb += b[i] * b[i];
  }
  if (bb == 0.0) return x;
  for (int it = 0; it < 20 * n; ++it) {
    if (rr <= 1e-28 * bb) break;
    auto ap = apply(p);
    double pap = 0.0;
    for (int i = 0; i < n; ++i) pap += p[i] * ap[i];
    double a = rr / pap;
    double rr_next = 0.0;
    for (int i = 0; i < n; ++i) {
      x[i] += a * p[i];
      r[i] -= a * ap[i];
      rr_next += r[i] * r[i];
    }
    double beta = rr_next / rr;
    rr = rr_next;
    for (int i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
  }
  return x;
}

}  // namespace

InteriorField bulk_source_field(const ProblemConfig& cfg, double t) {
  InteriorField g = sample_interior(cfg.grid, cfg.source, t);
  if (cfg.strong_regime && !cfg.source.is_zero()) {
    // g_lambda = (I - lambda*Lap)^{-1} g
    double l = cfg.lambda;
    g = helmholtz_neumann_solve(1.0 / l, (1.0 / l) * g);
  }
  return g;
}

BoundaryField boundary_source_field(const ProblemConfig& cfg, double t) {
  BoundaryField g = sample_boundary(cfg.grid, cfg.source_g, t);
  if (cfg.strong_regime && !cfg.source_g.is_zero()) {
    g.bottom() = circle_helmholtz(cfg.lambda, g.bottom(), cfg.grid.hx);
    g.top() = circle_helmholtz(cfg.lambda, g.top(), cfg.grid.hx);
  }
  return g;
}

// ---------------------------------------------------------------------------
// residual assembly
// ---------------------------------------------------------------------------

namespace {

struct Blocks {
  InteriorField r1, r2;
  BoundaryField r3;
  double norm = 0.0;
};

// Shared evaluation of the three residual blocks.  When frozen perturbation
// fields are supplied they replace T_lambda(pi(u)) / T_lambda(pi_g(v)).
Blocks eval_blocks(const ProblemConfig& cfg, const State& prev, const InteriorField& u,
                   const InteriorField& mu, const InteriorField& gsrc, const BoundaryField& ggsrc,
                   const InteriorField* frozen_bulk, const BoundaryField* frozen_bnd) {
  const Grid& g = cfg.grid;
  const double l = cfg.lambda, tau = cfg.tau, lg = cfg.beta_g_param();

  InteriorField w = (1.0 / tau) * (u - prev.u);
  InteriorField lap_mu = laplacian_neumann(mu);
  InteriorField lap_u = laplacian_neumann(u);  // boundary rows: ghost-reflection part

  Blocks out;
  out.r1 = InteriorField(g);
  out.r2 = InteriorField(g);
  out.r3 = BoundaryField(g);

  // core := lambda*w + alpha_l(w) + lambda*u + beta_l(u) + T(pi(u)) - g - mu - lap_u
  InteriorField core(g);
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      double wij = w.at(i, j), uij = u.at(i, j);
      double tpi = frozen_bulk ? frozen_bulk->at(i, j) : truncate(l, cfg.pi.eval(uij));
      core.at(i, j) = l * wij + yosida(cfg.alpha, l, wij) + l * uij + yosida(cfg.beta, l, uij) +
                      tpi - gsrc.at(i, j) - mu.at(i, j) - lap_u.at(i, j);
      out.r1.at(i, j) = wij + l * mu.at(i, j) - lap_mu.at(i, j);
    }
  }
  for (int j = 1; j + 1 < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) out.r2.at(i, j) = core.at(i, j);

  BoundaryField v = trace(u);
  BoundaryField wg = trace(w);
  BoundaryField lb = laplace_beltrami(v);
  const double half_hy = 0.5 * g.hy;
  for (int i = 0; i < g.nx; ++i) {
    double tpb = frozen_bnd ? frozen_bnd->bottom()[i] : truncate(l, cfg.pi_g.eval(v.bottom()[i]));
    double tpt = frozen_bnd ? frozen_bnd->top()[i] : truncate(l, cfg.pi_g.eval(v.top()[i]));
    out.r3.bottom()[i] = half_hy * core.at(i, 0) + l * wg.bottom()[i] +
                         yosida(cfg.alpha_g, l, wg.bottom()[i]) - cfg.epsilon * lb.bottom()[i] +
                         yosida(cfg.beta_g, lg, v.bottom()[i]) + tpb - ggsrc.bottom()[i];
    out.r3.top()[i] = half_hy * core.at(i, g.ny - 1) + l * wg.top()[i] +
                      yosida(cfg.alpha_g, l, wg.top()[i]) - cfg.epsilon * lb.top()[i] +
                      yosida(cfg.beta_g, lg, v.top()[i]) + tpt - ggsrc.top()[i];
  }

  double n1 = inner(out.r1, out.r1), n2 = inner(out.r2, out.r2),
         n3 = boundary_inner(out.r3, out.r3);
  out.norm = std::sqrt(n1 + n2 + n3);
  if (!std::isfinite(out.norm)) throw SolveError("non-finite residual encountered");
  return out;
}

// ---------------------------------------------------------------------------
// Newton solver for the coupled step system
// ---------------------------------------------------------------------------

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

struct NewtonWork {
  const ProblemConfig& cfg;
  const State& prev;
  InteriorField gsrc;
  BoundaryField ggsrc;
  const InteriorField* frozen_bulk = nullptr;
  const BoundaryField* frozen_bnd = nullptr;

  int n() const { return cfg.grid.nodes(); }

  Blocks blocks(const InteriorField& u, const InteriorField& mu) const {
    return eval_blocks(cfg, prev, u, mu, gsrc, ggsrc, frozen_bulk, frozen_bnd);
  }

  // Residual blocks flattened in the unknown ordering [u nodes | mu nodes].
  Eigen::VectorXd flatten(const Blocks& b) const {
    const Grid& g = cfg.grid;
    Eigen::VectorXd r(2 * n());
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        int k = j * g.nx + i;
        r[k] = b.r1.at(i, j);
        if (j == 0)
          r[n() + k] = b.r3.bottom()[i];
        else if (j == g.ny - 1)
          r[n() + k] = b.r3.top()[i];
        else
          r[n() + k] = b.r2.at(i, j);
      }
    return r;
  }

  SpMat jacobian(const InteriorField& u) const {
    const Grid& g = cfg.grid;
    const int N = n();
    const double l = cfg.lambda, tau = cfg.tau, lg = cfg.beta_g_param();
    const double ax = 1.0 / (g.hx * g.hx), ay = 1.0 / (g.hy * g.hy);
    const double half_hy = 0.5 * g.hy;

    std::vector<Triplet> t;
    t.reserve(static_cast<size_t>(14) * N);
    auto idx = [&](int i, int j) { return j * g.nx + i; };

    for (int j = 0; j < g.ny; ++j) {
      for (int i = 0; i < g.nx; ++i) {
        int k = idx(i, j);
        int ip = idx((i + 1) % g.nx, j), im = idx((i + g.nx - 1) % g.nx, j);
        bool bottom = (j == 0), top = (j == g.ny - 1), bnd = bottom || top;

        // --- row k: time equation d/du = 1/tau, d/dmu = lambda - Lap
        t.emplace_back(k, k, 1.0 / tau);
        t.emplace_back(k, N + k, l + 2.0 * ax + 2.0 * ay);
        t.emplace_back(k, N + ip, -ax);
        t.emplace_back(k, N + im, -ax);
        if (bnd) {
          int jn = bottom ? idx(i, 1) : idx(i, g.ny - 2);
          t.emplace_back(k, N + jn, -2.0 * ay);
        } else {
          t.emplace_back(k, N + idx(i, j + 1), -ay);
          t.emplace_back(k, N + idx(i, j - 1), -ay);
        }

        // --- row N+k: bulk/boundary equation
        double wij = (u.at(i, j) - prev.u.at(i, j)) / tau;
        double core_diag = (l + yosida_derivative(cfg.alpha, l, wij)) / tau + l +
                           yosida_derivative(cfg.beta, l, u.at(i, j));
        if (!frozen_bulk) {
          double p = cfg.pi.eval(u.at(i, j));
          if (std::abs(p) < 1.0 / l) core_diag += cfg.pi.deriv(u.at(i, j));
        }
        if (!bnd) {
          t.emplace_back(N + k, k, core_diag + 2.0 * ax + 2.0 * ay);
          t.emplace_back(N + k, ip, -ax);
          t.emplace_back(N + k, im, -ax);
          t.emplace_back(N + k, idx(i, j + 1), -ay);
          t.emplace_back(N + k, idx(i, j - 1), -ay);
          t.emplace_back(N + k, N + k, -1.0);
        } else {
          double vi = u.at(i, j);
          double bdiag = (l + yosida_derivative(cfg.alpha_g, l, wij)) / tau +
                         yosida_derivative(cfg.beta_g, lg, vi) + 2.0 * cfg.epsilon * ax;
          if (!frozen_bnd) {
            double p = cfg.pi_g.eval(vi);
            if (std::abs(p) < 1.0 / l) bdiag += cfg.pi_g.deriv(vi);
          }
          t.emplace_back(N + k, k, half_hy * (core_diag + 2.0 * ax + 2.0 * ay) + bdiag);
          t.emplace_back(N + k, ip, -half_hy * ax - cfg.epsilon * ax);
          t.emplace_back(N + k, im, -half_hy * ax - cfg.epsilon * ax);
          int jn = bottom ? idx(i, 1) : idx(i, g.ny - 2);
          t.emplace_back(N + k, jn, -half_hy * 2.0 * ay);
          t.emplace_back(N + k, N + k, -half_hy);
        }
      }
    }
    SpMat J(2 * N, 2 * N);
    J.setFromTriplets(t.begin(), t.end());
    return J;
  }
};

struct NewtonOutcome {
  InteriorField u;
  InteriorField mu;
  double residual = 0.0;
  int iterations = 0;
  std::vector<double> trace;
};

// Damped Newton: at most max_iter linearizations, each followed by a
// backtracking line search on the combined residual norm.
NewtonOutcome newton_solve(const NewtonWork& work, InteriorField u, InteriorField mu,
                           double stop_tol, int max_iter) {
  NewtonOutcome out;
  Blocks b = work.blocks(u, mu);
  out.trace.push_back(b.norm);
  const Grid& g = work.cfg.grid;
  const int N = work.n();

  for (int it = 0; it < max_iter && b.norm > stop_tol; ++it) {
    SpMat J = work.jacobian(u);
    Eigen::SparseLU<SpMat> lu;
    lu.compute(J);
    if (lu.info() != Eigen::Success) throw SolveError("Newton linearization is singular");
    Eigen::VectorXd dx = lu.solve(-work.flatten(b));

    double theta = 1.0;
    InteriorField u_best = u, mu_best = mu;
    Blocks b_best = b;
    bool improved = false;
    for (int ls = 0; ls < 12; ++ls) {
      InteriorField u_try = u, mu_try = mu;
      for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
          int k = j * g.nx + i;
          u_try.at(i, j) += theta * dx[k];
          mu_try.at(i, j) += theta * dx[N + k];
        }
      Blocks b_try = work.blocks(u_try, mu_try);
      if (b_try.norm < b.norm * (1.0 - 1e-4 * theta)) {
        u_best = u_try;
        mu_best = mu_try;
        b_best = b_try;
        improved = true;
        break;
      }
      if (b_try.norm < b_best.norm) {
        u_best = u_try;
        mu_best = mu_try;
        b_best = b_try;
        improved = true;
      }
      theta *= 0.5;
    }
    if (!improved) break;  // stalled; caller decides what to do
    u = u_best;
    mu = mu_best;
    b = b_best;
    out.trace.push_back(b.norm);
    out.iterations = it + 1;
  }
  out.u = u;
  out.mu = mu;
  out.residual = b.norm;
  return out;
}

State assemble_state(const ProblemConfig& cfg, const State& prev, const InteriorField& u,
                     const InteriorField& mu) {
  const Grid& g = cfg.grid;
  State s;
  s.t = prev.t + cfg.tau;
  s.u = u;
  s.mu = mu;
  s.w = (1.0 / cfg.tau) * (u - prev.u);
  s.v = trace(u);
  s.w_g = trace(s.w);
  s.eta = InteriorField(g);
  s.xi = InteriorField(g);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      s.eta.at(i, j) = yosida(cfg.alpha, cfg.lambda, s.w.at(i, j));
      s.xi.at(i, j) = yosida(cfg.beta, cfg.lambda, u.at(i, j));
    }
  s.eta_g = BoundaryField(g);
  s.xi_g = BoundaryField(g);
  for (int i = 0; i < g.nx; ++i) {
    s.eta_g.bottom()[i] = yosida(cfg.alpha_g, cfg.lambda, s.w_g.bottom()[i]);
    s.eta_g.top()[i] = yosida(cfg.alpha_g, cfg.lambda, s.w_g.top()[i]);
    s.xi_g.bottom()[i] = yosida(cfg.beta_g, cfg.beta_g_param(), s.v.bottom()[i]);
    s.xi_g.top()[i] = yosida(cfg.beta_g, cfg.beta_g_param(), s.v.top()[i]);
  }
  return s;
}

constexpr double kStopTol = 1e-12;
constexpr double kAcceptTol = 1e-9;

}  // namespace

SystemResidual residual(const ProblemConfig& cfg, const State& prev, const State& candidate) {
  InteriorField gsrc = bulk_source_field(cfg, prev.t + cfg.tau);
  BoundaryField ggsrc = boundary_source_field(cfg, prev.t + cfg.tau);
  Blocks b = eval_blocks(cfg, prev, candidate.u, candidate.mu, gsrc, ggsrc, nullptr, nullptr);
  return {std::move(b.r1), std::move(b.r2), std::move(b.r3), b.norm};
}

State step(const ProblemConfig& cfg, const State& prev, StepStats* stats) {
  cfg.validate();
  NewtonWork work{cfg, prev, bulk_source_field(cfg, prev.t + cfg.tau),
                  boundary_source_field(cfg, prev.t + cfg.tau)};

  NewtonOutcome live = newton_solve(work, prev.u, prev.mu, kStopTol, 50);
  StepStats st;
  st.newton_iterations = live.iterations;
  st.residual_trace = live.trace;
  st.residual_norm = live.residual;

  if (live.residual > kStopTol) {
    // Frozen-perturbation fixed point: freeze the truncated perturbation at
    // the current iterate, solve the monotone remainder, repeat.
    st.used_fallback = true;
    InteriorField u = live.u;
    InteriorField mu = live.mu;
    const Grid& g = cfg.grid;
    for (int round = 0; round < 100; ++round) {
      InteriorField fb(g);
      BoundaryField fbd(g);
      for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i)
          fb.at(i, j) = truncate(cfg.lambda, cfg.pi.eval(u.at(i, j)));
      for (int i = 0; i < g.nx; ++i) {
        fbd.bottom()[i] = truncate(cfg.lambda, cfg.pi_g.eval(u.at(i, 0)));
        fbd.top()[i] = truncate(cfg.lambda, cfg.pi_g.eval(u.at(i, g.ny - 1)));
      }
      NewtonWork frozen = work;
      frozen.frozen_bulk = &fb;
      frozen.frozen_bnd = &fbd;
      NewtonOutcome inner = newton_solve(frozen, u, mu, kStopTol, 30);
      u = inner.u;
      mu = inner.mu;
      st.fallback_rounds = round + 1;
      Blocks true_res = work.blocks(u, mu);
      st.residual_trace.push_back(true_res.norm);
      st.residual_norm = true_res.norm;
      if (true_res.norm <= kStopTol) break;
    }
    live.u = u;
    live.mu = mu;
    live.residual = st.residual_norm;
  }

  if (live.residual > kAcceptTol) {
    std::ostringstream msg;
    msg << "step did not converge: residual " << detail::g17(live.residual) << " after "
        << st.newton_iterations << " Newton iterations";
    if (st.used_fallback) msg << " and " << st.fallback_rounds << " fixed-point rounds";
    msg << "; trace:";
    for (double r : st.residual_trace) msg << ' ' << detail::g17(r);
    throw SolveError(msg.str());
  }
  if (stats) *stats = st;
  return assemble_state(cfg, prev, live.u, live.mu);
}

State step_frozen_perturbation(const ProblemConfig& cfg, const State& prev,
                               const InteriorField& frozen_bulk, const BoundaryField& frozen_bnd,
                               StepStats* stats) {
  cfg.validate();
  const Grid& g = cfg.grid;
  InteriorField fb(g);
  BoundaryField fbd(g);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      fb.at(i, j) = truncate(cfg.lambda, cfg.pi.eval(frozen_bulk.at(i, j)));
  for (int i = 0; i < g.nx; ++i) {
    fbd.bottom()[i] = truncate(cfg.lambda, cfg.pi_g.eval(frozen_bnd.bottom()[i]));
    fbd.top()[i] = truncate(cfg.lambda, cfg.pi_g.eval(frozen_bnd.top()[i]));
  }
  NewtonWork work{cfg, prev, bulk_source_field(cfg, prev.t + cfg.tau),
                  boundary_source_field(cfg, prev.t + cfg.tau)};
  work.frozen_bulk = &fb;
  work.frozen_bnd = &fbd;
  NewtonOutcome out = newton_solve(work, prev.u, prev.mu, kStopTol, 60);
  if (out.residual > kAcceptTol)
    throw SolveError("frozen-perturbation solve did not converge: residual " +
                     detail::g17(out.residual));
  if (stats) {
    stats->newton_iterations = out.iterations;
    stats->residual_norm = out.residual;
    stats->residual_trace = out.trace;
  }
  return assemble_state(cfg, prev, out.u, out.mu);
}

// ---------------------------------------------------------------------------
// initial rates
// ---------------------------------------------------------------------------

namespace {

// Scalar monotone solve of lambda*s + yosida(alpha_g, lambda, s) + rhs = 0.
double solve_boundary_rate(const MonotoneGraph& ag, double lambda, double rhs) {
  if (rhs == 0.0) return 0.0;
  double bound = std::abs(rhs) / lambda + 1.0;
  double lo = -bound, hi = bound;
  double s = -rhs / (lambda + 1.0);
  for (int it = 0; it < 200; ++it) {
    double f = lambda * s + yosida(ag, lambda, s) + rhs;
    if (std::abs(f) <= 1e-14 * std::max(1.0, std::abs(rhs))) break;
    if (f > 0.0)
      hi = s;
    else
      lo = s;
    double df = lambda + yosida_derivative(ag, lambda, s);
    double s_newton = s - f / df;
    s = (s_newton > lo && s_newton < hi) ? s_newton : 0.5 * (lo + hi);
  }
  return s;
}

}  // namespace

InitialRates initial_rates(const ProblemConfig& cfg, const InteriorField& u0) {
  cfg.validate();
  const Grid& g = cfg.grid;
  if (!(u0.grid() == g)) throw ConfigError("initial_rates: datum grid mismatch");
  const double l = cfg.lambda, lg = cfg.beta_g_param();

  InteriorField gsrc = bulk_source_field(cfg, 0.0);
  BoundaryField ggsrc = boundary_source_field(cfg, 0.0);

  // Frozen data terms: z0 in the bulk, w0 on the boundary.
  InteriorField lap_u0 = laplacian_onesided(u0);
  InteriorField z0(g);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      double uij = u0.at(i, j);
      z0.at(i, j) = l * uij - lap_u0.at(i, j) + yosida(cfg.beta, l, uij) +
                    truncate(l, cfg.pi.eval(uij)) - gsrc.at(i, j);
    }
  BoundaryField v0 = trace(u0);
  BoundaryField dn = normal_derivative(u0);
  BoundaryField lb = laplace_beltrami(v0);
  BoundaryField w0(g);
  for (int i = 0; i < g.nx; ++i) {
    w0.bottom()[i] = dn.bottom()[i] - cfg.epsilon * lb.bottom()[i] +
                     yosida(cfg.beta_g, lg, v0.bottom()[i]) +
                     truncate(l, cfg.pi_g.eval(v0.bottom()[i])) - ggsrc.bottom()[i];
    w0.top()[i] = dn.top()[i] - cfg.epsilon * lb.top()[i] + yosida(cfg.beta_g, lg, v0.top()[i]) +
                  truncate(l, cfg.pi_g.eval(v0.top()[i])) - ggsrc.top()[i];
  }

  InitialRates out;
  out.v_rate0 = BoundaryField(g);
  for (int i = 0; i < g.nx; ++i) {
    out.v_rate0.bottom()[i] = solve_boundary_rate(cfg.alpha_g, l, w0.bottom()[i]);
    out.v_rate0.top()[i] = solve_boundary_rate(cfg.alpha_g, l, w0.top()[i]);
  }

  // Coupled bulk system for (r, m) = (u_rate0, mu0):
  //   r + lambda*m - Lap m = 0,   lambda*r + alpha_l(r) - m + z0 = 0.
  const int N = g.nodes();
  const double ax = 1.0 / (g.hx * g.hx), ay = 1.0 / (g.hy * g.hy);
  InteriorField r(g, 0.0), m(g, 0.0);
  auto bulk_res = [&](const InteriorField& rr, const InteriorField& mm) {
    InteriorField lap_m = laplacian_neumann(mm);
    std::pair<InteriorField, InteriorField> res{InteriorField(g), InteriorField(g)};
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        res.first.at(i, j) = rr.at(i, j) + l * mm.at(i, j) - lap_m.at(i, j);
        res.second.at(i, j) =
            l * rr.at(i, j) + yosida(cfg.alpha, l, rr.at(i, j)) - mm.at(i, j) + z0.at(i, j);
      }
    return res;
  };
  auto res_norm = [&](const std::pair<InteriorField, InteriorField>& res) {
    return std::sqrt(inner(res.first, res.first) + inner(res.second, res.second));
  };

  auto res = bulk_res(r, m);
  double rn = res_norm(res);
  for (int it = 0; it < 60 && rn > 1e-13; ++it) {
    std::vector<Triplet> t;
    t.reserve(static_cast<size_t>(9) * N);
    auto idx = [&](int i, int j) { return j * g.nx + i; };
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        int k = idx(i, j);
        int ip = idx((i + 1) % g.nx, j), im = idx((i + g.nx - 1) % g.nx, j);
        t.emplace_back(k, k, 1.0);
        t.emplace_back(k, N + k, l + 2.0 * ax + 2.0 * ay);
        t.emplace_back(k, N + ip, -ax);
        t.emplace_back(k, N + im, -ax);
        if (j == 0 || j == g.ny - 1) {
          int jn = (j == 0) ? idx(i, 1) : idx(i, g.ny - 2);
          t.emplace_back(k, N + jn, -2.0 * ay);
        } else {
          t.emplace_back(k, N + idx(i, j + 1), -ay);
          t.emplace_back(k, N + idx(i, j - 1), -ay);
        }
        t.emplace_back(N + k, k, l + yosida_derivative(cfg.alpha, l, r.at(i, j)));
        t.emplace_back(N + k, N + k, -1.0);
      }
    SpMat J(2 * N, 2 * N);
    J.setFromTriplets(t.begin(), t.end());
    Eigen::VectorXd rhs(2 * N);
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        int k = idx(i, j);
        rhs[k] = -res.first.at(i, j);
        rhs[N + k] = -res.second.at(i, j);
      }
    Eigen::SparseLU<SpMat> lu;
    lu.compute(J);
    if (lu.info() != Eigen::Success) throw SolveError("initial-rate linearization is singular");
    Eigen::VectorXd dx = lu.solve(rhs);
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        int k = idx(i, j);
        r.at(i, j) += dx[k];
        m.at(i, j) += dx[N + k];
      }
    res = bulk_res(r, m);
    rn = res_norm(res);
  }

  out.u_rate0 = r;
  out.mu0 = m;
  double bn = 0.0;
  for (int i = 0; i < g.nx; ++i) {
    double fb = l * out.v_rate0.bottom()[i] + yosida(cfg.alpha_g, l, out.v_rate0.bottom()[i]) +
                w0.bottom()[i];
    double ft = l * out.v_rate0.top()[i] + yosida(cfg.alpha_g, l, out.v_rate0.top()[i]) +
                w0.top()[i];
    bn += fb * fb + ft * ft;
  }
  out.residual_norm = std::sqrt(rn * rn + bn * g.hx);
  if (out.residual_norm > kAcceptTol)
    throw SolveError("initial_rates did not converge: residual " +
                     detail::g17(out.residual_norm));
  return out;
}

State make_initial_state(const ProblemConfig& cfg, const InteriorField& u0) {
  InitialRates rates = initial_rates(cfg, u0);
  const Grid& g = cfg.grid;
  State s;
  s.t = 0.0;
  s.u = u0;
  s.v = trace(u0);
  s.mu = rates.mu0;
  s.w = rates.u_rate0;
  s.w_g = rates.v_rate0;
  s.eta = InteriorField(g);
  s.xi = InteriorField(g);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      s.eta.at(i, j) = yosida(cfg.alpha, cfg.lambda, s.w.at(i, j));
      s.xi.at(i, j) = yosida(cfg.beta, cfg.lambda, u0.at(i, j));
    }
  s.eta_g = BoundaryField(g);
  s.xi_g = BoundaryField(g);
  for (int i = 0; i < g.nx; ++i) {
    s.eta_g.bottom()[i] = yosida(cfg.alpha_g, cfg.lambda, s.w_g.bottom()[i]);
    s.eta_g.top()[i] = yosida(cfg.alpha_g, cfg.lambda, s.w_g.top()[i]);
    s.xi_g.bottom()[i] = yosida(cfg.beta_g, cfg.beta_g_param(), s.v.bottom()[i]);
    s.xi_g.top()[i] = yosida(cfg.beta_g, cfg.beta_g_param(), s.v.top()[i]);
  }
  return s;
}

State run(const ProblemConfig& cfg, const InteriorField& u0, const StateHook& hook) {
  cfg.validate();
  double steps_real = cfg.t_final / cfg.tau;
  if (steps_real > 1e7) throw ConfigError("run: more than 1e7 steps requested");
  long long n = std::llround(std::floor(steps_real + 1e-9));
  if (n < 1) throw ConfigError("run: 0 steps requested (tau > t_final)");

  State s = make_initial_state(cfg, u0);
  if (hook) hook(0, s);
  for (long long k = 1; k <= n; ++k) {
    s = step(cfg, s);
    if (hook) hook(static_cast<int>(k), s);
  }
  return s;
}

std::pair<InteriorField, BoundaryField> apply_rate_operator(const ProblemConfig& cfg,
                                                            const InteriorField& x,
                                                            const BoundaryField& y) {
  const Grid& g = cfg.grid;
  const double l = cfg.lambda;
  InteriorField gz = helmholtz_neumann_solve(l, x);
  InteriorField a(g);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      a.at(i, j) = l * x.at(i, j) + yosida(cfg.alpha, l, x.at(i, j)) + gz.at(i, j);
  BoundaryField b(g);
  for (int i = 0; i < g.nx; ++i) {
    b.bottom()[i] = l * y.bottom()[i] + yosida(cfg.alpha_g, l, y.bottom()[i]);
    b.top()[i] = l * y.top()[i] + yosida(cfg.alpha_g, l, y.top()[i]);
  }
  return {std::move(a), std::move(b)};
}

// ---------------------------------------------------------------------------
// state serialization
// ---------------------------------------------------------------------------

namespace {

void put_interior(std::ostream& out, const char* name, const InteriorField& f) {
  const Grid& g = f.grid();
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      out << name << ',' << detail::g17(g.x(i)) << ',' << detail::g17(g.y(j)) << ','
          << detail::g17(f.at(i, j)) << '\n';
}

void put_boundary(std::ostream& out, const char* name, const BoundaryField& f) {
  const Grid& g = f.grid();
  for (int i = 0; i < g.nx; ++i)
    out << name << ',' << detail::g17(g.x(i)) << ",0," << detail::g17(f.bottom()[i]) << '\n';
  for (int i = 0; i < g.nx; ++i)
    out << name << ',' << detail::g17(g.x(i)) << ",1," << detail::g17(f.top()[i]) << '\n';
}

}  // namespace

void write_state_csv(const State& s, std::ostream& out) {
  out << "field,x,y,value\n";
  out << "t,0,0," << detail::g17(s.t) << '\n';
  put_interior(out, "u", s.u);
  put_interior(out, "mu", s.mu);
  put_interior(out, "w", s.w);
  put_interior(out, "eta", s.eta);
  put_interior(out, "xi", s.xi);
  put_boundary(out, "v", s.v);
  put_boundary(out, "w_g", s.w_g);
  put_boundary(out, "eta_g", s.eta_g);
  put_boundary(out, "xi_g", s.xi_g);
}

State read_state_csv(const Grid& g, std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "field,x,y,value")
    throw IoError("state CSV: bad header");
  State s;
  s.u = InteriorField(g);
  s.mu = InteriorField(g);
  s.w = InteriorField(g);
  s.eta = InteriorField(g);
  s.xi = InteriorField(g);
  s.v = BoundaryField(g);
  s.w_g = BoundaryField(g);
  s.eta_g = BoundaryField(g);
  s.xi_g = BoundaryField(g);

  auto next_cells = [&]() {
    if (!std::getline(in, line)) throw IoError("state CSV: truncated");
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
      if (c == ',') {
        cells.push_back(cur);
        cur.clear();
      } else if (c != '\r') {
        cur += c;
      }
    }
    cells.push_back(cur);
    if (cells.size() != 4) throw IoError("state CSV: bad row '" + line + "'");
    return cells;
  };

  auto cells = next_cells();
  if (cells[0] != "t") throw IoError("state CSV: missing t row");
  s.t = std::stod(cells[3]);

  auto get_interior = [&](const char* name, InteriorField& f) {
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        auto c = next_cells();
        if (c[0] != name) throw IoError(std::string("state CSV: expected field ") + name);
        f.at(i, j) = std::stod(c[3]);
      }
  };
  auto get_boundary = [&](const char* name, BoundaryField& f) {
    for (int pass = 0; pass < 2; ++pass)
      for (int i = 0; i < g.nx; ++i) {
        auto c = next_cells();
        if (c[0] != name) throw IoError(std::string("state CSV: expected field ") + name);
        (pass == 0 ? f.bottom() : f.top())[i] = std::stod(c[3]);
      }
  };
  get_interior("u", s.u);
  get_interior("mu", s.mu);
  get_interior("w", s.w);
  get_interior("eta", s.eta);
  get_interior("xi", s.xi);
  get_boundary("v", s.v);
  get_boundary("w_g", s.w_g);
  get_boundary("eta_g", s.eta_g);
  get_boundary("xi_g", s.xi_g);
  return s;
}

}  // namespace chdbc
