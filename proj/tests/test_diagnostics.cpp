// Trajectory diagnostics: the energy/mass ledgers, the named norm suite, the
// mean-of-mu certificate, two-trajectory stability functionals with the
// Gronwall fit, the sweep accumulator, and the cross-bound probe.

#include <cmath>
#include <sstream>
#include <vector>

#include "chdbc/diagnostics.hpp"
#include "doctest.h"

using namespace chdbc;

namespace {

constexpr double kPi = 3.14159265358979323846;

ProblemConfig desk_cfg() {
  ProblemConfig cfg;
  cfg.grid = Grid(16, 17);
  cfg.tau = 1e-3;
  cfg.t_final = 1e-2;
  return cfg;
}

InteriorField mode_field(const Grid& g, double a, int kx, int ky, double shift = 0.0) {
  InteriorField out(g);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      out.at(i, j) = shift + a * std::cos(2.0 * kPi * kx * g.x(i)) * std::cos(kPi * ky * g.y(j));
  return out;
}

std::vector<State> collect_run(const ProblemConfig& cfg, const InteriorField& u0) {
  std::vector<State> traj;
  run(cfg, u0, [&](int, const State& s) { traj.push_back(s); });
  return traj;
}

// a state with prescribed u (trace-linked v) and all other fields zero
State bare_state(const Grid& g, const InteriorField& u) {
  State s;
  s.u = u;
  s.v = trace(u);
  s.mu = InteriorField(g);
  s.w = InteriorField(g);
  s.eta = InteriorField(g);
  s.xi = InteriorField(g);
  s.w_g = BoundaryField(g);
  s.eta_g = BoundaryField(g);
  s.xi_g = BoundaryField(g);
  return s;
}

}  // namespace

TEST_CASE("zero trajectory: all ledger entries vanish") {
  auto cfg = desk_cfg();
  State s0 = make_initial_state(cfg, InteriorField(cfg.grid, 0.0));
  auto r0 = initial_record(cfg, s0);
  CHECK(r0.mass == 0.0);
  CHECK(r0.mass_residual == 0.0);
  CHECK(r0.energy_residual == 0.0);
  CHECK(std::abs(r0.energy) <= 1e-14);
  CHECK(std::abs(r0.dissipation) <= 1e-12);
  for (const auto& [name, value] : r0.norms) {
    CAPTURE(name);
    CHECK(std::abs(value) <= 1e-12);
  }
  State s1 = step(cfg, s0);
  auto r1 = record(cfg, s0, s1);
  CHECK(std::abs(r1.mass_residual) <= 1e-13);
  CHECK(std::abs(r1.energy_residual) <= 1e-12);
}

TEST_CASE("gradient flow dissipates: one-sided energy ledger") {
  auto cfg = desk_cfg();  // cubic wells, no sources, no perturbation
  cfg.t_final = 10 * cfg.tau;
  auto traj = collect_run(cfg, mode_field(cfg.grid, 0.5, 1, 1, 0.1));
  REQUIRE(traj.size() == 11);
  double e0 = state_energy(cfg, traj[0]).total();
  double scale = 1e-8 * std::max(1.0, e0);
  double prev_energy = e0;
  for (size_t k = 1; k < traj.size(); ++k) {
    auto r = record(cfg, traj[k - 1], traj[k]);
    CHECK(std::abs(r.mass_residual) <= 1e-11);
    CHECK(r.energy >= 0.0);
    CHECK(r.dissipation >= -1e-12);  // every term nonnegative for this menu
    CHECK(r.source_work == 0.0);
    CHECK(r.energy_residual <= scale);          // E+ - E + tau*D <= tol
    CHECK(r.energy <= prev_energy + scale);     // monotone decay follows
    prev_energy = r.energy;
  }
}

TEST_CASE("ledger closes with source work") {
  auto cfg = desk_cfg();
  cfg.t_final = 5 * cfg.tau;
  cfg.pi.slope = -1.0;
  cfg.source = SourceSpec::mode(0.5, 1, 1, 1.0);
  cfg.source_g = SourceSpec::constant(0.2);
  auto traj = collect_run(cfg, mode_field(cfg.grid, 0.4, 1, 2, 0.0));
  double e0 = state_energy(cfg, traj[0]).total();
  double scale = 1e-8 * std::max(1.0, e0);
  for (size_t k = 1; k < traj.size(); ++k) {
    auto r = record(cfg, traj[k - 1], traj[k]);
    CHECK(std::abs(r.mass_residual) <= 1e-11);
    CHECK(r.energy_residual <= scale);
    CHECK(r.source_work != 0.0);
  }
}

TEST_CASE("energy breakdown matches its parts") {
  auto cfg = desk_cfg();
  State s = make_initial_state(cfg, mode_field(cfg.grid, 0.3, 1, 1, 0.2));
  auto e = state_energy(cfg, s);
  CHECK(e.gradient == doctest::Approx(0.5 * gradient_inner(s.u, s.u)).epsilon(1e-14));
  CHECK(e.l2 == doctest::Approx(0.5 * cfg.lambda * inner(s.u, s.u)).epsilon(1e-14));
  CHECK(e.surface_gradient ==
        doctest::Approx(0.5 * cfg.epsilon * boundary_gradient_inner(s.v, s.v)).epsilon(1e-14));
  CHECK(e.potential >= 0.0);
  CHECK(e.surface_potential >= 0.0);
  CHECK(e.total() == doctest::Approx(e.gradient + e.l2 + e.surface_gradient + e.potential +
                                     e.surface_potential)
                         .epsilon(1e-15));
}

TEST_CASE("norm suite: names, zeros, analytic values") {
  auto cfg = desk_cfg();
  cfg.grid = Grid(32, 33);
  const auto& names = norm_names();
  REQUIRE(names.size() == 14);

  State z = bare_state(cfg.grid, InteriorField(cfg.grid, 0.0));
  auto suite = norm_suite(cfg, z);
  REQUIRE(suite.size() == names.size());
  for (size_t k = 0; k < suite.size(); ++k) {
    CHECK(suite[k].first == names[k]);
    CHECK(suite[k].second == 0.0);
  }

  // u = cos(2 pi x): mean-free, so the V-norm (gradient energy + mean^2)
  // is |grad u| = sqrt(2) pi, matched to O(h^2) on a 32-point mesh
  State m = bare_state(cfg.grid, mode_field(cfg.grid, 1.0, 1, 0));
  auto sm = norm_suite(cfg, m);
  double analytic_v = std::sqrt(2.0 * kPi * kPi);
  for (const auto& [name, value] : sm) {
    if (name == "u_v") CHECK(value == doctest::Approx(analytic_v).epsilon(0.01));
    if (name == "u_h") CHECK(value == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
    if (name == "v_hg")
      CHECK(value == doctest::Approx(1.0).epsilon(1e-12));  // two unit circles, |cos|^2 each 1/2
  }

  // quadratic-in-y field: the one-sided Laplacian is exact, |Lap u| = 6
  InteriorField q(cfg.grid);
  for (int j = 0; j < cfg.grid.ny; ++j)
    for (int i = 0; i < cfg.grid.nx; ++i) {
      double y = cfg.grid.y(j);
      q.at(i, j) = 3.0 * y * y - y + 2.0;
    }
  auto sq = norm_suite(cfg, bare_state(cfg.grid, q));
  for (const auto& [name, value] : sq)
    if (name == "lap_u_h") CHECK(value == doctest::Approx(6.0).epsilon(1e-11));
}

TEST_CASE("second estimate probe: frozen constants and certificate") {
  auto cfg = desk_cfg();  // beta = beta_g = poly(3,1), lambda = 0.1
  State s = make_initial_state(cfg, mode_field(cfg.grid, 2.0, 1, 1, 0.0));

  auto p = second_estimate_probe(cfg, s, 0.3);
  // unbounded boundary domain: delta caps at 1; companion constant frozen
  // from the oracle construction max(|beta_l(1.3)|, |beta_l(-0.7)|) * 1.3
  CHECK(p.k0_prime == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(p.k0_double_prime == doctest::Approx(1.9694362061835131).epsilon(1e-12));
  CHECK(p.holds);
  CHECK(p.pairing >= p.certificate - 1e-10);

  // symmetric large-amplitude state at its own mean: certificate positive
  auto p0 = second_estimate_probe(cfg, s, mean(s.u));
  CHECK(p0.holds);
  CHECK(p0.certificate > 0.0);
  CHECK(std::isfinite(p0.mu_mean_abs));
}

TEST_CASE("second estimate probe: zero graph and domain guard") {
  auto cfg = desk_cfg();
  cfg.beta = MonotoneGraph::zero();
  State s = make_initial_state(cfg, mode_field(cfg.grid, 0.4, 1, 1, 0.1));
  auto p = second_estimate_probe(cfg, s, mean(s.u));
  CHECK(p.k0_double_prime == 0.0);
  CHECK(p.certificate == 0.0);  // xi identically zero
  CHECK(p.holds);
  CHECK(std::isfinite(p.mu_mean_abs));

  // logarithmic boundary well: probe works strictly inside (-1,1) only
  cfg = desk_cfg();
  cfg.beta_g = MonotoneGraph::logarithmic(1.0);
  State s2 = make_initial_state(cfg, mode_field(cfg.grid, 0.2, 1, 1, 0.0));
  CHECK_NOTHROW(second_estimate_probe(cfg, s2, 0.0));
  CHECK_THROWS_AS(second_estimate_probe(cfg, s2, 1.0), DomainError);
  CHECK_THROWS_AS(second_estimate_probe(cfg, s2, 1.5), DomainError);
}

TEST_CASE("stability pair: identical trajectories give zero records") {
  auto cfg = desk_cfg();
  cfg.t_final = 4 * cfg.tau;
  auto a = collect_run(cfg, mode_field(cfg.grid, 0.3, 1, 1, 0.1));
  auto rec = stability_pair(cfg, a, a);
  REQUIRE(rec.size() == a.size());
  for (const auto& r : rec) {
    CHECK(r.grad_diff == 0.0);
    CHECK(r.bnd_grad_diff == 0.0);
    CHECK(r.rate_diff == 0.0);
    CHECK(r.mu_grad_diff == 0.0);
    CHECK(r.mean_diff == 0.0);
  }
  auto fit = fit_gronwall(rec);
  CHECK(fit.holds);
  CHECK(fit.K == 0.0);
}

TEST_CASE("stability pair: linear regime scales quadratically in delta") {
  auto cfg = desk_cfg();
  cfg.t_final = 5 * cfg.tau;
  cfg.beta = MonotoneGraph::zero();
  cfg.beta_g = MonotoneGraph::zero();  // linear evolution
  InteriorField base = mode_field(cfg.grid, 0.2, 1, 1, 0.1);
  double delta = 0.01;
  auto a = collect_run(cfg, base);
  auto b = collect_run(cfg, base + mode_field(cfg.grid, delta, 1, 0));
  auto c = collect_run(cfg, base + mode_field(cfg.grid, 0.5 * delta, 1, 0));
  auto rab = stability_pair(cfg, a, b);
  auto rac = stability_pair(cfg, a, c);
  for (size_t k = 0; k < rab.size(); ++k) {
    CHECK(rab[k].grad_diff >= 0.0);
    CHECK(rab[k].mu_grad_diff >= 0.0);
    if (k > 0) {
      // halving delta quarters the quadratic functionals (superposition)
      CHECK(rab[k].grad_diff == doctest::Approx(4.0 * rac[k].grad_diff).epsilon(1e-6));
      CHECK(rab[k].rate_diff == doctest::Approx(4.0 * rac[k].rate_diff).epsilon(1e-6));
      // accumulated integrals never decrease
      CHECK(rab[k].rate_diff >= rab[k - 1].rate_diff);
      CHECK(rab[k].mu_grad_diff >= rab[k - 1].mu_grad_diff);
    }
    // the x-mode perturbation is mean-free and stays so
    CHECK(std::abs(rab[k].mean_diff) <= 1e-12);
  }
  auto fit = fit_gronwall(rab);
  CHECK(fit.holds);
  CHECK(std::isfinite(fit.K));
  CHECK(std::isfinite(fit.L));
  double v0 = rab.front().grad_diff + rab.front().bnd_grad_diff;
  for (const auto& r : rab)
    CHECK(r.grad_diff + r.bnd_grad_diff <= fit.K * v0 * std::exp(fit.L * r.t) * (1.0 + 1e-9));
  MESSAGE("gronwall fit: K=", fit.K, " L=", fit.L);
}

TEST_CASE("stability pair: shape guards") {
  auto cfg = desk_cfg();
  cfg.t_final = 2 * cfg.tau;
  auto a = collect_run(cfg, mode_field(cfg.grid, 0.2, 1, 1, 0.0));
  auto b = a;
  b.pop_back();
  CHECK_THROWS_AS(stability_pair(cfg, a, b), ConfigError);
  CHECK_THROWS_AS(stability_pair(cfg, a, std::vector<State>{}), ConfigError);
  // same length, different grid
  auto cfg2 = cfg;
  cfg2.grid = Grid(8, 9);
  auto c = collect_run(cfg2, mode_field(cfg2.grid, 0.2, 1, 1, 0.0));
  CHECK_THROWS_AS(stability_pair(cfg, a, c), ConfigError);
}

TEST_CASE("gronwall fit edge cases") {
  CHECK_FALSE(fit_gronwall({}).holds);
  // zero start but positive later: no multiple of zero bounds it
  std::vector<StabilityRecord> recs(3);
  recs[0].t = 0.0;
  recs[1].t = 0.1;
  recs[1].grad_diff = 1e-3;
  recs[2].t = 0.2;
  recs[2].grad_diff = 2e-3;
  CHECK_FALSE(fit_gronwall(recs).holds);
  // positive decaying sequence: fitted L negative, bound holds
  recs[0].grad_diff = 4e-3;
  auto fit = fit_gronwall(recs);
  CHECK(fit.holds);
  CHECK(fit.L < 0.0);
  CHECK(fit.K >= 1.0);
}

TEST_CASE("estimate accumulator tracks suprema and the mu integral") {
  auto cfg = desk_cfg();
  cfg.t_final = 5 * cfg.tau;
  auto traj = collect_run(cfg, mode_field(cfg.grid, 0.4, 1, 1, 0.1));
  EstimateAccumulator acc;
  double sup_grad = 0.0, mu_int = 0.0;
  for (size_t k = 0; k < traj.size(); ++k) {
    acc.absorb(cfg, traj[k]);
    sup_grad = std::max(sup_grad, std::sqrt(gradient_inner(traj[k].u, traj[k].u)));
    if (k > 0) mu_int += cfg.tau * gradient_inner(traj[k].mu, traj[k].mu);
  }
  auto suite = acc.result();
  CHECK(suite.sup_grad_u == doctest::Approx(sup_grad).epsilon(1e-14));
  CHECK(suite.l2_grad_mu == doctest::Approx(std::sqrt(mu_int)).epsilon(1e-14));
  CHECK(suite.sup_sqrt_eps_v > 0.0);
  CHECK(suite.sup_potential > 0.0);
}

TEST_CASE("cross bound probe certifies dominated pairs and flags growth") {
  // identical cubic wells: |y|/(|y|+1) < 1 and saturates -> certified
  auto p = cross_bound_probe(MonotoneGraph::polynomial(3, 1.0), MonotoneGraph::polynomial(3, 1.0),
                             0.1, 1.0);
  CHECK(p.certified);
  CHECK(p.constant < 1.0);
  CHECK(p.lo == -8.0);
  CHECK(p.hi == 8.0);

  // zero bulk graph is dominated by anything
  auto pz = cross_bound_probe(MonotoneGraph::zero(), MonotoneGraph::linear(1.0), 0.1, 1.0);
  CHECK(pz.certified);
  CHECK(pz.constant == 0.0);

  // quintic bulk over linear boundary: constant keeps growing with the
  // probe radius, so the probe declines to certify
  auto pg = cross_bound_probe(MonotoneGraph::polynomial(5, 1.0), MonotoneGraph::linear(1.0),
                              0.1, 1.0);
  CHECK_FALSE(pg.certified);
  CHECK(pg.constant > 1.0);
}

TEST_CASE("diagnostics CSV layout") {
  std::stringstream hs;
  write_diagnostics_header(hs);
  CHECK(hs.str() ==
        "t,mass,mass_residual,energy,dissipation,source_work,energy_residual,mu_mean,"
        "u_h,u_v,lap_u_h,w_h,xi_h,eta_h,mu_v,grad_mu,v_hg,v_vg,sqrt_eps_grad_v,"
        "xi_g_hg,eta_g_hg,w_g_hg\n");

  auto cfg = desk_cfg();
  State s0 = make_initial_state(cfg, mode_field(cfg.grid, 0.3, 1, 1, 0.1));
  State s1 = step(cfg, s0);
  auto r = record(cfg, s0, s1);
  std::stringstream rs;
  write_diagnostics_row(r, rs);
  std::string row = rs.str();
  CHECK(row.back() == '\n');
  int commas = 0;
  for (char ch : row) commas += (ch == ',');
  CHECK(commas == 21);  // 8 record fields + 14 norms
  // first column round-trips the time value
  CHECK(std::stod(row.substr(0, row.find(','))) == doctest::Approx(r.t).epsilon(1e-15));
}
