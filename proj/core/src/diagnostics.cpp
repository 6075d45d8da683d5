#include "chdbc/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "detail_format.hpp"

namespace chdbc {

namespace {

double bulk_envelope_integral(const ProblemConfig& cfg, const InteriorField& u) {
  const Grid& g = u.grid();
  InteriorField env(g);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      env.at(i, j) = moreau_envelope(cfg.beta, cfg.lambda, u.at(i, j));
  return mean(env);  // |domain| = 1
}

double boundary_envelope_integral(const ProblemConfig& cfg, const BoundaryField& v) {
  const Grid& g = v.grid();
  BoundaryField env(g);
  for (int i = 0; i < g.nx; ++i) {
    env.bottom()[i] = moreau_envelope(cfg.beta_g, cfg.beta_g_param(), v.bottom()[i]);
    env.top()[i] = moreau_envelope(cfg.beta_g, cfg.beta_g_param(), v.top()[i]);
  }
  return boundary_integral(env);
}

}  // namespace

EnergyBreakdown state_energy(const ProblemConfig& cfg, const State& s) {
  EnergyBreakdown e;
  e.gradient = 0.5 * gradient_inner(s.u, s.u);
  e.l2 = 0.5 * cfg.lambda * inner(s.u, s.u);
  e.surface_gradient = 0.5 * cfg.epsilon * boundary_gradient_inner(s.v, s.v);
  e.potential = bulk_envelope_integral(cfg, s.u);
  e.surface_potential = boundary_envelope_integral(cfg, s.v);
  return e;
}

double state_dissipation(const ProblemConfig& cfg, const State& s) {
  const double l = cfg.lambda;
  return l * inner(s.mu, s.mu) + gradient_inner(s.mu, s.mu) + l * inner(s.w, s.w) +
         inner(s.eta, s.w) + l * boundary_inner(s.w_g, s.w_g) +
         boundary_inner(s.eta_g, s.w_g);
}

double state_source_work(const ProblemConfig& cfg, const State& next) {
  const Grid& g = next.u.grid();
  InteriorField gsrc = bulk_source_field(cfg, next.t);
  BoundaryField ggsrc = boundary_source_field(cfg, next.t);
  InteriorField fb(g);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      fb.at(i, j) = gsrc.at(i, j) - truncate(cfg.lambda, cfg.pi.eval(next.u.at(i, j)));
  BoundaryField fg(g);
  for (int i = 0; i < g.nx; ++i) {
    fg.bottom()[i] =
        ggsrc.bottom()[i] - truncate(cfg.lambda, cfg.pi_g.eval(next.v.bottom()[i]));
    fg.top()[i] = ggsrc.top()[i] - truncate(cfg.lambda, cfg.pi_g.eval(next.v.top()[i]));
  }
  return inner(fb, next.w) + boundary_inner(fg, next.w_g);
}

const std::vector<std::string>& norm_names() {
  static const std::vector<std::string> names = {
      "u_h",  "u_v",  "lap_u_h", "w_h",  "xi_h",            "eta_h",   "mu_v",
      "grad_mu", "v_hg", "v_vg",    "sqrt_eps_grad_v", "xi_g_hg", "eta_g_hg", "w_g_hg"};
  return names;
}

std::vector<std::pair<std::string, double>> norm_suite(const ProblemConfig& cfg, const State& s) {
  std::vector<std::pair<std::string, double>> out;
  out.reserve(norm_names().size());
  out.emplace_back("u_h", norm_h(s.u));
  out.emplace_back("u_v", v_norm(s.u));
  out.emplace_back("lap_u_h", norm_h(laplacian_onesided(s.u)));
  out.emplace_back("w_h", norm_h(s.w));
  out.emplace_back("xi_h", norm_h(s.xi));
  out.emplace_back("eta_h", norm_h(s.eta));
  out.emplace_back("mu_v", v_norm(s.mu));
  out.emplace_back("grad_mu", std::sqrt(gradient_inner(s.mu, s.mu)));
  out.emplace_back("v_hg", boundary_norm(s.v));
  out.emplace_back("v_vg", v_gamma_norm(s.v));
  out.emplace_back("sqrt_eps_grad_v",
                   std::sqrt(cfg.epsilon * boundary_gradient_inner(s.v, s.v)));
  out.emplace_back("xi_g_hg", boundary_norm(s.xi_g));
  out.emplace_back("eta_g_hg", boundary_norm(s.eta_g));
  out.emplace_back("w_g_hg", boundary_norm(s.w_g));
  return out;
}

DiagnosticsRecord record(const ProblemConfig& cfg, const State& prev, const State& next) {
  DiagnosticsRecord r;
  r.t = next.t;
  r.mass = mean(next.u);
  r.mass_residual = mean(next.u) - mean(prev.u) + cfg.tau * cfg.lambda * mean(next.mu);
  r.energy = state_energy(cfg, next).total();
  r.dissipation = state_dissipation(cfg, next);
  r.source_work = state_source_work(cfg, next);
  r.energy_residual = r.energy - state_energy(cfg, prev).total() +
                      cfg.tau * (r.dissipation - r.source_work);
  r.mu_mean = mean(next.mu);
  r.norms = norm_suite(cfg, next);
  return r;
}

DiagnosticsRecord initial_record(const ProblemConfig& cfg, const State& s0) {
  DiagnosticsRecord r;
  r.t = s0.t;
  r.mass = mean(s0.u);
  r.mass_residual = 0.0;
  r.energy = state_energy(cfg, s0).total();
  r.dissipation = state_dissipation(cfg, s0);
  r.source_work = state_source_work(cfg, s0);
  r.energy_residual = 0.0;
  r.mu_mean = mean(s0.mu);
  r.norms = norm_suite(cfg, s0);
  return r;
}

void write_diagnostics_header(std::ostream& out) {
  out << "t,mass,mass_residual,energy,dissipation,source_work,energy_residual,mu_mean";
  for (const auto& n : norm_names()) out << ',' << n;
  out << '\n';
}

void write_diagnostics_row(const DiagnosticsRecord& r, std::ostream& out) {
  out << detail::g17(r.t) << ',' << detail::g17(r.mass) << ',' << detail::g17(r.mass_residual)
      << ',' << detail::g17(r.energy) << ',' << detail::g17(r.dissipation) << ','
      << detail::g17(r.source_work) << ',' << detail::g17(r.energy_residual) << ','
      << detail::g17(r.mu_mean);
  for (const auto& [name, value] : r.norms) out << ',' << detail::g17(value);
  out << '\n';
}

SecondEstimateProbe second_estimate_probe(const ProblemConfig& cfg, const State& s,
                                          double u0_mean) {
  const MonotoneGraph& bg = cfg.beta_g;
  if (!(u0_mean > bg.domain_lo() && u0_mean < bg.domain_hi()))
    throw DomainError("second_estimate_probe: initial mean " + detail::g17(u0_mean) +
                      " is not interior to the boundary potential domain [" +
                      detail::g17(bg.domain_lo()) + ", " + detail::g17(bg.domain_hi()) + "]");

  // Half the distance to the nearest domain edge, capped so the companion
  // constant stays moderate on unbounded domains.
  double dl = std::isinf(bg.domain_lo()) ? 2.0 : u0_mean - bg.domain_lo();
  double dh = std::isinf(bg.domain_hi()) ? 2.0 : bg.domain_hi() - u0_mean;
  double delta = 0.5 * std::min(dl, dh);

  SecondEstimateProbe p;
  p.k0_prime = delta;
  double yl = std::abs(yosida(cfg.beta, cfg.lambda, u0_mean - delta));
  double yh = std::abs(yosida(cfg.beta, cfg.lambda, u0_mean + delta));
  p.k0_double_prime = std::max(yl, yh) * (std::abs(u0_mean) + delta);

  // Scalar re-verification on a probe grid around the mean.
  bool scalar_ok = true;
  for (int k = 0; k <= 200; ++k) {
    double r = u0_mean - 3.0 + 6.0 * k / 200.0;
    double y = yosida(cfg.beta, cfg.lambda, r);
    if (y * (r - u0_mean) < p.k0_prime * std::abs(y) - p.k0_double_prime - 1e-12) {
      scalar_ok = false;
      break;
    }
  }

  const Grid& g = s.u.grid();
  InteriorField abs_xi(g), shifted(g);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      abs_xi.at(i, j) = std::abs(s.xi.at(i, j));
      shifted.at(i, j) = s.u.at(i, j) - u0_mean;
    }
  p.pairing = inner(s.xi, shifted);
  p.certificate = p.k0_prime * mean(abs_xi) - p.k0_double_prime;
  p.mu_mean_abs = std::abs(mean(s.mu));
  p.holds = scalar_ok &&
            p.pairing >= p.certificate - 1e-10 * std::max(1.0, std::abs(p.certificate));
  return p;
}

std::vector<StabilityRecord> stability_pair(const ProblemConfig& cfg,
                                            const std::vector<State>& a,
                                            const std::vector<State>& b) {
  if (a.size() != b.size() || a.empty())
    throw ConfigError("stability_pair: trajectories have different lengths");
  std::vector<StabilityRecord> out;
  out.reserve(a.size());
  double rate_acc = 0.0, mu_acc = 0.0;
  for (size_t k = 0; k < a.size(); ++k) {
    if (!(a[k].u.grid() == b[k].u.grid()) || std::abs(a[k].t - b[k].t) > 1e-12)
      throw ConfigError("stability_pair: trajectories disagree on grid or times");
    InteriorField du = a[k].u - b[k].u;
    BoundaryField dv = a[k].v - b[k].v;
    if (k > 0) {
      BoundaryField dwg = a[k].w_g - b[k].w_g;
      InteriorField dmu = a[k].mu - b[k].mu;
      rate_acc += cfg.tau * boundary_inner(dwg, dwg);
      mu_acc += cfg.tau * gradient_inner(dmu, dmu);
    }
    StabilityRecord r;
    r.t = a[k].t;
    r.grad_diff = gradient_inner(du, du);
    r.bnd_grad_diff = cfg.epsilon * boundary_gradient_inner(dv, dv);
    r.rate_diff = rate_acc;
    r.mu_grad_diff = mu_acc;
    r.mean_diff = mean(du);
    out.push_back(r);
  }
  return out;
}

StabilityFit fit_gronwall(const std::vector<StabilityRecord>& records) {
  StabilityFit fit;
  if (records.empty()) return fit;
  auto value = [](const StabilityRecord& r) { return r.grad_diff + r.bnd_grad_diff; };
  double y0 = value(records.front());
  bool any_positive = false;
  for (const auto& r : records) any_positive = any_positive || value(r) > 0.0;
  if (!any_positive) {
    fit.holds = true;  // identically zero difference
    return fit;
  }
  if (y0 <= 0.0) return fit;  // cannot be bounded by a multiple of zero

  // Least-squares slope of ln(y) against t over the positive records.
  double st = 0, sy = 0, stt = 0, sty = 0;
  int n = 0;
  for (const auto& r : records) {
    double y = value(r);
    if (y <= 0.0) continue;
    double ly = std::log(y);
    st += r.t;
    sy += ly;
    stt += r.t * r.t;
    sty += r.t * ly;
    ++n;
  }
  double denom = n * stt - st * st;
  fit.L = (n >= 2 && denom > 0.0) ? (n * sty - st * sy) / denom : 0.0;
  double K = 0.0;
  for (const auto& r : records) K = std::max(K, value(r) / (y0 * std::exp(fit.L * r.t)));
  fit.K = K;
  fit.holds = std::isfinite(fit.K) && std::isfinite(fit.L);
  return fit;
}

void EstimateAccumulator::absorb(const ProblemConfig& cfg, const State& s) {
  suite_.sup_grad_u = std::max(suite_.sup_grad_u, std::sqrt(gradient_inner(s.u, s.u)));
  suite_.sup_sqrt_eps_v =
      std::max(suite_.sup_sqrt_eps_v, std::sqrt(cfg.epsilon) * v_gamma_norm(s.v));
  double pot = bulk_envelope_integral(cfg, s.u) + boundary_envelope_integral(cfg, s.v);
  suite_.sup_potential = std::max(suite_.sup_potential, pot);
  if (!first_) suite_.l2_grad_mu += cfg.tau * gradient_inner(s.mu, s.mu);  // running sum
  first_ = false;
}

EstimateSuite EstimateAccumulator::result() const {
  EstimateSuite s = suite_;
  s.l2_grad_mu = std::sqrt(s.l2_grad_mu);
  return s;
}

CrossBoundProbe cross_bound_probe(const MonotoneGraph& beta, const MonotoneGraph& beta_g,
                                  double lambda, double c_dom, int samples) {
  auto sweep = [&](double radius, int n) {
    double c = 0.0;
    for (int k = 0; k <= n; ++k) {
      double r = -radius + 2.0 * radius * k / n;
      double num = std::abs(yosida(beta, lambda, r));
      double den = std::abs(yosida(beta_g, c_dom * lambda, r)) + 1.0;
      c = std::max(c, num / den);
    }
    return c;
  };
  CrossBoundProbe p;
  double c_inner = sweep(4.0, samples);
  double c_outer = sweep(8.0, 4 * samples);
  p.constant = c_outer;
  p.certified = c_outer <= 1.25 * std::max(c_inner, 1e-300);
  if (c_outer == 0.0) p.certified = true;  // zero bulk graph
  p.lo = -8.0;
  p.hi = 8.0;
  return p;
}

}  // namespace chdbc
