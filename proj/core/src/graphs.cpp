#include "chdbc/graphs.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "detail_format.hpp"

namespace chdbc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double clamp(double r, double lo, double hi) { return std::min(std::max(r, lo), hi); }

// |r|^d * sign(r) for odd d without pow() in the hot path.
double odd_pow(double r, int d) {
  double p = r;
  for (int k = 1; k < d; ++k) p *= r;
  return p;
}

}  // namespace

// ---------------------------------------------------------------------------
// construction / parsing
// ---------------------------------------------------------------------------

MonotoneGraph MonotoneGraph::linear(double slope) {
  if (!(slope > 0.0)) throw ConfigError("linear graph needs slope > 0");
  return MonotoneGraph(GraphKind::Linear, slope, 1, -kInf, kInf);
}

MonotoneGraph MonotoneGraph::sign() {
  return MonotoneGraph(GraphKind::Sign, 1.0, 1, -kInf, kInf);
}

MonotoneGraph MonotoneGraph::positive_part() {
  return MonotoneGraph(GraphKind::PositivePart, 1.0, 1, -kInf, kInf);
}

MonotoneGraph MonotoneGraph::polynomial(int degree, double coeff) {
  if (degree < 1 || degree % 2 == 0) throw ConfigError("polynomial graph needs odd degree >= 1");
  if (!(coeff > 0.0)) throw ConfigError("polynomial graph needs coefficient > 0");
  return MonotoneGraph(GraphKind::Polynomial, coeff, degree, -kInf, kInf);
}

MonotoneGraph MonotoneGraph::logarithmic(double well) {
  if (!(well > 0.0)) throw ConfigError("logarithmic graph needs well parameter > 0");
  return MonotoneGraph(GraphKind::Logarithmic, well, 1, -1.0, 1.0);
}

MonotoneGraph MonotoneGraph::zero() {
  return MonotoneGraph(GraphKind::Zero, 0.0, 1, -kInf, kInf);
}

MonotoneGraph MonotoneGraph::parse(const std::string& text) {
  std::istringstream in(text);
  std::string kind;
  in >> kind;
  auto need = [&](const char* what) {
    double v;
    if (!(in >> v)) throw ConfigError("graph '" + text + "': missing " + what);
    return v;
  };
  MonotoneGraph g = MonotoneGraph::zero();
  if (kind == "linear") {
    g = linear(need("slope"));
  } else if (kind == "sign") {
    g = sign();
  } else if (kind == "pos") {
    g = positive_part();
  } else if (kind == "poly") {
    double d = need("degree");
    double c = need("coefficient");
    if (d != std::floor(d)) throw ConfigError("graph '" + text + "': degree must be an integer");
    g = polynomial(static_cast<int>(d), c);
  } else if (kind == "log") {
    g = logarithmic(need("well parameter"));
  } else if (kind == "zero") {
    g = zero();
  } else {
    throw ConfigError("unknown graph kind '" + kind + "' (expected linear|sign|pos|poly|log|zero)");
  }
  std::string rest;
  if (in >> rest) throw ConfigError("graph '" + text + "': trailing token '" + rest + "'");
  return g;
}

std::string MonotoneGraph::to_string() const {
  switch (kind_) {
    case GraphKind::Linear:
      return "linear " + detail::g17(a_);
    case GraphKind::Sign:
      return "sign";
    case GraphKind::PositivePart:
      return "pos";
    case GraphKind::Polynomial:
      return "poly " + std::to_string(d_) + " " + detail::g17(a_);
    case GraphKind::Logarithmic:
      return "log " + detail::g17(a_);
    case GraphKind::Zero:
      return "zero";
  }
  return "?";
}

bool MonotoneGraph::in_domain(double r) const { return r > lo_ && r < hi_; }

bool MonotoneGraph::domain_is_real_line() const { return lo_ == -kInf && hi_ == kInf; }

// ---------------------------------------------------------------------------
// pointwise evaluation
// ---------------------------------------------------------------------------

double MonotoneGraph::potential(double r) const {
  switch (kind_) {
    case GraphKind::Linear:
      return 0.5 * a_ * r * r;
    case GraphKind::Sign:
      return std::abs(r);
    case GraphKind::PositivePart: {
      double p = std::max(r, 0.0);
      return 0.5 * p * p;
    }
    case GraphKind::Polynomial:
      return a_ * odd_pow(r, d_) * r / (d_ + 1);
    case GraphKind::Logarithmic: {
      if (r < -1.0 || r > 1.0)
        throw DomainError("logarithmic potential evaluated outside [-1,1] at r=" + detail::g17(r));
      auto xlogx = [](double x) { return x > 0.0 ? x * std::log(x) : 0.0; };
      return a_ * (xlogx(1.0 + r) + xlogx(1.0 - r));
    }
    case GraphKind::Zero:
      return 0.0;
  }
  return 0.0;
}

double MonotoneGraph::minimal_section(double r) const {
  switch (kind_) {
    case GraphKind::Linear:
      return a_ * r;
    case GraphKind::Sign:
      return r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
    case GraphKind::PositivePart:
      return std::max(r, 0.0);
    case GraphKind::Polynomial:
      return a_ * odd_pow(r, d_);
    case GraphKind::Logarithmic:
      if (!in_domain(r))
        throw DomainError("logarithmic graph evaluated outside (-1,1) at r=" + detail::g17(r));
      return a_ * (std::log1p(r) - std::log1p(-r));
    case GraphKind::Zero:
      return 0.0;
  }
  return 0.0;
}

double MonotoneGraph::value(double r) const { return minimal_section(r); }

double MonotoneGraph::derivative(double r) const {
  switch (kind_) {
    case GraphKind::Linear:
      return a_;
    case GraphKind::Sign:
      return 0.0;
    case GraphKind::PositivePart:
      return r >= 0.0 ? 1.0 : 0.0;
    case GraphKind::Polynomial: {
      if (d_ == 1) return a_;
      double p = r;
      for (int k = 2; k < d_; ++k) p *= r;
      return a_ * d_ * p;  // c * d * r^{d-1}
    }
    case GraphKind::Logarithmic:
      if (!in_domain(r))
        throw DomainError("logarithmic graph evaluated outside (-1,1) at r=" + detail::g17(r));
      return 2.0 * a_ / ((1.0 - r) * (1.0 + r));
    case GraphKind::Zero:
      return 0.0;
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// resolvent / Yosida / Moreau
// ---------------------------------------------------------------------------

namespace {

// Safeguarded Newton for s + lambda*c*s^d = r.  The root is bracketed by
// [0, r] (or [r, 0]); Newton steps leaving the bracket fall back to bisection.
double resolvent_polynomial(double lambda, double c, int d, double r) {
  if (r == 0.0) return 0.0;
  double lo = std::min(r, 0.0), hi = std::max(r, 0.0);
  double s = r / (1.0 + lambda * c);
  const double tol = 1e-12 * std::max(1.0, std::abs(r));
  for (int it = 0; it < 200; ++it) {
    double f = s + lambda * c * odd_pow(s, d) - r;
    double df = 1.0 + lambda * c * d * (d == 1 ? 1.0 : std::abs(odd_pow(s, d - 1)));
    if (std::abs(f) <= tol) {
      // one Newton polish, kept only if it actually improves the defect
      double sp = s - f / df;
      double fp = sp + lambda * c * odd_pow(sp, d) - r;
      return std::abs(fp) < std::abs(f) ? sp : s;
    }
    if (f > 0.0)
      hi = s;
    else
      lo = s;
    double s_newton = s - f / df;
    s = (s_newton > lo && s_newton < hi) ? s_newton : 0.5 * (lo + hi);
  }
  return s;
}

// Logarithmic kind, solved in the artanh variable: with s = tanh(t) the
// equation s + lambda*c*ln((1+s)/(1-s)) = r becomes
//   phi(t) = tanh(t) + 2*lambda*c*t - r = 0,
// strictly increasing with phi' >= 2*lambda*c, and the graph value at the
// root stays finite even when tanh(t) rounds to +-1.
double resolvent_logarithmic(double lambda, double c, double r) {
  if (r == 0.0) return 0.0;
  const double k = 2.0 * lambda * c;
  double t = r / (1.0 + k);
  double lo = std::min(0.0, r / k), hi = std::max(0.0, r / k);  // phi(r/k) has the sign of r
  const double tol = 1e-12 * std::max(1.0, std::abs(r));
  for (int it = 0; it < 200; ++it) {
    double th = std::tanh(t);
    double phi = th + k * t - r;
    double dphi = (1.0 - th * th) + k;
    if (std::abs(phi) <= tol) {
      // one Newton polish, kept only if it actually improves the defect
      double tp = t - phi / dphi;
      double php = std::tanh(tp) + k * tp - r;
      return std::abs(php) < std::abs(phi) ? std::tanh(tp) : th;
    }
    if (phi > 0.0)
      hi = t;
    else
      lo = t;
    double t_newton = t - phi / dphi;
    t = (t_newton > lo && t_newton < hi) ? t_newton : 0.5 * (lo + hi);
  }
  return std::tanh(t);
}

}  // namespace

double resolvent(const MonotoneGraph& g, double lambda, double r) {
  if (!(lambda > 0.0)) throw ConfigError("resolvent needs lambda > 0");
  switch (g.kind()) {
    case GraphKind::Linear:
      return r / (1.0 + lambda * g.slope());
    case GraphKind::Sign:
      if (r > lambda) return r - lambda;
      if (r < -lambda) return r + lambda;
      return 0.0;
    case GraphKind::PositivePart:
      return r >= 0.0 ? r / (1.0 + lambda) : r;
    case GraphKind::Polynomial:
      return resolvent_polynomial(lambda, g.coeff(), g.degree(), r);
    case GraphKind::Logarithmic:
      return resolvent_logarithmic(lambda, g.coeff(), r);
    case GraphKind::Zero:
      return r;
  }
  return r;
}

double yosida(const MonotoneGraph& g, double lambda, double r) {
  if (!(lambda > 0.0)) throw ConfigError("yosida needs lambda > 0");
  switch (g.kind()) {
    case GraphKind::Linear:
      return g.slope() * r / (1.0 + lambda * g.slope());
    case GraphKind::Sign:
      return clamp(r / lambda, -1.0, 1.0);
    case GraphKind::PositivePart:
      return std::max(r, 0.0) / (1.0 + lambda);
    case GraphKind::Zero:
      return 0.0;
    default:
      return (r - resolvent(g, lambda, r)) / lambda;
  }
}

double yosida_derivative(const MonotoneGraph& g, double lambda, double r) {
  switch (g.kind()) {
    case GraphKind::Linear:
      return g.slope() / (1.0 + lambda * g.slope());
    case GraphKind::Sign:
      return std::abs(r) < lambda ? 1.0 / lambda : 0.0;
    case GraphKind::PositivePart:
      return r >= 0.0 ? 1.0 / (1.0 + lambda) : 0.0;
    case GraphKind::Zero:
      return 0.0;
    case GraphKind::Polynomial:
    case GraphKind::Logarithmic: {
      // h'(J) / (1 + lambda h'(J)), written to stay finite as h'(J) -> inf.
      double j = resolvent(g, lambda, r);
      if (g.kind() == GraphKind::Polynomial) {
        double hp = g.derivative(j);
        return hp / (1.0 + lambda * hp);
      }
      double one_minus_j2 = std::max((1.0 - j) * (1.0 + j), 0.0);
      return 2.0 * g.coeff() / (one_minus_j2 + 2.0 * lambda * g.coeff());
    }
  }
  return 0.0;
}

double moreau_envelope(const MonotoneGraph& g, double lambda, double r) {
  double j = resolvent(g, lambda, r);
  double y = yosida(g, lambda, r);
  return g.potential(j) + 0.5 * lambda * y * y;
}

double truncate(double lambda, double r) {
  if (!(lambda > 0.0)) throw ConfigError("truncate needs lambda > 0");
  return clamp(r, -1.0 / lambda, 1.0 / lambda);
}

// ---------------------------------------------------------------------------
// assumption certification
// ---------------------------------------------------------------------------

namespace {

void require_probes_in_domain(const MonotoneGraph& g, const std::vector<double>& probes,
                              const char* name) {
  for (double s : probes)
    if (!g.in_domain(s))
      throw DomainError(std::string("assumption probe ") + detail::g17(s) +
                        " outside the domain of graph '" + name + "'");
}

// r*s >= c1*s^2 - c2 on the graph's domain, constants by kind.
CoercivityCheck coercivity_constants(const MonotoneGraph& g) {
  CoercivityCheck c;
  switch (g.kind()) {
    case GraphKind::Linear:
      c = {true, g.slope(), 0.0};
      break;
    case GraphKind::Polynomial:
      // c*s^{d+1} >= c*s^2 - c  (split |s| <= 1 / |s| > 1)
      c = (g.degree() == 1) ? CoercivityCheck{true, g.coeff(), 0.0}
                            : CoercivityCheck{true, g.coeff(), g.coeff()};
      break;
    case GraphKind::Logarithmic:
      // r*s >= 0 on (-1,1), where s^2 < 1.
      c = {true, 1.0, 1.0};
      break;
    case GraphKind::Sign:
    case GraphKind::PositivePart:
    case GraphKind::Zero:
      c = {false, 0.0, 0.0};
      break;
  }
  return c;
}

// Growth bound |h^0(s)| <= L (1+|s|) on all of R; needs full domain.
GrowthCheck growth_constant(const MonotoneGraph& g) {
  switch (g.kind()) {
    case GraphKind::Linear:
      return {true, g.slope()};
    case GraphKind::Sign:
    case GraphKind::PositivePart:
      return {true, 1.0};
    case GraphKind::Polynomial:
      return g.degree() == 1 ? GrowthCheck{true, g.coeff()} : GrowthCheck{false, 0.0};
    case GraphKind::Logarithmic:
      return {false, 0.0};  // domain is not all of R and the section diverges
    case GraphKind::Zero:
      return {true, 0.0};
  }
  return {false, 0.0};
}

// Polynomial-scale growth rank used to decide |beta^0| <= c(1+|beta_g^0|)
// at infinity when the boundary domain is the whole line.
double growth_rank(const MonotoneGraph& g) {
  switch (g.kind()) {
    case GraphKind::Zero:
    case GraphKind::Sign:
      return 0.0;
    case GraphKind::Linear:
    case GraphKind::PositivePart:
      return 1.0;
    case GraphKind::Polynomial:
      return g.degree();
    case GraphKind::Logarithmic:
      return std::numeric_limits<double>::infinity();
  }
  return 0.0;
}

}  // namespace

GraphAssumptionReport check_assumptions(const MonotoneGraph& alpha, const MonotoneGraph& alpha_g,
                                        const MonotoneGraph& beta, const MonotoneGraph& beta_g,
                                        const std::vector<double>& probes) {
  if (probes.empty()) throw ConfigError("check_assumptions needs a nonempty probe set");
  require_probes_in_domain(alpha, probes, "alpha");
  require_probes_in_domain(alpha_g, probes, "alpha_g");
  require_probes_in_domain(beta_g, probes, "beta_g");

  GraphAssumptionReport rep;
  rep.sample_grid = probes;
  rep.coercive_alpha = coercivity_constants(alpha);
  rep.coercive_alpha_gamma = coercivity_constants(alpha_g);

  GrowthCheck ga = growth_constant(alpha);
  GrowthCheck gg = growth_constant(alpha_g);
  rep.linear_growth.holds = ga.holds && gg.holds;
  rep.linear_growth.constant = std::max(ga.constant, gg.constant);

  // Domination: domain inclusion first, then a growth comparison, and the
  // constant itself is certified on the probe grid.
  DominationCheck dom;
  bool domain_ok = beta.domain_lo() <= beta_g.domain_lo() && beta_g.domain_hi() <= beta.domain_hi();
  if (!domain_ok) {
    dom.holds = false;
  } else if (beta_g.domain_is_real_line()) {
    dom.holds = growth_rank(beta) <= growth_rank(beta_g);
  } else {
    // Bounded boundary domain: beta is finite on its closure (inclusion held),
    // so a finite constant exists; for two logarithmic graphs the endpoint
    // limit of the ratio is the ratio of well parameters.
    dom.holds = true;
  }
  double sup = 0.0;
  for (double s : probes) sup = std::max(sup, std::abs(beta.minimal_section(s)) /
                                                  (1.0 + std::abs(beta_g.minimal_section(s))));
  if (beta.kind() == GraphKind::Logarithmic && beta_g.kind() == GraphKind::Logarithmic)
    sup = std::max(sup, beta.coeff() / beta_g.coeff());
  dom.constant = sup;
  rep.domination = dom;

  // Re-check every reported constant on the probe grid.
  const double slack = 1e-12;
  for (double s : probes) {
    if (rep.coercive_alpha.holds) {
      double r = alpha.minimal_section(s);
      if (r * s < rep.coercive_alpha.c1 * s * s - rep.coercive_alpha.c2 - slack)
        rep.coercive_alpha.holds = false;
    }
    if (rep.coercive_alpha_gamma.holds) {
      double r = alpha_g.minimal_section(s);
      if (r * s < rep.coercive_alpha_gamma.c1 * s * s - rep.coercive_alpha_gamma.c2 - slack)
        rep.coercive_alpha_gamma.holds = false;
    }
    if (rep.linear_growth.holds) {
      double m = std::max(std::abs(alpha.minimal_section(s)), std::abs(alpha_g.minimal_section(s)));
      if (m > rep.linear_growth.constant * (1.0 + std::abs(s)) + slack)
        rep.linear_growth.holds = false;
    }
    if (rep.domination.holds) {
      if (std::abs(beta.minimal_section(s)) >
          rep.domination.constant * (1.0 + std::abs(beta_g.minimal_section(s))) + slack)
        rep.domination.holds = false;
    }
  }
  return rep;
}

}  // namespace chdbc
