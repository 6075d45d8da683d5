#pragma once

// Scalar maximal monotone graphs on R together with the regularization
// calculus used by the solver: resolvent, Yosida approximation, Moreau
// envelope, truncation, and numeric certification of the structural
// assumptions the well-posedness theory needs (coercivity, linear growth,
// bulk/boundary domination).

#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace chdbc {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DomainError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct SolveError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

enum class GraphKind { Linear, Sign, PositivePart, Polynomial, Logarithmic, Zero };

// A maximal monotone graph h on R with 0 in h(0), carrying its convex
// primitive normalized to potential(0) = 0.  Only the built-in kinds are
// constructible; every kind knows its effective domain and closed-form
// minimal section where one exists.
class MonotoneGraph {
public:
  static MonotoneGraph linear(double slope);
  static MonotoneGraph sign();
  static MonotoneGraph positive_part();
  static MonotoneGraph polynomial(int degree, double coeff);  // odd degree >= 1
  static MonotoneGraph logarithmic(double well);              // domain (-1,1)
  static MonotoneGraph zero();

  // Config syntax: "linear <a>" | "sign" | "pos" | "poly <d> <c>" | "log <c>" | "zero".
  static MonotoneGraph parse(const std::string& text);
  std::string to_string() const;

  GraphKind kind() const { return kind_; }
  double slope() const { return a_; }   // Linear
  int degree() const { return d_; }     // Polynomial
  double coeff() const { return a_; }   // Polynomial / Logarithmic well parameter

  // Effective domain of the graph (where the subdifferential is nonempty).
  double domain_lo() const { return lo_; }
  double domain_hi() const { return hi_; }
  bool in_domain(double r) const;
  bool domain_is_real_line() const;

  // Convex primitive; defined on the closure of the domain, throws
  // DomainError outside it.
  double potential(double r) const;

  // Element of minimal modulus of h(r); throws DomainError outside the
  // domain (for the logarithmic kind the section diverges at the endpoints,
  // which lie outside the open domain).
  double minimal_section(double r) const;

  // Single-valued branch value and a.e. derivative used by Newton; only
  // meaningful at points where the graph is single-valued and smooth.
  double value(double r) const;
  double derivative(double r) const;

  bool operator==(const MonotoneGraph& o) const {
    return kind_ == o.kind_ && a_ == o.a_ && d_ == o.d_;
  }

private:
  MonotoneGraph(GraphKind k, double a, int d, double lo, double hi)
      : kind_(k), a_(a), d_(d), lo_(lo), hi_(hi) {}
  GraphKind kind_;
  double a_ = 0.0;  // slope / coefficient / well parameter
  int d_ = 1;       // polynomial degree
  double lo_, hi_;
};

// (I + lambda h)^{-1}(r): closed form for Linear/Sign/PositivePart/Zero,
// safeguarded Newton with bisection fallback (tol 1e-12, max 200 iterations)
// for Polynomial/Logarithmic.  Total on R, nonexpansive.
double resolvent(const MonotoneGraph& g, double lambda, double r);

// h_lambda(r) = (r - resolvent(r)) / lambda; 1/lambda-Lipschitz, and
// h_lambda(r) is an element of h(resolvent(r)).
double yosida(const MonotoneGraph& g, double lambda, double r);

// a.e. derivative of the Yosida map (right-continuous convention at kinks).
double yosida_derivative(const MonotoneGraph& g, double lambda, double r);

// Moreau envelope: potential(resolvent(r)) + lambda/2 * yosida(r)^2.
// C^1 with derivative equal to the Yosida map; increases to the potential
// as lambda decreases to 0.
double moreau_envelope(const MonotoneGraph& g, double lambda, double r);

// Two-sided truncation at +-1/lambda.
double truncate(double lambda, double r);

struct CoercivityCheck {
  bool holds = false;
  double c1 = 0.0;  // r*s >= c1*s^2 - c2 on the domain
  double c2 = 0.0;
};

struct GrowthCheck {
  bool holds = false;
  double constant = 0.0;  // |h^0(s)| <= constant * (1 + |s|) on R
};

struct DominationCheck {
  bool holds = false;
  double constant = 0.0;  // |beta^0(s)| <= constant * (1 + |beta_g^0(s)|) on D(beta_g)
};

struct GraphAssumptionReport {
  CoercivityCheck coercive_alpha;        // viscosity graph in the bulk
  CoercivityCheck coercive_alpha_gamma;  // viscosity graph on the boundary
  GrowthCheck linear_growth;             // both viscosity graphs jointly
  DominationCheck domination;            // bulk potential graph vs boundary one
  std::vector<double> sample_grid;       // probes the constants were certified on
  bool all_hold() const {
    return coercive_alpha.holds && coercive_alpha_gamma.holds && linear_growth.holds &&
           domination.holds;
  }
};

// Certifies the structural assumptions for a (alpha, alpha_g, beta, beta_g)
// quadruple: closed-form constants per kind, re-checked at every probe.
// Throws DomainError (naming the graph) if a probe falls outside the domain
// of a graph it is evaluated on.
GraphAssumptionReport check_assumptions(const MonotoneGraph& alpha, const MonotoneGraph& alpha_g,
                                        const MonotoneGraph& beta, const MonotoneGraph& beta_g,
                                        const std::vector<double>& probes);

}  // namespace chdbc
