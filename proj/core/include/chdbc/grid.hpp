#pragma once

// Node-centered finite differences on the unit square, periodic in x, with
// the two horizontal edges y=0 and y=1 acting as the boundary (two periodic
// circles).  Bulk quadrature is uniform in x and trapezoidal in y; with the
// ghost-reflection Laplacian this pairing satisfies exact summation by parts,
// which is what makes the discrete mass and energy ledgers close to round-off.

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "chdbc/graphs.hpp"

namespace chdbc {

struct Grid {
  int nx = 0;  // columns, even, >= 4; hx = 1/nx (x is periodic)
  int ny = 0;  // rows, >= 4; hy = 1/(ny-1); rows 0 and ny-1 are the boundary
  double hx = 0.0;
  double hy = 0.0;

  Grid() = default;
  Grid(int nx_, int ny_);
  double x(int i) const { return hx * i; }
  double y(int j) const { return hy * j; }
  int nodes() const { return nx * ny; }
  bool operator==(const Grid&) const = default;
};

// Bulk field, one value per node, stored row-major in y (index j*nx + i).
class InteriorField {
public:
  InteriorField() = default;
  explicit InteriorField(const Grid& g, double fill = 0.0);

  const Grid& grid() const { return grid_; }
  double& at(int i, int j) { return v_[static_cast<size_t>(j) * grid_.nx + i]; }
  double at(int i, int j) const { return v_[static_cast<size_t>(j) * grid_.nx + i]; }
  std::vector<double>& data() { return v_; }
  const std::vector<double>& data() const { return v_; }
  int size() const { return static_cast<int>(v_.size()); }

private:
  Grid grid_;
  std::vector<double> v_;
};

// Boundary field: one value per column on each of the two circles.
class BoundaryField {
public:
  BoundaryField() = default;
  explicit BoundaryField(const Grid& g, double fill = 0.0);

  const Grid& grid() const { return grid_; }
  std::vector<double>& bottom() { return bottom_; }
  const std::vector<double>& bottom() const { return bottom_; }
  std::vector<double>& top() { return top_; }
  const std::vector<double>& top() const { return top_; }

private:
  Grid grid_;
  std::vector<double> bottom_, top_;
};

// --- quadrature and norms ---------------------------------------------------

double mean(const InteriorField& f);                                 // |domain| = 1
double inner(const InteriorField& a, const InteriorField& b);        // trapezoid-in-y
double norm_h(const InteriorField& f);
double gradient_inner(const InteriorField& a, const InteriorField& b);  // Dirichlet form
double v_norm(const InteriorField& f);  // sqrt(gradient energy + mean^2)

double boundary_inner(const BoundaryField& a, const BoundaryField& b);
double boundary_norm(const BoundaryField& f);
double boundary_integral(const BoundaryField& f);
double boundary_gradient_inner(const BoundaryField& a, const BoundaryField& b);
double v_gamma_norm(const BoundaryField& f);  // H^1 norm on the two circles

// --- differential operators -------------------------------------------------

// Five-point Laplacian, periodic in x, ghost reflection (zero normal
// derivative) at the boundary rows.  Symmetric negative semidefinite against
// the trapezoid quadrature: inner(laplacian_neumann(f), g) = -gradient_inner(f, g).
InteriorField laplacian_neumann(const InteriorField& f);

// Laplacian with one-sided (4-point, second-order) d2/dy2 at the boundary
// rows; exact on polynomials of degree <= 2 in y, no flux assumption.
InteriorField laplacian_onesided(const InteriorField& f);

// Solve lambda*y - laplacian_neumann(y) = f by Jacobi-preconditioned CG.
InteriorField helmholtz_neumann_solve(double lambda, const InteriorField& f, double tol = 1e-12);

// Solve -laplacian_neumann(w) = f with mean(w) = 0; requires |mean(f)| <= 1e-10.
InteriorField neumann_inverse_laplacian(const InteriorField& f, double tol = 1e-12);

// Outward normal derivative at the two boundary rows, second-order one-sided
// (exact on polynomials of degree <= 2 in y).
BoundaryField normal_derivative(const InteriorField& f);

// Three-point periodic second difference along each circle.
BoundaryField laplace_beltrami(const BoundaryField& f);

BoundaryField trace(const InteriorField& f);
void set_trace(InteriorField& f, const BoundaryField& v);

// Solve u - sqrt(epsilon) * laplacian_neumann(u) = u0; mean-preserving and
// V-norm non-increasing (elliptic smoothing of initial data).
InteriorField smooth_initial_datum(double epsilon, const InteriorField& u0);

// --- serialization ----------------------------------------------------------

// "x,y,value" / "x,side,value" rows, 17 significant digits, row-major.
void write_csv(const InteriorField& f, std::ostream& out);
void write_csv(const BoundaryField& f, std::ostream& out);
InteriorField read_interior_csv(const Grid& g, std::istream& in);
BoundaryField read_boundary_csv(const Grid& g, std::istream& in);

// --- small helpers used across modules --------------------------------------

InteriorField operator+(const InteriorField& a, const InteriorField& b);
InteriorField operator-(const InteriorField& a, const InteriorField& b);
InteriorField operator*(double s, const InteriorField& a);
BoundaryField operator+(const BoundaryField& a, const BoundaryField& b);
BoundaryField operator-(const BoundaryField& a, const BoundaryField& b);
BoundaryField operator*(double s, const BoundaryField& a);

}  // namespace chdbc
