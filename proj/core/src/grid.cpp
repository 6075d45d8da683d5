#include "chdbc/grid.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "detail_format.hpp"

namespace chdbc {

namespace {

// Trapezoid weight in y (boundary rows carry half weight).
inline double wy(const Grid& g, int j) {
  return (j == 0 || j == g.ny - 1) ? 0.5 * g.hy : g.hy;
}

void require_same_grid(const Grid& a, const Grid& b, const char* what) {
  if (!(a == b)) throw Error(std::string(what) + ": grid mismatch");
}

}  // namespace

Grid::Grid(int nx_, int ny_) : nx(nx_), ny(ny_) {
  if (nx < 4 || nx % 2 != 0) throw ConfigError("grid: nx must be even and >= 4");
  if (ny < 4) throw ConfigError("grid: ny must be >= 4");
  hx = 1.0 / nx;
  hy = 1.0 / (ny - 1);
}

InteriorField::InteriorField(const Grid& g, double fill)
    : grid_(g), v_(static_cast<size_t>(g.nx) * g.ny, fill) {}

BoundaryField::BoundaryField(const Grid& g, double fill)
    : grid_(g), bottom_(g.nx, fill), top_(g.nx, fill) {}

// ---------------------------------------------------------------------------
// quadrature
// ---------------------------------------------------------------------------

double mean(const InteriorField& f) {
  const Grid& g = f.grid();
  double acc = 0.0;
  for (int j = 0; j < g.ny; ++j) {
    double row = 0.0;
    for (int i = 0; i < g.nx; ++i) row += f.at(i, j);
    acc += wy(g, j) * row;
  }
  return acc * g.hx;  // |domain| = 1
}

double inner(const InteriorField& a, const InteriorField& b) {
  require_same_grid(a.grid(), b.grid(), "inner");
  const Grid& g = a.grid();
  double acc = 0.0;
  for (int j = 0; j < g.ny; ++j) {
    double row = 0.0;
    for (int i = 0; i < g.nx; ++i) row += a.at(i, j) * b.at(i, j);
    acc += wy(g, j) * row;
  }
  return acc * g.hx;
}

double norm_h(const InteriorField& f) { return std::sqrt(std::max(inner(f, f), 0.0)); }

double gradient_inner(const InteriorField& a, const InteriorField& b) {
  require_same_grid(a.grid(), b.grid(), "gradient_inner");
  const Grid& g = a.grid();
  double acc = 0.0;
  // x-differences, periodic, weighted like the nodes they sit between
  for (int j = 0; j < g.ny; ++j) {
    double row = 0.0;
    for (int i = 0; i < g.nx; ++i) {
      int ip = (i + 1) % g.nx;
      row += (a.at(ip, j) - a.at(i, j)) * (b.at(ip, j) - b.at(i, j));
    }
    acc += wy(g, j) * row / (g.hx * g.hx);
  }
  // y-differences on cell edges
  for (int j = 0; j + 1 < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      acc += (a.at(i, j + 1) - a.at(i, j)) * (b.at(i, j + 1) - b.at(i, j)) / g.hy;
  return acc * g.hx;
}

double v_norm(const InteriorField& f) {
  double m = mean(f);
  return std::sqrt(std::max(gradient_inner(f, f) + m * m, 0.0));
}

double boundary_inner(const BoundaryField& a, const BoundaryField& b) {
  require_same_grid(a.grid(), b.grid(), "boundary_inner");
  const Grid& g = a.grid();
  double acc = 0.0;
  for (int i = 0; i < g.nx; ++i)
    acc += a.bottom()[i] * b.bottom()[i] + a.top()[i] * b.top()[i];
  return acc * g.hx;
}

double boundary_norm(const BoundaryField& f) {
  return std::sqrt(std::max(boundary_inner(f, f), 0.0));
}

double boundary_integral(const BoundaryField& f) {
  const Grid& g = f.grid();
  double acc = 0.0;
  for (int i = 0; i < g.nx; ++i) acc += f.bottom()[i] + f.top()[i];
  return acc * g.hx;
}

double boundary_gradient_inner(const BoundaryField& a, const BoundaryField& b) {
  require_same_grid(a.grid(), b.grid(), "boundary_gradient_inner");
  const Grid& g = a.grid();
  double acc = 0.0;
  for (int i = 0; i < g.nx; ++i) {
    int ip = (i + 1) % g.nx;
    acc += (a.bottom()[ip] - a.bottom()[i]) * (b.bottom()[ip] - b.bottom()[i]);
    acc += (a.top()[ip] - a.top()[i]) * (b.top()[ip] - b.top()[i]);
  }
  return acc / g.hx;
}

double v_gamma_norm(const BoundaryField& f) {
  return std::sqrt(std::max(boundary_gradient_inner(f, f) + boundary_inner(f, f), 0.0));
}

// ---------------------------------------------------------------------------
// operators
// ---------------------------------------------------------------------------

InteriorField laplacian_neumann(const InteriorField& f) {
  const Grid& g = f.grid();
  InteriorField out(g);
  const double ax = 1.0 / (g.hx * g.hx);
  const double ay = 1.0 / (g.hy * g.hy);
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      int ip = (i + 1) % g.nx, im = (i + g.nx - 1) % g.nx;
      double c = f.at(i, j);
      double dxx = (f.at(ip, j) - 2.0 * c + f.at(im, j)) * ax;
      double dyy;
      if (j == 0)
        dyy = 2.0 * (f.at(i, 1) - c) * ay;  // ghost reflection
      else if (j == g.ny - 1)
        dyy = 2.0 * (f.at(i, g.ny - 2) - c) * ay;
      else
        dyy = (f.at(i, j + 1) - 2.0 * c + f.at(i, j - 1)) * ay;
      out.at(i, j) = dxx + dyy;
    }
  }
  return out;
}

InteriorField laplacian_onesided(const InteriorField& f) {
  const Grid& g = f.grid();
  InteriorField out = laplacian_neumann(f);
  const double ay = 1.0 / (g.hy * g.hy);
  const double ax = 1.0 / (g.hx * g.hx);
  for (int i = 0; i < g.nx; ++i) {
    int ip = (i + 1) % g.nx, im = (i + g.nx - 1) % g.nx;
    // bottom row: one-sided d2/dy2 = (2 f0 - 5 f1 + 4 f2 - f3) / hy^2
    double dxx = (f.at(ip, 0) - 2.0 * f.at(i, 0) + f.at(im, 0)) * ax;
    out.at(i, 0) =
        dxx + (2.0 * f.at(i, 0) - 5.0 * f.at(i, 1) + 4.0 * f.at(i, 2) - f.at(i, 3)) * ay;
    int n = g.ny - 1;
    dxx = (f.at(ip, n) - 2.0 * f.at(i, n) + f.at(im, n)) * ax;
    out.at(i, n) =
        dxx + (2.0 * f.at(i, n) - 5.0 * f.at(i, n - 1) + 4.0 * f.at(i, n - 2) - f.at(i, n - 3)) * ay;
  }
  return out;
}

namespace {

// Jacobi-preconditioned CG for lambda*y - Lap_n(y) = f (SPD for lambda > 0;
// for lambda = 0 the caller restricts to mean-zero data, where the operator
// is positive definite as well).
InteriorField cg_helmholtz(double lambda, const InteriorField& f, double tol, bool project_mean) {
  const Grid& g = f.grid();
  const int max_iter = 10 * g.nodes();
  const double diag = lambda + 2.0 / (g.hx * g.hx) + 2.0 / (g.hy * g.hy);

  InteriorField x(g, 0.0);
  InteriorField r = f;
  if (project_mean) {
    double m = mean(r);
    for (double& v : r.data()) v -= m;
  }
  auto apply = [&](const InteriorField& p) {
    InteriorField ap = laplacian_neumann(p);
    const auto& pd = p.data();
    auto& ad = ap.data();
    for (size_t k = 0; k < ad.size(); ++k) ad[k] = lambda * pd[k] - ad[k];
    return ap;
  };

  double fnorm = norm_h(f);
  if (fnorm == 0.0) return x;
  InteriorField z = (1.0 / diag) * r;
  InteriorField p = z;
  double rz = inner(r, z);
  for (int it = 0; it < max_iter; ++it) {
    if (norm_h(r) <= tol * fnorm) return x;
    InteriorField ap = apply(p);
    double pap = inner(p, ap);
    if (pap <= 0.0) throw SolveError("helmholtz CG: operator lost positivity");
    double alpha = rz / pap;
    auto &xd = x.data(), &rd = r.data();
    const auto &pd = p.data(), &apd = ap.data();
    for (size_t k = 0; k < xd.size(); ++k) {
      xd[k] += alpha * pd[k];
      rd[k] -= alpha * apd[k];
    }
    if (project_mean) {
      double m = mean(r);
      for (double& v : r.data()) v -= m;
    }
    z = (1.0 / diag) * r;
    double rz_next = inner(r, z);
    double beta = rz_next / rz;
    rz = rz_next;
    auto& pdat = p.data();
    const auto& zd = z.data();
    for (size_t k = 0; k < pdat.size(); ++k) pdat[k] = zd[k] + beta * pdat[k];
  }
  throw SolveError("helmholtz CG did not converge within " + std::to_string(max_iter) +
                   " iterations (residual " + detail::g17(norm_h(r) / fnorm) + ")");
}

}  // namespace

InteriorField helmholtz_neumann_solve(double lambda, const InteriorField& f, double tol) {
  if (!(lambda > 0.0)) throw ConfigError("helmholtz_neumann_solve needs lambda > 0");
  return cg_helmholtz(lambda, f, tol, false);
}

InteriorField neumann_inverse_laplacian(const InteriorField& f, double tol) {
  double m = mean(f);
  if (std::abs(m) > 1e-10)
    throw DomainError("neumann_inverse_laplacian needs mean-zero data, got mean " +
                      detail::g17(m));
  InteriorField x = cg_helmholtz(0.0, f, tol, true);
  double xm = mean(x);
  for (double& v : x.data()) v -= xm;
  return x;
}

BoundaryField normal_derivative(const InteriorField& f) {
  const Grid& g = f.grid();
  BoundaryField out(g);
  const double s = 1.0 / (2.0 * g.hy);
  for (int i = 0; i < g.nx; ++i) {
    // outward normal is -e_y at the bottom, +e_y at the top
    out.bottom()[i] = (3.0 * f.at(i, 0) - 4.0 * f.at(i, 1) + f.at(i, 2)) * s;
    int n = g.ny - 1;
    out.top()[i] = (3.0 * f.at(i, n) - 4.0 * f.at(i, n - 1) + f.at(i, n - 2)) * s;
  }
  return out;
}

BoundaryField laplace_beltrami(const BoundaryField& f) {
  const Grid& g = f.grid();
  BoundaryField out(g);
  const double ax = 1.0 / (g.hx * g.hx);
  for (int i = 0; i < g.nx; ++i) {
    int ip = (i + 1) % g.nx, im = (i + g.nx - 1) % g.nx;
    out.bottom()[i] = (f.bottom()[ip] - 2.0 * f.bottom()[i] + f.bottom()[im]) * ax;
    out.top()[i] = (f.top()[ip] - 2.0 * f.top()[i] + f.top()[im]) * ax;
  }
  return out;
}

BoundaryField trace(const InteriorField& f) {
  const Grid& g = f.grid();
  BoundaryField out(g);
  for (int i = 0; i < g.nx; ++i) {
    out.bottom()[i] = f.at(i, 0);
    out.top()[i] = f.at(i, g.ny - 1);
  }
  return out;
}

void set_trace(InteriorField& f, const BoundaryField& v) {
  require_same_grid(f.grid(), v.grid(), "set_trace");
  const Grid& g = f.grid();
  for (int i = 0; i < g.nx; ++i) {
    f.at(i, 0) = v.bottom()[i];
    f.at(i, g.ny - 1) = v.top()[i];
  }
}

InteriorField smooth_initial_datum(double epsilon, const InteriorField& u0) {
  if (!(epsilon > 0.0)) throw ConfigError("smooth_initial_datum needs epsilon > 0");
  // u - sqrt(eps) Lap u = u0  <=>  (1/sqrt(eps)) u - Lap u = u0 / sqrt(eps)
  double se = std::sqrt(epsilon);
  return helmholtz_neumann_solve(1.0 / se, (1.0 / se) * u0);
}

// ---------------------------------------------------------------------------
// serialization
// ---------------------------------------------------------------------------

void write_csv(const InteriorField& f, std::ostream& out) {
  const Grid& g = f.grid();
  out << "x,y,value\n";
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      out << detail::g17(g.x(i)) << ',' << detail::g17(g.y(j)) << ','
          << detail::g17(f.at(i, j)) << '\n';
}

void write_csv(const BoundaryField& f, std::ostream& out) {
  const Grid& g = f.grid();
  out << "x,side,value\n";
  for (int i = 0; i < g.nx; ++i)
    out << detail::g17(g.x(i)) << ",bottom," << detail::g17(f.bottom()[i]) << '\n';
  for (int i = 0; i < g.nx; ++i)
    out << detail::g17(g.x(i)) << ",top," << detail::g17(f.top()[i]) << '\n';
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
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
  return cells;
}

}  // namespace

InteriorField read_interior_csv(const Grid& g, std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) != std::vector<std::string>{"x", "y", "value"})
    throw IoError("interior CSV: bad header");
  InteriorField f(g);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      if (!std::getline(in, line)) throw IoError("interior CSV: truncated");
      auto cells = split_csv_line(line);
      if (cells.size() != 3) throw IoError("interior CSV: bad row '" + line + "'");
      f.at(i, j) = std::stod(cells[2]);
    }
  return f;
}

BoundaryField read_boundary_csv(const Grid& g, std::istream& in) {
  std::string line;
  if (!std::getline(in, line) ||
      split_csv_line(line) != std::vector<std::string>{"x", "side", "value"})
    throw IoError("boundary CSV: bad header");
  BoundaryField f(g);
  for (int pass = 0; pass < 2; ++pass)
    for (int i = 0; i < g.nx; ++i) {
      if (!std::getline(in, line)) throw IoError("boundary CSV: truncated");
      auto cells = split_csv_line(line);
      if (cells.size() != 3) throw IoError("boundary CSV: bad row '" + line + "'");
      (pass == 0 ? f.bottom() : f.top())[i] = std::stod(cells[2]);
    }
  return f;
}

// ---------------------------------------------------------------------------
// arithmetic helpers
// ---------------------------------------------------------------------------

InteriorField operator+(const InteriorField& a, const InteriorField& b) {
  require_same_grid(a.grid(), b.grid(), "operator+");
  InteriorField out = a;
  for (size_t k = 0; k < out.data().size(); ++k) out.data()[k] += b.data()[k];
  return out;
}

InteriorField operator-(const InteriorField& a, const InteriorField& b) {
  require_same_grid(a.grid(), b.grid(), "operator-");
  InteriorField out = a;
  for (size_t k = 0; k < out.data().size(); ++k) out.data()[k] -= b.data()[k];
  return out;
}

InteriorField operator*(double s, const InteriorField& a) {
  InteriorField out = a;
  for (double& v : out.data()) v *= s;
  return out;
}

BoundaryField operator+(const BoundaryField& a, const BoundaryField& b) {
  require_same_grid(a.grid(), b.grid(), "operator+");
  BoundaryField out = a;
  for (size_t k = 0; k < out.bottom().size(); ++k) {
    out.bottom()[k] += b.bottom()[k];
    out.top()[k] += b.top()[k];
  }
  return out;
}

BoundaryField operator-(const BoundaryField& a, const BoundaryField& b) {
  require_same_grid(a.grid(), b.grid(), "operator-");
  BoundaryField out = a;
  for (size_t k = 0; k < out.bottom().size(); ++k) {
    out.bottom()[k] -= b.bottom()[k];
    out.top()[k] -= b.top()[k];
  }
  return out;
}

BoundaryField operator*(double s, const BoundaryField& a) {
  BoundaryField out = a;
  for (double& v : out.bottom()) v *= s;
  for (double& v : out.top()) v *= s;
  return out;
}

}  // namespace chdbc
