#include "burgers4dvar/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <string>

#include "burgers4dvar/format.hpp"

namespace burgers4dvar {

Grid1D::Grid1D(std::size_t n_interior) : n_(n_interior), h_(0.0) {
  if (n_interior < 3) {
    throw std::invalid_argument("Grid1D: need at least 3 interior nodes, got " +
                                std::to_string(n_interior));
  }
  h_ = 1.0 / static_cast<double>(n_interior + 1);
}

Field::Field(const Grid1D& grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.size()) {
    throw std::invalid_argument("Field: expected " + std::to_string(grid_.size()) +
                                " values, got " + std::to_string(values_.size()));
  }
}

Field Field::sample(const Grid1D& grid, const std::function<double(double)>& f) {
  Field out(grid);
  for (std::size_t i = 0; i < grid.size(); ++i) out.values_[i] = f(grid.x(i));
  return out;
}

bool Field::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

double Field::max_abs() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

void check_same_grid(const Field& a, const Field& b, const char* where) {
  if (!(a.grid() == b.grid())) {
    throw std::invalid_argument(std::string(where) + ": fields live on different grids");
  }
}

Field& Field::operator+=(const Field& other) {
  check_same_grid(*this, other, "Field::operator+=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

Field& Field::operator-=(const Field& other) {
  check_same_grid(*this, other, "Field::operator-=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  return *this;
}

Field& Field::operator*=(double s) {
  for (double& v : values_) v *= s;
  return *this;
}

Field& Field::axpy(double a, const Field& x) {
  check_same_grid(*this, x, "Field::axpy");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += a * x.values_[i];
  return *this;
}

double inner(const Field& f, const Field& g) {
  check_same_grid(f, g, "inner");
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += f[i] * g[i];
  return f.grid().h() * s;
}

double l2_norm(const Field& f) { return std::sqrt(inner(f, f)); }

double v_inner(const Field& f, const Field& g) {
  check_same_grid(f, g, "v_inner");
  const std::size_t n = f.size();
  double s = 0.0;
  double fprev = 0.0, gprev = 0.0;
  for (std::size_t i = 0; i <= n; ++i) {
    const double fi = i < n ? f[i] : 0.0;
    const double gi = i < n ? g[i] : 0.0;
    s += (fi - fprev) * (gi - gprev);
    fprev = fi;
    gprev = gi;
  }
  return s / f.grid().h();
}

double v_norm(const Field& f) { return std::sqrt(v_inner(f, f)); }

Field laplacian(const Field& f) {
  const std::size_t n = f.size();
  const double inv_h2 = 1.0 / (f.grid().h() * f.grid().h());
  Field out(f.grid());
  for (std::size_t i = 0; i < n; ++i) {
    const double left = i > 0 ? f[i - 1] : 0.0;
    const double right = i + 1 < n ? f[i + 1] : 0.0;
    out[i] = (left - 2.0 * f[i] + right) * inv_h2;
  }
  return out;
}

Field inv_laplacian(const Field& g) {
  const double h = g.grid().h();
  // (f_{i-1} - 2 f_i + f_{i+1}) = h^2 g_i
  TridiagonalSolver solver(g.size(), -2.0, 1.0);
  Field f = g;
  f *= h * h;
  solver.solve_in_place(f.values());
  return f;
}

double poincare_rate(const Grid1D& grid) {
  const double h = grid.h();
  return 2.0 / (h * h) * (1.0 - std::cos(std::numbers::pi * h));
}

TridiagonalSolver::TridiagonalSolver(std::size_t n, double diag, double off)
    : off_(off), pivots_(n) {
  // Thomas elimination; pivots_[i] is the i-th diagonal entry of U.
  pivots_[0] = diag;
  for (std::size_t i = 1; i < n; ++i) {
    if (pivots_[i - 1] == 0.0) throw std::runtime_error("TridiagonalSolver: zero pivot");
    pivots_[i] = diag - off * off / pivots_[i - 1];
  }
}

void TridiagonalSolver::solve_in_place(std::span<double> rhs) const {
  const std::size_t n = pivots_.size();
  if (rhs.size() != n) throw std::invalid_argument("TridiagonalSolver: size mismatch");
  for (std::size_t i = 1; i < n; ++i) rhs[i] -= off_ / pivots_[i - 1] * rhs[i - 1];
  rhs[n - 1] /= pivots_[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - off_ * rhs[i + 1]) / pivots_[i];
}

void write_field_csv(std::ostream& os, const Field& f) {
  os << "x,value\n";
  os << "0,0\n";
  for (std::size_t i = 0; i < f.size(); ++i) {
    os << format_double(f.grid().x(i)) << ',' << format_double(f[i]) << '\n';
  }
  os << "1,0\n";
}

}  // namespace burgers4dvar
