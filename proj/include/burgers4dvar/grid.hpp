#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

namespace burgers4dvar {

/// Uniform grid on [0,1] with homogeneous Dirichlet boundaries.
///
/// Only interior nodes x_i = (i+1) h, i = 0..n-1, carry unknowns; the
/// boundary values at x = 0 and x = 1 are implicitly zero.
class Grid1D {
 public:
  explicit Grid1D(std::size_t n_interior);

  std::size_t size() const { return n_; }
  double h() const { return h_; }
  double x(std::size_t i) const { return static_cast<double>(i + 1) * h_; }

  bool operator==(const Grid1D& other) const { return n_ == other.n_; }

  /// Grid with 2n+1 interior nodes (spacing halved, nodes nested).
  Grid1D refined() const { return Grid1D(2 * n_ + 1); }

 private:
  std::size_t n_;
  double h_;
};

/// Nodal values of a function on the interior of a Grid1D.
class Field {
 public:
  explicit Field(const Grid1D& grid) : grid_(grid), values_(grid.size(), 0.0) {}
  Field(const Grid1D& grid, std::vector<double> values);

  /// Samples f at the interior nodes.
  static Field sample(const Grid1D& grid, const std::function<double(double)>& f);

  const Grid1D& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  const std::vector<double>& vector() const { return values_; }

  bool all_finite() const;
  double max_abs() const;

  Field& operator+=(const Field& other);
  Field& operator-=(const Field& other);
  Field& operator*=(double s);
  /// this += a * x
  Field& axpy(double a, const Field& x);

  friend Field operator+(Field a, const Field& b) { return a += b; }
  friend Field operator-(Field a, const Field& b) { return a -= b; }
  friend Field operator*(double s, Field a) { return a *= s; }
  friend Field operator*(Field a, double s) { return a *= s; }

 private:
  Grid1D grid_;
  std::vector<double> values_;
};

/// Discrete L2 inner product h * sum f_i g_i.
double inner(const Field& f, const Field& g);

double l2_norm(const Field& f);

/// Discrete H^1_0 seminorm, including the two boundary differences.
double v_norm(const Field& f);

/// V inner product sum (f_{i+1}-f_i)(g_{i+1}-g_i)/h.
double v_inner(const Field& f, const Field& g);

/// Three-point second difference with Dirichlet closure.
Field laplacian(const Field& f);

/// Solves laplacian(f) = g.
Field inv_laplacian(const Field& g);

/// Smallest eigenvalue of the negative discrete Dirichlet Laplacian,
/// (2/h^2)(1 - cos(pi h)).
double poincare_rate(const Grid1D& grid);

/// LU factorization of a constant-coefficient symmetric tridiagonal matrix
/// with `diag` on the diagonal and `off` on both off-diagonals.
class TridiagonalSolver {
 public:
  TridiagonalSolver(std::size_t n, double diag, double off);

  /// Overwrites rhs with the solution.
  void solve_in_place(std::span<double> rhs) const;

  std::size_t size() const { return pivots_.size(); }

 private:
  double off_;
  std::vector<double> pivots_;
};

/// Writes `x,value` rows including the two zero boundary rows.
void write_field_csv(std::ostream& os, const Field& f);

void check_same_grid(const Field& a, const Field& b, const char* where);

}  // namespace burgers4dvar
