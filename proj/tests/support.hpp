#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "burgers4dvar/grid.hpp"

namespace test_support {

using burgers4dvar::Field;
using burgers4dvar::Grid1D;

inline Field random_field(const Grid1D& g, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  std::vector<double> v(g.size());
  for (double& x : v) x = nd(rng);
  return Field(g, v);
}

// Random smooth field: a few sine modes with normal coefficients.
inline Field random_smooth(const Grid1D& g, std::mt19937_64& rng, double scale = 1.0, int modes = 4) {
  std::normal_distribution<double> nd(0.0, scale);
  std::vector<double> c(modes);
  for (double& x : c) x = nd(rng);
  return Field::sample(g, [&](double x) {
    double s = 0.0;
    for (int k = 0; k < modes; ++k) s += c[k] * std::sin((k + 1) * std::numbers::pi * x) / (k + 1);
    return s;
  });
}

inline double rel_diff(double a, double b) {
  const double s = std::max(std::abs(a), std::abs(b));
  return s == 0.0 ? 0.0 : std::abs(a - b) / s;
}

// Dense row-major matrix of a linear map on fields, built column by column.
template <class F>
std::vector<double> dense_matrix(const Grid1D& g, F&& apply) {
  const std::size_t n = g.size();
  std::vector<double> m(n * n);
  for (std::size_t j = 0; j < n; ++j) {
    Field e(g);
    e.values()[j] = 1.0;
    const Field col = apply(e);
    for (std::size_t i = 0; i < n; ++i) m[i * n + j] = col.values()[i];
  }
  return m;
}

}  // namespace test_support

namespace test_support {

// Cole-Hopf solution for an initial state whose antiderivative U(x) = int_0^x u
// is known in closed form. Cosine coefficients of exp(-U/(2 eps)) by Simpson's
// rule, evolved mode by mode.
template <class Antiderivative>
std::vector<double> cole_hopf_closed_form(Antiderivative&& U, const std::vector<double>& xs, double t,
                                          double eps, int modes = 400, int panels = 8192) {
  const double pi = std::numbers::pi;
  std::vector<double> phi(panels + 1);
  for (int j = 0; j <= panels; ++j) phi[j] = std::exp(-U(static_cast<double>(j) / panels) / (2 * eps));
  std::vector<double> a(modes + 1);
  for (int k = 0; k <= modes; ++k) {
    double s = 0.0;
    for (int j = 0; j <= panels; ++j) {
      const double w = (j == 0 || j == panels) ? 1.0 : (j % 2 ? 4.0 : 2.0);
      s += w * phi[j] * std::cos(k * pi * static_cast<double>(j) / panels);
    }
    a[k] = (k == 0 ? 1.0 : 2.0) * s / (3.0 * panels);
  }
  std::vector<double> y;
  for (double x : xs) {
    double p = a[0], px = 0.0;
    for (int k = 1; k <= modes; ++k) {
      const double decay = std::exp(-eps * k * k * pi * pi * t);
      p += a[k] * decay * std::cos(k * pi * x);
      px -= a[k] * decay * k * pi * std::sin(k * pi * x);
    }
    y.push_back(-2 * eps * px / p);
  }
  return y;
}

}  // namespace test_support
