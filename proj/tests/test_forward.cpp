#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "burgers4dvar/forward.hpp"
#include "support.hpp"

using namespace burgers4dvar;
using std::numbers::pi;

namespace {

SolverConfig with_dt(double dt) {
  SolverConfig c;
  c.dt = dt;
  return c;
}

std::vector<double> nodes(const Grid1D& g) {
  std::vector<double> xs;
  for (std::size_t i = 0; i < g.size(); ++i) xs.push_back(g.x(i));
  return xs;
}

double max_diff(const Field& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) m = std::max(m, std::abs(a.values()[i] - b[i]));
  return m;
}

}  // namespace

TEST_SUITE("forward") {

TEST_CASE("zero is a steady state") {
  const Grid1D g(31);
  const Field z(g);
  const Field s = step(z, 0.01, 0.1);
  for (double v : s.values()) CHECK(v == 0.0);
  const Trajectory tr = solve_forward(z, 0.5, with_dt(0.01), 0.1);
  for (const auto& st : tr.states) CHECK(l2_norm(st) == 0.0);
}

TEST_CASE("T = 0 gives a single state") {
  const Grid1D g(15);
  const Field u = Field::sample(g, [](double x) { return std::sin(pi * x); });
  const Trajectory tr = solve_forward(u, 0.0, with_dt(0.01), 0.1);
  REQUIRE(tr.states.size() == 1);
  CHECK(l2_norm(tr.initial() - u) == 0.0);
}

TEST_CASE("time grid subdivides dt so that T is exact") {
  const TimeGrid tg = TimeGrid::make(1.0, with_dt(0.3));
  CHECK(tg.steps == 4);
  CHECK(tg.dt == doctest::Approx(0.25));
  CHECK(tg.time(tg.steps) == 1.0);
  CHECK(TimeGrid::make(1.0, with_dt(0.25)).steps == 4);
  CHECK(tg.index_of(0.5) == 2);
  CHECK_THROWS_AS(tg.index_of(0.3), std::invalid_argument);
  CHECK_THROWS(TimeGrid::make(-1.0, with_dt(0.1)));
}

TEST_CASE("small amplitude decays like the heat equation") {
  const Grid1D g(63);
  const double a = 1e-3, eps = 0.1;
  const Field u = Field::sample(g, [a](double x) { return a * std::sin(pi * x); });
  const Trajectory tr = solve_forward(u, 1.0, SolverConfig::default_for(g, eps, a), eps);
  for (std::size_t k = 0; k <= tr.steps(); k += 50) {
    const double t = tr.time.time(k);
    const double expected = a / std::sqrt(2.0) * std::exp(-eps * pi * pi * t);
    CHECK(std::abs(l2_norm(tr.states[k]) - expected) <= 0.02 * expected);
  }
}

TEST_CASE("l2 norm is nonincreasing") {
  const Grid1D g(63);
  const Field u = Field::sample(g, [](double x) { return std::sin(2 * pi * x) + 0.5 * std::sin(pi * x); });
  const double eps = 0.05;
  const Trajectory tr = solve_forward(u, 2.0, SolverConfig::default_for(g, eps, u.max_abs()), eps);
  for (std::size_t k = 1; k < tr.states.size(); ++k) {
    CHECK(l2_norm(tr.states[k]) <= l2_norm(tr.states[k - 1]) + 1e-10);
  }
}

TEST_CASE("instability is reported with the step index") {
  const Grid1D g(63);
  const Field u = Field::sample(g, [](double x) { return 20 * std::sin(pi * x); });
  try {
    solve_forward(u, 1.0, with_dt(0.2), 1e-3);
    FAIL("expected SolverError");
  } catch (const SolverError& e) {
    CHECK(e.step() >= 1);
  }
  Field bad = u;
  bad.values()[3] = std::nan("");
  CHECK_THROWS(step(bad, 0.01, 0.1));
}

TEST_CASE("cole-hopf reference against closed form") {
  const Grid1D g(63);
  const double eps = 0.1;
  auto u2 = [](double x) { return std::sin(2 * pi * x); };
  auto U2 = [](double x) { return (1 - std::cos(2 * pi * x)) / (2 * pi); };
  const auto xs = nodes(g);
  for (double t : {0.0, 0.1, 0.5}) {
    const Field ch = cole_hopf_reference(u2, g, t, eps, 512);
    const auto ref = test_support::cole_hopf_closed_form(U2, xs, t, eps);
    CHECK(max_diff(ch, ref) <= 1e-6);
  }
  // t = 0 reproduces u.
  const Field ch0 = cole_hopf_reference(u2, g, 0.0, eps, 512);
  CHECK(max_diff(ch0, [&] { std::vector<double> v; for (double x : xs) v.push_back(u2(x)); return v; }()) <= 1e-6);
  CHECK(l2_norm(cole_hopf_reference(Field(g), 0.3, eps, 64)) <= 1e-15);
}

TEST_CASE("forward scheme converges to cole-hopf at second order in h") {
  const double eps = 0.1, T = 0.5;
  auto U2 = [](double x) { return (1 - std::cos(2 * pi * x)) / (2 * pi); };
  std::vector<double> errs, hs;
  Grid1D g(31);
  double dt = SolverConfig::default_for(g, eps, 1.0).dt;
  for (int level = 0; level < 3; ++level) {
    if (level > 0) {
      const Grid1D next = g.refined();
      dt *= std::pow(next.h() / g.h(), 2);
      g = next;
    }
    const Field u = Field::sample(g, [](double x) { return std::sin(2 * pi * x); });
    const Trajectory tr = solve_forward(u, T, with_dt(dt), eps);
    const auto ref = test_support::cole_hopf_closed_form(U2, nodes(g), T, eps);
    errs.push_back(l2_norm(tr.final() - Field(g, ref)));
    hs.push_back(g.h());
  }
  for (std::size_t i = 1; i < errs.size(); ++i) {
    CHECK(std::log(errs[i - 1] / errs[i]) / std::log(hs[i - 1] / hs[i]) >= 1.8);
  }
}

TEST_CASE("sin(pi x) terminal state matches cole-hopf") {
  const Grid1D g(127);
  const double eps = 0.1;
  const Field u = Field::sample(g, [](double x) { return std::sin(pi * x); });
  const Trajectory tr = solve_forward(u, 1.0, SolverConfig::default_for(g, eps, 1.0), eps);
  auto U1 = [](double x) { return (1 - std::cos(pi * x)) / pi; };
  const auto ref = test_support::cole_hopf_closed_form(U1, nodes(g), 1.0, eps);
  CHECK(max_diff(tr.final(), ref) <= 1e-3);
}

TEST_CASE("energy integral") {
  const Grid1D g(63);
  CHECK(energy_integral(solve_forward(Field(g), 1.0, with_dt(0.01), 0.1)) == 0.0);

  const double a = 1e-3, eps = 0.1, T = 5.0;
  const Field u = Field::sample(g, [a](double x) { return a * std::sin(pi * x); });
  const Trajectory tr = solve_forward(u, T, SolverConfig::default_for(g, eps, a), eps);
  const double bound = l2_norm(u) * l2_norm(u) / (2 * eps);
  const double closed = bound * (1 - std::exp(-2 * eps * poincare_rate(g) * T));
  CHECK(energy_integral(tr) == doctest::Approx(closed).epsilon(2e-3));
  CHECK(energy_integral(tr) <= bound * (1 + 1e-3));

  const auto cum = cumulative_energy_integral(tr);
  REQUIRE(cum.size() == tr.states.size());
  CHECK(cum.front() == 0.0);
  CHECK(cum.back() == doctest::Approx(energy_integral(tr)).epsilon(1e-14));
  for (std::size_t k = 1; k < cum.size(); ++k) CHECK(cum[k] >= cum[k - 1]);
}

TEST_CASE("trajectory csv and binary checkpoint") {
  const Grid1D g(3);
  const Field u(g, {0.1, 0.2, 0.1});
  const Trajectory tr = solve_forward(u, 0.02, with_dt(0.01), 0.1);
  std::ostringstream csv;
  write_trajectory_csv(csv, tr);
  const std::string s = csv.str();
  CHECK(s.rfind("t,x,y\n0,0,0\n0,0.25,0.1\n", 0) == 0);
  CHECK(std::count(s.begin(), s.end(), '\n') == 1 + 3 * 5);

  std::stringstream bin;
  write_trajectory_binary(bin, tr);
  const Trajectory back = read_trajectory_binary(bin);
  CHECK(back.grid == tr.grid);
  CHECK(back.time.steps == tr.time.steps);
  CHECK(back.eps == tr.eps);
  for (std::size_t k = 0; k < tr.states.size(); ++k) CHECK(l2_norm(back.states[k] - tr.states[k]) == 0.0);
}

}
