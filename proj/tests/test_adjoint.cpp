#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "burgers4dvar/adjoint.hpp"
#include "support.hpp"

using namespace burgers4dvar;
using std::numbers::pi;
using test_support::dense_matrix;
using test_support::random_field;
using test_support::random_smooth;
using test_support::rel_diff;

namespace {

SolverConfig with_dt(double dt) {
  SolverConfig c;
  c.dt = dt;
  return c;
}

std::vector<double> matmul(const std::vector<double>& a, const std::vector<double>& b, std::size_t n) {
  std::vector<double> c(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t j = 0; j < n; ++j) c[i * n + j] += a[i * n + k] * b[k * n + j];
  return c;
}

ObservationSet full_state_set(const Grid1D& g, ObservationMode mode) {
  return ObservationSet{ObservationOperator::full_state(g), mode, {}, {},
                        NoiseModel{Covariance(g.size()), 0, false}};
}

}  // namespace

TEST_SUITE("adjoint") {

TEST_CASE("tangent step linearity and Taylor remainder") {
  std::mt19937_64 rng(2);
  const Grid1D g(63);
  const double dt = 1e-3, eps = 0.1;
  const Field y = random_smooth(g, rng);
  const Field v = random_smooth(g, rng);
  CHECK(l2_norm(tangent_step(y, Field(g), dt, eps)) == 0.0);
  CHECK(l2_norm(tangent_step(y, 3.5 * v, dt, eps) - 3.5 * tangent_step(y, v, dt, eps)) <=
        1e-12 * l2_norm(tangent_step(y, 3.5 * v, dt, eps)));

  std::vector<double> rem;
  for (double eta : {1e-2, 1e-3, 1e-4}) {
    rem.push_back(l2_norm(step(y + eta * v, dt, eps) - step(y, dt, eps) - eta * tangent_step(y, v, dt, eps)));
  }
  for (std::size_t i = 1; i < rem.size(); ++i) {
    CHECK(std::log10(rem[i - 1] / rem[i]) == doctest::Approx(2.0).epsilon(0.05));
  }
}

TEST_CASE("tangent and adjoint match dense oracles at n = 15") {
  std::mt19937_64 rng(3);
  const Grid1D g(15);
  const std::size_t n = g.size();
  const double dt = 2e-3, eps = 0.1;
  const Field y = random_field(g, rng);

  // Jacobian of step by central differences (step is quadratic, so exact up to rounding).
  const auto J = dense_matrix(g, [&](const Field& e) {
    const double s = 1e-4;
    return (1.0 / (2 * s)) * (step(y + s * e, dt, eps) - step(y - s * e, dt, eps));
  });
  const auto Tm = dense_matrix(g, [&](const Field& e) { return tangent_step(y, e, dt, eps); });
  const auto Am = dense_matrix(g, [&](const Field& e) { return adjoint_step(y, e, dt, eps); });
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      CHECK(Tm[i * n + j] == doctest::Approx(J[i * n + j]).epsilon(1e-8).scale(1.0));
      CHECK(Am[i * n + j] == doctest::Approx(Tm[j * n + i]).epsilon(1e-13).scale(1.0));
    }
  }
  CHECK(l2_norm(adjoint_step(y, Field(g), dt, eps)) == 0.0);
}

TEST_CASE("dot product identity, single and chained steps") {
  std::mt19937_64 rng(4);
  const Grid1D g(63);
  const double dt = 5e-4, eps = 0.1;
  for (int trial = 0; trial < 50; ++trial) {
    const Field y = random_field(g, rng), v = random_field(g, rng), w = random_field(g, rng);
    CHECK(rel_diff(inner(tangent_step(y, v, dt, eps), w), inner(v, adjoint_step(y, w, dt, eps))) <= 1e-12);
  }
  // k-step composition along a trajectory.
  const Field u = random_smooth(g, rng);
  const Trajectory tr = solve_forward(u, 20 * dt, with_dt(dt), eps);
  const LinearizedStepper lin(g, dt, eps);
  for (int trial = 0; trial < 10; ++trial) {
    Field v = random_field(g, rng);
    const Field v0 = v;
    Field w = random_field(g, rng);
    const Field wT = w;
    for (std::size_t k = 0; k < tr.steps(); ++k) v = lin.tangent(tr.states[k], v);
    for (std::size_t k = tr.steps(); k-- > 0;) w = lin.adjoint(tr.states[k], w);
    CHECK(rel_diff(inner(v, wT), inner(v0, w)) <= 1e-11);
  }
}

TEST_CASE("schedule") {
  const Grid1D g(7);
  const TimeGrid tg = TimeGrid::make(0.1, with_dt(0.01));
  ObservationSet c = full_state_set(g, ObservationMode::Continuous);
  c.times = tg.times();
  c.data.assign(c.times.size(), std::vector<double>(7, 0.0));
  const auto sc = schedule_observations(c, tg);
  REQUIRE(sc.size() == 11);
  CHECK(sc.front().weight == doctest::Approx(0.005));
  CHECK(sc[5].weight == doctest::Approx(0.01));

  ObservationSet d = full_state_set(g, ObservationMode::Discrete);
  d.times = {0.03, 0.1};
  d.data.assign(2, std::vector<double>(7, 0.0));
  const auto sd = schedule_observations(d, tg);
  CHECK(sd[0].step == 3);
  CHECK(sd[1].step == 10);
  CHECK(sd[0].weight == 1.0);
  d.times = {0.035, 0.1};
  try {
    schedule_observations(d, tg);
    FAIL("expected rejection");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("observation 0 at t = 0.035") != std::string::npos);
  }
}

TEST_CASE("single discrete observation against assembled transpose, n = 15") {
  std::mt19937_64 rng(6);
  const Grid1D g(15);
  const std::size_t n = g.size();
  const double dt = 1e-2, eps = 0.1;
  const Field u = random_smooth(g, rng);
  const Trajectory tr = solve_forward(u, 0.05, with_dt(dt), eps);
  ObservationSet obs = full_state_set(g, ObservationMode::Discrete);
  obs.times = {0.05};
  const Field z = random_field(g, rng, 0.1);
  obs.data = {z.vector()};
  const AdjointTrajectory adj = solve_adjoint_discrete(tr, obs);

  std::vector<double> P(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) P[i * n + i] = 1.0;
  for (std::size_t k = 0; k < tr.steps(); ++k) {
    const auto Tk = dense_matrix(g, [&](const Field& e) { return tangent_step(tr.states[k], e, dt, eps); });
    P = matmul(Tk, P, n);
  }
  const Field mismatch = tr.final() - z;
  std::vector<double> expected(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) expected[i] += P[j * n + i] * mismatch.values()[j];
  CHECK(l2_norm(adj.initial_sensitivity - Field(g, expected)) <= 1e-12 * l2_norm(Field(g, expected)));
  CHECK(l2_norm(adj.states.back()) == 0.0);
}

TEST_CASE("perfect data, T = 0 and linearity") {
  std::mt19937_64 rng(7);
  const Grid1D g(31);
  const double eps = 0.1;
  const Field u = random_smooth(g, rng);
  const Trajectory tr = solve_forward(u, 0.2, with_dt(0.01), eps);
  ObservationSet obs = full_state_set(g, ObservationMode::Continuous);
  obs.times = tr.time.times();
  for (const auto& s : tr.states) obs.data.push_back(s.vector());
  const AdjointTrajectory perfect = solve_adjoint_discrete(tr, obs);
  for (const auto& p : perfect.states) CHECK(l2_norm(p) == 0.0);
  CHECK(l2_norm(perfect.initial_sensitivity) == 0.0);
  const AdjointTrajectory perfect_c = solve_adjoint_continuous(tr, obs);
  for (const auto& p : perfect_c.states) CHECK(l2_norm(p) == 0.0);

  const Trajectory t0 = solve_forward(u, 0.0, with_dt(0.01), eps);
  ObservationSet o0 = full_state_set(g, ObservationMode::Continuous);
  o0.times = {0.0};
  o0.data = {std::vector<double>(g.size(), 1.0)};
  CHECK(l2_norm(solve_adjoint_discrete(t0, o0).initial_sensitivity) == 0.0);

  // Additivity in the mismatch: adjoint(z1) + adjoint(z2) = adjoint(z1 + z2 - Hy).
  ObservationSet o1 = obs, o2 = obs, o12 = obs;
  for (std::size_t k = 0; k < obs.data.size(); ++k) {
    const Field d1 = random_field(g, rng, 0.1), d2 = random_field(g, rng, 0.1);
    const Field y = tr.states[k];
    o1.data[k] = (y + d1).vector();
    o2.data[k] = (y + d2).vector();
    o12.data[k] = (y + d1 + d2).vector();
  }
  const Field a1 = solve_adjoint_discrete(tr, o1).initial_sensitivity;
  const Field a2 = solve_adjoint_discrete(tr, o2).initial_sensitivity;
  const Field a12 = solve_adjoint_discrete(tr, o12).initial_sensitivity;
  CHECK(l2_norm(a1 + a2 - a12) <= 1e-12 * l2_norm(a12));
}

TEST_CASE("continuous adjoint approaches the discrete adjoint under refinement") {
  const double eps = 0.1, T = 0.5;
  auto truth = [](double x) { return std::sin(pi * x); };
  auto guess = [](double x) { return 0.8 * std::sin(pi * x) + 0.3 * std::sin(2 * pi * x); };
  std::vector<double> diffs;
  for (std::size_t n : {31, 63, 127}) {
    const Grid1D g(n);
    const SolverConfig cfg = SolverConfig::default_for(g, eps, 1.0);
    const auto obs = generate_twin_data(Field::sample(g, truth), ObservationOperator::full_state(g),
                                        NoiseModel{Covariance(n), 0, false}, ObservationMode::Continuous,
                                        T, {}, eps, cfg);
    const Trajectory tr = solve_forward(Field::sample(g, guess), T, cfg, eps);
    const Field pd = solve_adjoint_discrete(tr, obs).initial_sensitivity;
    const Field pc = solve_adjoint_continuous(tr, obs).initial_sensitivity;
    diffs.push_back(l2_norm(pd - pc) / l2_norm(pd));
  }
  CHECK(diffs[0] < 0.05);
  CHECK(diffs[1] < diffs[0]);
  CHECK(diffs[2] < diffs[1]);
  CHECK(diffs[1] / diffs[2] > 3.0);
}

TEST_CASE("adjoint csv") {
  const Grid1D g(3);
  const Trajectory tr = solve_forward(Field(g, {0.1, 0.2, 0.1}), 0.02, with_dt(0.01), 0.1);
  ObservationSet obs = full_state_set(g, ObservationMode::Continuous);
  obs.times = tr.time.times();
  obs.data.assign(3, std::vector<double>{0.0, 0.0, 0.0});
  std::ostringstream os;
  write_adjoint_csv(os, solve_adjoint_discrete(tr, obs));
  CHECK(os.str().rfind("t,x,p\n0,0,0\n", 0) == 0);
}

}
