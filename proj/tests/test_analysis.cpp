#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "burgers4dvar/analysis.hpp"
#include "support.hpp"

using namespace burgers4dvar;
using std::numbers::pi;

namespace {

ProblemTemplate probe_template() {
  ProblemTemplate t;
  t.n_interior = 31;
  t.eps = 0.2;
  t.beta = 1.0;
  t.truth = ProfileSpec::sines({0.5, 0.2});
  return t;
}

}  // namespace

TEST_SUITE("analysis") {

TEST_CASE("tail log slope") {
  std::vector<double> t, v;
  for (int i = 0; i <= 20; ++i) {
    t.push_back(i * 0.5);
    v.push_back(3.0 * std::exp(-0.7 * i * 0.5));
  }
  const auto [slope, count] = tail_log_slope(t, v, 0.0);
  CHECK(slope == doctest::Approx(-0.7).epsilon(1e-12));
  CHECK(count == 11);
  v[20] = 0.0;
  CHECK(tail_log_slope(t, v, 0.0).second == 10);
}

TEST_CASE("contraction probe") {
  const auto t = probe_template();
  const Grid1D g = t.grid();
  const Field u1 = ProfileSpec::sines({0.6}).sample(g);
  const Field u2 = ProfileSpec::sines({-0.3, 0.4}).sample(g);
  const std::vector<double> Ts{0.0, 0.5, 1.0, 2.0};
  const ProbeResult a = contraction_probe(t, u1, u2, Ts);
  const ProbeResult b = contraction_probe(t, u2, u1, Ts);
  REQUIRE(a.factors.size() == Ts.size());
  CHECK(a.envelope.size() == Ts.size());
  CHECK(a.Z2.size() == Ts.size());
  CHECK(a.factors[0] == 0.0);
  for (std::size_t i = 0; i < Ts.size(); ++i) {
    CHECK(a.errors[i].empty());
    CHECK(a.factors[i] >= 0.0);
    CHECK(a.factors[i] == doctest::Approx(b.factors[i]).epsilon(1e-12));
    CHECK(a.envelope[i] >= a.factors[i] * (1 - 1e-12));
  }
  CHECK(a.decay_reference == doctest::Approx(0.2 * poincare_rate(g)));
  REQUIRE(a.first_contractive_T.has_value());
  CHECK(*a.first_contractive_T == 0.0);

  CHECK_THROWS(contraction_probe(t, u1, u1, Ts));
  CHECK_THROWS(contraction_probe(t, u1, u2, {1.0, 0.5}));

  std::ostringstream os;
  write_probe_csv(os, a);
  CHECK(os.str().rfind("T,factor,envelope\n0,0,", 0) == 0);
  CHECK(probe_result_to_json(a).find("\"tail_slope\"") != std::string::npos);
}

TEST_CASE("probe reports solver errors per horizon") {
  ProblemTemplate t = probe_template();
  t.dt = 0.05;  // far too large for the advection CFL at this amplitude
  t.eps = 1e-3;
  t.truth = ProfileSpec::sines({0.1});
  const Grid1D g = t.grid();
  const ProbeResult r = contraction_probe(t, ProfileSpec::sines({30.0}).sample(g),
                                          ProfileSpec::sines({-30.0}).sample(g), {0.0, 1.0});
  CHECK(r.errors[0].empty());
  CHECK_FALSE(r.errors[1].empty());
  CHECK(std::isnan(r.factors[1]));
}

TEST_CASE("find contractive T") {
  const auto t = probe_template();
  const Grid1D g = t.grid();
  std::vector<std::pair<Field, Field>> pairs;
  for (int i = 0; i < 3; ++i) {
    pairs.emplace_back(ProfileSpec::sines({0.5, 0.1 * i}).sample(g), ProfileSpec::sines({-0.3, 0.2, 0.1 * i}).sample(g));
  }
  const std::vector<double> Ts{0.1, 0.5, 1.0, 2.0};
  const auto big = find_contractive_T(t.with_beta(1e3), pairs, Ts);
  REQUIRE(big.has_value());
  CHECK(*big == 0.1);
  std::vector<double> factors;
  CHECK_FALSE(find_contractive_T(t.with_beta(1e-4), pairs, Ts, 0.9, &factors).has_value());
  CHECK(factors.size() == Ts.size());

  double prev = 1e300;
  for (double beta : {3e-3, 1e-2, 1e-1, 1.0}) {
    const auto T = find_contractive_T(t.with_beta(beta), pairs, Ts);
    const double val = T ? *T : 1e300;
    CHECK(val <= prev);
    prev = val;
  }
  CHECK_THROWS(find_contractive_T(t, {pairs[0]}, Ts));
}

TEST_CASE("energy bound") {
  const Grid1D g(63);
  SolverConfig cfg;
  cfg.dt = 1e-3;
  const BoundReport zero = verify_energy_bound(Field(g), 0.1, 1.0, cfg);
  CHECK(zero.pass);
  CHECK(zero.fitted_constant == 0.0);

  const double eps = 0.1;
  const Field small = ProfileSpec::sines({1e-3}).sample(g);
  for (double T : {0.5, 2.0, 5.0}) {
    const BoundReport r = verify_energy_bound(small, eps, T, SolverConfig::default_for(g, eps, 1e-3));
    CHECK(r.pass);
    CHECK(r.fitted_constant == doctest::Approx(1 - std::exp(-2 * eps * poincare_rate(g) * T)).epsilon(2e-3));
  }

  const Field s2 = ProfileSpec::sines({0.0, 1.0}).sample(g);
  const BoundReport r = verify_energy_bound(s2, 0.05, 10.0, SolverConfig::default_for(g, 0.05, 1.0));
  CHECK(r.pass);
  CHECK(r.max_violation_ratio <= 1.0 + 1e-3);
  CHECK(r.samples.size() <= 2001);
  std::ostringstream os;
  write_bound_csv(os, r);
  CHECK(os.str().rfind("t,measured,bound\n0,0,", 0) == 0);
  CHECK(bound_report_to_json(r).find("\"name\": \"energy\"") != std::string::npos);
}

TEST_CASE("adjoint bound") {
  ProblemTemplate t = probe_template();
  t.eps = 0.1;
  t.T = 1.0;
  t.source = ProblemTemplate::DataSource::Constant;

  // Perfect data: twin data generated from the state being evaluated.
  ProblemTemplate perfect = t;
  perfect.source = ProblemTemplate::DataSource::Twin;
  const BoundReport zero = verify_adjoint_bound(perfect, perfect.truth);
  CHECK(zero.pass);
  CHECK(zero.fitted_constant == 0.0);

  const BoundReport r = verify_adjoint_bound(t, ProfileSpec::sines({0.3}));
  CHECK(r.pass);
  CHECK(r.fitted_constant > 0.0);
  CHECK(std::isfinite(r.fitted_constant));
  CHECK(r.diagnostics.at("refinement_ratio") < 2.0);
  // p(T) = 0 sits under the envelope C at t = T.
  CHECK(r.samples.back().measured == 0.0);
  for (const auto& s : r.samples) CHECK(s.measured <= s.bound * (1 + 1e-12));

  ProblemTemplate d = t;
  d.mode = ObservationMode::Discrete;
  d.discrete_times = {0.5};
  CHECK_THROWS(verify_adjoint_bound(d.instantiate(), ProfileSpec::zero().sample(d.grid())));
}

TEST_CASE("delta decay") {
  const Grid1D g(63);
  const double eps = 0.1;
  const SolverConfig cfg = SolverConfig::default_for(g, eps, 1.0);
  const Field u = ProfileSpec::sines({0.5}).sample(g);
  const BoundReport same = verify_delta_decay(u, u, eps, 1.0, cfg);
  CHECK(same.pass);
  CHECK(same.fitted_constant == 0.0);

  const Field a = ProfileSpec::sines({0.01}).sample(g);
  const Field b = ProfileSpec::sines({0.004, 0.003}).sample(g);
  const BoundReport lin = verify_delta_decay(a, b, eps, 5.0, SolverConfig::default_for(g, eps, 0.01));
  CHECK(lin.pass);
  CHECK(lin.diagnostics.at("tail_rate") == doctest::Approx(-2 * eps * poincare_rate(g)).epsilon(0.1));

  const BoundReport big = verify_delta_decay(ProfileSpec::sines({1.0}), ProfileSpec::sines({0.5, 0.5}), g, eps,
                                             5.0, cfg);
  CHECK(big.pass);
  CHECK(big.diagnostics.at("refinement_ratio") < 2.0);
  for (const auto& s : big.samples) CHECK(s.measured <= s.bound * (1 + 1e-12));
}

TEST_CASE("gronwall check") {
  const int n = 1001;
  const double dt = 2.0 / (n - 1);
  const double a0 = 0.7, u0 = 1.3;
  std::vector<double> zeros(n, 0.0), u(n);
  for (int k = 0; k < n; ++k) u[k] = u0 * std::exp(-a0 * k * dt);
  CHECK(gronwall_check(zeros, a0, zeros, u, dt).pass);

  // a0 = 0, u(0) = 0: u(T) <= e^A int b.
  std::vector<double> a(n, 0.3), b(n, 1.0), v(n);
  for (int k = 0; k < n; ++k) v[k] = (std::exp(0.3 * k * dt) - 1) / 0.3;
  const BoundReport r = gronwall_check(a, 0.0, b, v, dt);
  CHECK(r.pass);
  CHECK(r.samples.back().bound == doctest::Approx(std::exp(0.3 * 2.0) * 2.0).epsilon(1e-9));

  // Randomized instances integrated with forward Euler at equality.
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double aa = 2 * ud(rng), fa = 1 + 4 * ud(rng), bb = 2 * ud(rng), fb = 1 + 4 * ud(rng);
    const double c0 = 3 * ud(rng);
    std::vector<double> as(n), bs(n), us(n);
    double w = ud(rng);
    for (int k = 0; k < n; ++k) {
      const double t = k * dt;
      as[k] = aa * (1 + std::sin(fa * t));
      bs[k] = bb * (1 + std::cos(fb * t));
      us[k] = w;
      w += dt * ((as[k] - c0) * w + bs[k]);
    }
    const BoundReport g = gronwall_check(as, c0, bs, us, dt);
    CHECK(g.pass);
    CHECK(g.diagnostics.at("min_relative_slack") >= 0.0);
  }

  std::vector<double> neg(n, 0.0);
  neg[5] = -1.0;
  CHECK_THROWS(gronwall_check(neg, a0, zeros, u, dt));
  CHECK_THROWS(gronwall_check(zeros, -1.0, zeros, u, dt));
  // Samples growing faster than the hypothesis allows.
  std::vector<double> grow(n);
  for (int k = 0; k < n; ++k) grow[k] = std::exp(k * dt);
  CHECK_THROWS(gronwall_check(zeros, 0.0, zeros, grow, dt));
}

}
