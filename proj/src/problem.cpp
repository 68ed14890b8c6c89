#include "burgers4dvar/problem.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace burgers4dvar {

ProfileSpec ProfileSpec::sines(std::vector<double> amplitudes) {
  ProfileSpec p;
  p.type = Type::Sines;
  p.amplitudes = std::move(amplitudes);
  return p;
}

ProfileSpec ProfileSpec::hat(double center, double height) {
  if (!(center > 0.0 && center < 1.0)) throw std::invalid_argument("hat: center must be in (0,1)");
  ProfileSpec p;
  p.type = Type::Hat;
  p.center = center;
  p.height = height;
  return p;
}

double ProfileSpec::operator()(double x) const {
  switch (type) {
    case Type::Zero: return 0.0;
    case Type::Sines: {
      double acc = 0.0;
      for (std::size_t k = 0; k < amplitudes.size(); ++k) {
        acc += amplitudes[k] * std::sin(static_cast<double>(k + 1) * std::numbers::pi * x);
      }
      return acc;
    }
    case Type::Hat:
      if (x <= 0.0 || x >= 1.0) return 0.0;
      return x <= center ? height * x / center : height * (1.0 - x) / (1.0 - center);
  }
  return 0.0;
}

Profile ProfileSpec::function() const {
  return [p = *this](double x) { return p(x); };
}

Field ProfileSpec::sample(const Grid1D& grid) const { return Field::sample(grid, function()); }

double ProfileSpec::max_abs() const {
  if (type == Type::Hat) return std::abs(height);
  double m = 0.0;
  for (int j = 0; j <= 4096; ++j) m = std::max(m, std::abs((*this)(j / 4096.0)));
  return m;
}

SolverConfig ProblemTemplate::solver_config() const {
  SolverConfig cfg;
  if (dt > 0.0) {
    cfg.dt = dt;
  } else {
    const double amp = std::max({amplitude_hint, background.max_abs(), truth.max_abs()});
    cfg = SolverConfig::default_for(grid(), eps, amp);
  }
  if (mode != ObservationMode::Discrete || discrete_times.empty() || !(T > 0.0)) return cfg;

  // Shrink dt until every observation time falls on the time grid.
  const std::size_t base = TimeGrid::make(T, cfg).steps;
  for (std::size_t steps = base; steps <= 64 * base; ++steps) {
    bool aligned = true;
    for (double t : discrete_times) {
      const double k = t / T * static_cast<double>(steps);
      if (std::abs(k - std::round(k)) > 1e-9 * std::max(1.0, k)) {
        aligned = false;
        break;
      }
    }
    if (aligned) {
      cfg.dt = T / static_cast<double>(steps);
      return cfg;
    }
  }
  throw std::invalid_argument("observation times cannot be aligned with a time grid of at most " +
                              std::to_string(64 * base) + " steps");
}

ObservationOperator ProblemTemplate::observation_operator() const {
  const Grid1D g = grid();
  switch (kind) {
    case ObservationKind::FullState: return ObservationOperator::full_state(g);
    case ObservationKind::PointSampling: return ObservationOperator::point_sampling(g, locations);
    case ObservationKind::WindowAveraging:
      return ObservationOperator::window_averaging(g, locations, window);
  }
  throw std::logic_error("unreachable observation kind");
}

AssimilationProblem ProblemTemplate::instantiate() const {
  const Grid1D g = grid();
  const SolverConfig cfg = solver_config();
  const ObservationOperator H = observation_operator();
  NoiseModel noise{Covariance(H.dim(), obs_variance), seed, add_noise};

  ObservationSet obs{H, mode, {}, {}, noise};
  const Field truth_field = truth.sample(g);
  if (source == DataSource::Twin) {
    obs = generate_twin_data(truth_field, H, noise, mode, T, discrete_times, eps, cfg);
  } else {
    const std::vector<double> z = H.apply(truth_field);
    obs.times = mode == ObservationMode::Continuous ? TimeGrid::make(T, cfg).times() : discrete_times;
    obs.data.assign(obs.times.size(), z);
    obs.validate();
  }
  AssimilationProblem prob{eps, beta, background.sample(g), T, std::move(obs), cfg};
  prob.validate();
  return prob;
}

ProblemTemplate ProblemTemplate::with_horizon(double horizon) const {
  ProblemTemplate t = *this;
  t.T = horizon;
  return t;
}

ProblemTemplate ProblemTemplate::with_beta(double b) const {
  ProblemTemplate t = *this;
  t.beta = b;
  return t;
}

ProblemTemplate ProblemTemplate::with_eps(double e) const {
  ProblemTemplate t = *this;
  t.eps = e;
  return t;
}

ProblemTemplate ProblemTemplate::refined() const {
  ProblemTemplate t = *this;
  const double current_dt = solver_config().dt;
  t.n_interior = 2 * n_interior + 1;
  t.dt = 0.5 * current_dt;
  return t;
}

}  // namespace burgers4dvar
