#include "burgers4dvar/adjoint.hpp"

#include <ostream>
#include <stdexcept>
#include <string>

#include "burgers4dvar/format.hpp"

namespace burgers4dvar {

namespace {

// (y_{i+1} v_{i+1} - y_{i-1} v_{i-1}) / (2h): Jacobian of the advection term.
Field advection_jacobian(const Field& y, const Field& v) {
  const std::size_t n = y.size();
  const double inv2h = 1.0 / (2.0 * y.grid().h());
  Field out(y.grid());
  for (std::size_t i = 0; i < n; ++i) {
    const double left = i > 0 ? y[i - 1] * v[i - 1] : 0.0;
    const double right = i + 1 < n ? y[i + 1] * v[i + 1] : 0.0;
    out[i] = (right - left) * inv2h;
  }
  return out;
}

// Transpose of advection_jacobian(y, .): y_j (w_{j-1} - w_{j+1}) / (2h).
Field advection_jacobian_transpose(const Field& y, const Field& w) {
  const std::size_t n = y.size();
  const double inv2h = 1.0 / (2.0 * y.grid().h());
  Field out(y.grid());
  for (std::size_t j = 0; j < n; ++j) {
    const double left = j > 0 ? w[j - 1] : 0.0;
    const double right = j + 1 < n ? w[j + 1] : 0.0;
    out[j] = y[j] * (left - right) * inv2h;
  }
  return out;
}

// Centered first difference with Dirichlet closure.
Field centered_difference(const Field& p) {
  const std::size_t n = p.size();
  const double inv2h = 1.0 / (2.0 * p.grid().h());
  Field out(p.grid());
  for (std::size_t i = 0; i < n; ++i) {
    const double left = i > 0 ? p[i - 1] : 0.0;
    const double right = i + 1 < n ? p[i + 1] : 0.0;
    out[i] = (right - left) * inv2h;
  }
  return out;
}

}  // namespace

Field LinearizedStepper::tangent(const Field& y, const Field& v) const {
  Field out = v;
  out.axpy(-forward_.dt(), advection_jacobian(y, v));
  forward_.apply_inverse(out);
  return out;
}

Field LinearizedStepper::adjoint(const Field& y, const Field& w) const {
  Field mw = w;
  forward_.apply_inverse(mw);  // the diffusion operator is symmetric
  Field out = mw;
  out.axpy(-forward_.dt(), advection_jacobian_transpose(y, mw));
  return out;
}

Field tangent_step(const Field& y, const Field& v, double dt, double eps) {
  check_same_grid(y, v, "tangent_step");
  return LinearizedStepper(y.grid(), dt, eps).tangent(y, v);
}

Field adjoint_step(const Field& y, const Field& w, double dt, double eps) {
  check_same_grid(y, w, "adjoint_step");
  return LinearizedStepper(y.grid(), dt, eps).adjoint(y, w);
}

std::vector<ScheduledObservation> schedule_observations(const ObservationSet& obs,
                                                        const TimeGrid& time) {
  std::vector<ScheduledObservation> out;
  if (obs.mode == ObservationMode::Continuous) {
    if (obs.times.size() != time.steps + 1) {
      throw std::invalid_argument("continuous observations: expected " +
                                  std::to_string(time.steps + 1) + " samples on the time grid, got " +
                                  std::to_string(obs.times.size()));
    }
    for (std::size_t k = 0; k <= time.steps; ++k) {
      if (time.index_of(obs.times[k]) != k) {
        throw std::invalid_argument("continuous observations: sample " + std::to_string(k) +
                                    " is not at grid time " + format_double(time.time(k)));
      }
      double w = time.dt;
      if (k == 0 || k == time.steps) w *= 0.5;
      out.push_back({k, w, k});
    }
    return out;
  }
  for (std::size_t i = 0; i < obs.times.size(); ++i) {
    const double t = obs.times[i];
    if (!(t > 0.0)) {
      throw std::invalid_argument("discrete observation " + std::to_string(i) +
                                  ": times must be > 0, got " + format_double(t));
    }
    std::size_t k = 0;
    try {
      k = time.index_of(t);
    } catch (const std::invalid_argument&) {
      throw std::invalid_argument("discrete observation " + std::to_string(i) + " at t = " +
                                  format_double(t) + " is off the trajectory time grid");
    }
    out.push_back({k, 1.0, i});
  }
  return out;
}

Field mismatch_source(const ObservationSet& obs, const Field& y, std::size_t data_index) {
  std::vector<double> e = obs.op.apply(y);
  const auto& z = obs.data.at(data_index);
  for (std::size_t i = 0; i < e.size(); ++i) e[i] -= z[i];
  return obs.op.apply_transpose(obs.noise.R.solve(e));
}

AdjointTrajectory solve_adjoint_discrete(const Trajectory& traj, const ObservationSet& obs) {
  const std::size_t K = traj.steps();
  std::vector<Field> sources(K + 1, Field(traj.grid));
  for (const auto& s : schedule_observations(obs, traj.time)) {
    if (s.weight == 0.0) continue;
    sources[s.step].axpy(s.weight, mismatch_source(obs, traj.states[s.step], s.data_index));
  }

  AdjointTrajectory adj{traj.grid, traj.time, std::vector<Field>(K + 1, Field(traj.grid)),
                        Field(traj.grid)};
  if (K > 0) {
    LinearizedStepper lin(traj.grid, traj.time.dt, traj.eps);
    for (std::size_t k = K; k-- > 0;) {
      adj.states[k] = lin.adjoint(traj.states[k], adj.states[k + 1] + sources[k + 1]);
    }
  }
  adj.initial_sensitivity = adj.states[0] + sources[0];
  return adj;
}

AdjointTrajectory solve_adjoint_continuous(const Trajectory& traj, const ObservationSet& obs) {
  if (obs.mode != ObservationMode::Continuous) {
    throw std::invalid_argument("solve_adjoint_continuous: requires continuous-mode observations");
  }
  const std::size_t K = traj.steps();
  // Validates the sample layout.
  schedule_observations(obs, traj.time);

  AdjointTrajectory adj{traj.grid, traj.time, std::vector<Field>(K + 1, Field(traj.grid)),
                        Field(traj.grid)};
  if (K > 0) {
    const double dt = traj.time.dt;
    ForwardStepper implicit(traj.grid, dt, traj.eps);
    for (std::size_t k = K; k-- > 0;) {
      const Field& next = adj.states[k + 1];
      const Field& y = traj.states[k + 1];
      Field rhs = next;
      Field transport = centered_difference(next);
      for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] += dt * y[i] * transport[i];
      rhs.axpy(dt, mismatch_source(obs, y, k + 1));
      implicit.apply_inverse(rhs);
      adj.states[k] = std::move(rhs);
    }
  }
  adj.initial_sensitivity = adj.states[0];
  return adj;
}

void write_adjoint_csv(std::ostream& os, const AdjointTrajectory& adj, std::size_t stride) {
  if (stride == 0) stride = 1;
  os << "t,x,p\n";
  const std::size_t last = adj.states.size() - 1;
  for (std::size_t k = 0; k <= last; ++k) {
    if (k % stride != 0 && k != last) continue;
    const std::string t = format_double(adj.time.time(k));
    const Field& p = adj.states[k];
    os << t << ",0,0\n";
    for (std::size_t i = 0; i < p.size(); ++i) {
      os << t << ',' << format_double(adj.grid.x(i)) << ',' << format_double(p[i]) << '\n';
    }
    os << t << ",1,0\n";
  }
}

}  // namespace burgers4dvar
