#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "burgers4dvar/grid.hpp"

namespace burgers4dvar {

using Profile = std::function<double(double)>;

/// Raised when a time step produces a nonfinite or blown-up state.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, std::size_t step)
      : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

struct SolverConfig {
  /// Largest admissible time step. The actual step is T / ceil(T / dt).
  double dt = 1e-3;
  /// A step whose output max-norm exceeds this multiple of the input
  /// max-norm is reported as unstable.
  double blowup_factor = 10.0;

  /// dt = min(0.25 h^2 / eps, 0.5 h / max|u|).
  static SolverConfig default_for(const Grid1D& grid, double eps, double max_abs_u);
};

/// Uniform time grid covering [0, T] exactly.
struct TimeGrid {
  std::size_t steps = 0;
  double dt = 0.0;
  double T = 0.0;

  static TimeGrid make(double T, const SolverConfig& cfg);
  double time(std::size_t k) const { return k == steps ? T : static_cast<double>(k) * dt; }
  std::vector<double> times() const;
  /// Index k with time(k) == t to within 1e-9 relative; throws otherwise.
  std::size_t index_of(double t) const;
};

struct Trajectory {
  Grid1D grid;
  TimeGrid time;
  double eps = 0.0;
  std::vector<Field> states;  // states[k] at time.time(k)

  const Field& initial() const { return states.front(); }
  const Field& final() const { return states.back(); }
  std::size_t steps() const { return time.steps; }
};

/// One semi-implicit step of y_t + (y^2/2)_x = eps y_xx: backward Euler on
/// diffusion, forward Euler on the centered conservative advection flux.
Field step(const Field& y, double dt, double eps);

/// Centered conservative advection term (y_{i+1}^2 - y_{i-1}^2) / (4h).
Field advection(const Field& y);

/// Reusable stepper holding the factorized implicit diffusion operator.
class ForwardStepper {
 public:
  ForwardStepper(const Grid1D& grid, double dt, double eps);

  Field step(const Field& y) const;
  /// Solves (I - dt eps Laplacian) x = rhs in place.
  void apply_inverse(Field& rhs) const;

  double dt() const { return dt_; }
  double eps() const { return eps_; }

 private:
  Grid1D grid_;
  double dt_;
  double eps_;
  TridiagonalSolver solver_;
};

Trajectory solve_forward(const Field& u, double T, const SolverConfig& cfg, double eps);

/// Cole-Hopf reference solution at time t, evaluated at the nodes of u's grid.
/// The initial condition is the piecewise-linear interpolant of u.
Field cole_hopf_reference(const Field& u, double t, double eps, int n_modes);

/// Same, with the initial condition given as a function on [0,1].
Field cole_hopf_reference(const Profile& u, const Grid1D& grid, double t, double eps,
                          int n_modes);

/// Trapezoid-in-time quadrature of v_norm(y(t))^2.
double energy_integral(const Trajectory& traj);

/// Cumulative version: entry k holds the integral up to time(k).
std::vector<double> cumulative_energy_integral(const Trajectory& traj);

/// `t,x,y` rows (boundaries included) for every `stride`-th state and the last.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj, std::size_t stride = 1);

/// Length-prefixed little-endian checkpoint: u64 n_interior, u64 n_states,
/// f64 dt, f64 T, f64 eps, then the states back to back.
void write_trajectory_binary(std::ostream& os, const Trajectory& traj);
Trajectory read_trajectory_binary(std::istream& is);

}  // namespace burgers4dvar
