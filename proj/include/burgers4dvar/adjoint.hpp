#pragma once

#include <cstddef>
#include <vector>

#include "burgers4dvar/forward.hpp"
#include "burgers4dvar/grid.hpp"
#include "burgers4dvar/observe.hpp"

namespace burgers4dvar {

/// Backward adjoint solution stored forward-ordered: states[k] at time(k).
///
/// states[k] collects the sensitivity carried back from observations strictly
/// after t_k, so states.back() (t = T) is identically zero. Observations at
/// t = 0 act on u directly and are folded into `initial_sensitivity`, the
/// L2 representer p(0) used in the gradient.
struct AdjointTrajectory {
  Grid1D grid;
  TimeGrid time;
  std::vector<Field> states;
  Field initial_sensitivity;
};

/// An observation mapped onto the forward time grid with its quadrature weight.
struct ScheduledObservation {
  std::size_t step;
  double weight;
  std::size_t data_index;
};

/// Continuous mode: one entry per grid time with trapezoid weights.
/// Discrete mode: one entry per observation time (t_i > 0) with weight 1.
std::vector<ScheduledObservation> schedule_observations(const ObservationSet& obs,
                                                        const TimeGrid& time);

/// Exact Jacobian of step() at y applied to v.
Field tangent_step(const Field& y, const Field& v, double dt, double eps);

/// Exact discrete-L2 transpose of tangent_step(y, .) applied to w.
Field adjoint_step(const Field& y, const Field& w, double dt, double eps);

/// Reusable tangent/adjoint pair sharing one factorized diffusion operator.
class LinearizedStepper {
 public:
  LinearizedStepper(const Grid1D& grid, double dt, double eps) : forward_(grid, dt, eps) {}

  Field tangent(const Field& y, const Field& v) const;
  Field adjoint(const Field& y, const Field& w) const;

 private:
  ForwardStepper forward_;
};

/// H^*(R^-1 (H y - z)), the L2 representer of half the gradient of
/// ||H y - z||_Z^2 with respect to y.
Field mismatch_source(const ObservationSet& obs, const Field& y, std::size_t data_index);

/// Discrete adjoint: exact transpose of the linearized forward scheme with
/// observation mismatches injected at their time steps.
AdjointTrajectory solve_adjoint_discrete(const Trajectory& traj, const ObservationSet& obs);

/// Semi-implicit backward discretization of
///   -p_t - y p_x - eps p_xx = H^*(R^-1 (H y - z)),  p(T) = 0,
/// used as an independent cross-check of the discrete adjoint.
AdjointTrajectory solve_adjoint_continuous(const Trajectory& traj, const ObservationSet& obs);

/// `t,x,p` rows (boundaries included).
void write_adjoint_csv(std::ostream& os, const AdjointTrajectory& adj, std::size_t stride = 1);

}  // namespace burgers4dvar
