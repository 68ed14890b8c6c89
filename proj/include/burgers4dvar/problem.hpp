#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "burgers4dvar/cost.hpp"
#include "burgers4dvar/forward.hpp"
#include "burgers4dvar/observe.hpp"

namespace burgers4dvar {

/// Closed-form initial condition on [0,1], vanishing at both ends.
struct ProfileSpec {
  enum class Type { Zero, Sines, Hat };
  Type type = Type::Zero;
  /// Sines: sum_k amplitudes[k-1] sin(k pi x).
  std::vector<double> amplitudes;
  /// Hat: piecewise-linear peak of `height` at `center`.
  double center = 0.5;
  double height = 1.0;

  static ProfileSpec zero() { return {}; }
  static ProfileSpec sines(std::vector<double> amplitudes);
  static ProfileSpec hat(double center, double height);

  double operator()(double x) const;
  Profile function() const;
  Field sample(const Grid1D& grid) const;
  /// Largest |value| on a fine sampling of [0,1].
  double max_abs() const;
};

/// Grid-independent description of an assimilation problem. Instantiating it
/// on a grid generates the observation data, so refinement studies and
/// horizon sweeps rebuild consistent problems from one description.
struct ProblemTemplate {
  enum class DataSource { Twin, Constant };

  std::size_t n_interior = 63;
  double eps = 0.1;
  double beta = 1.0;
  double T = 1.0;
  ProfileSpec background;
  /// Twin data: truth evolved by the forward model. Constant data: H(truth)
  /// at every observation time.
  ProfileSpec truth;
  DataSource source = DataSource::Twin;

  ObservationKind kind = ObservationKind::FullState;
  std::vector<double> locations;
  double window = 0.0;
  ObservationMode mode = ObservationMode::Continuous;
  std::vector<double> discrete_times;

  /// R = obs_variance * I.
  double obs_variance = 1.0;
  bool add_noise = false;
  std::uint64_t seed = 0;

  /// Fixed time step; 0 applies SolverConfig::default_for with
  /// max(amplitude_hint, |background|, |truth|) so the step does not depend
  /// on the state being evaluated.
  double dt = 0.0;
  double amplitude_hint = 1.0;

  Grid1D grid() const { return Grid1D(n_interior); }
  /// In discrete mode dt is reduced further so that every observation time
  /// is a grid time.
  SolverConfig solver_config() const;
  ObservationOperator observation_operator() const;
  AssimilationProblem instantiate() const;

  ProblemTemplate with_horizon(double horizon) const;
  ProblemTemplate with_beta(double b) const;
  ProblemTemplate with_eps(double e) const;
  /// 2n+1 interior nodes and half the time step.
  ProblemTemplate refined() const;
};

}  // namespace burgers4dvar
