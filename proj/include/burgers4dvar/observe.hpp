#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "burgers4dvar/forward.hpp"
#include "burgers4dvar/grid.hpp"

namespace burgers4dvar {

enum class ObservationKind { FullState, PointSampling, WindowAveraging };

std::string to_string(ObservationKind kind);
ObservationKind observation_kind_from_string(const std::string& s);

/// Linear observation operator H: Field -> R^m.
///
/// The observation space carries the inner product z_weight * a^T R^-1 b.
/// Full-state observations use z_weight = h so that the Z norm is the
/// discrete L2 norm; sensor-type observations use z_weight = 1.
class ObservationOperator {
 public:
  static ObservationOperator full_state(const Grid1D& grid);
  /// Linear interpolation at each location in (0,1).
  static ObservationOperator point_sampling(const Grid1D& grid, std::vector<double> locations);
  /// Mean of the piecewise-linear interpolant over [c - w/2, c + w/2] for each
  /// center c. A zero width yields a row that observes nothing.
  static ObservationOperator window_averaging(const Grid1D& grid, std::vector<double> centers,
                                              double width);

  ObservationKind kind() const { return kind_; }
  const Grid1D& grid() const { return grid_; }
  const std::vector<double>& locations() const { return locations_; }
  double window() const { return window_; }
  std::size_t dim() const { return kind_ == ObservationKind::FullState ? grid_.size() : rows_.size(); }
  double z_weight() const { return z_weight_; }

  /// Unweighted (R = I) Z inner product.
  double z_inner(std::span<const double> a, std::span<const double> b) const;

  std::vector<double> apply(const Field& y) const;
  /// Transpose with respect to the L2 inner product on fields and the
  /// unweighted Z inner product.
  Field apply_transpose(std::span<const double> w) const;

 private:
  using Row = std::vector<std::pair<std::size_t, double>>;
  ObservationOperator(ObservationKind kind, const Grid1D& grid);

  ObservationKind kind_;
  Grid1D grid_;
  std::vector<double> locations_;
  double window_ = 0.0;
  double z_weight_ = 1.0;
  std::vector<Row> rows_;
};

std::vector<double> observe(const ObservationOperator& H, const Field& y);
Field adjoint_observe(const ObservationOperator& H, std::span<const double> w);

/// Symmetric positive-definite observation-error covariance.
class Covariance {
 public:
  explicit Covariance(std::size_t m, double variance = 1.0);
  /// Row-major m x m matrix; must be symmetric to 1e-12 and positive definite.
  Covariance(std::size_t m, std::vector<double> matrix);

  std::size_t dim() const { return m_; }
  const std::vector<double>& matrix() const { return matrix_; }
  bool is_diagonal() const { return diagonal_; }

  /// R^-1 w via the Cholesky factor.
  std::vector<double> solve(std::span<const double> w) const;
  /// L xi with R = L L^T.
  std::vector<double> apply_factor(std::span<const double> xi) const;

 private:
  std::size_t m_;
  std::vector<double> matrix_;
  std::vector<double> chol_;  // lower triangle, row-major
  bool diagonal_ = false;
};

/// sqrt(w^T R^-1 w).
double z_norm(const Covariance& R, std::span<const double> w);

struct NoiseModel {
  Covariance R;
  std::uint64_t seed = 0;
  bool enabled = true;
};

enum class ObservationMode { Continuous, Discrete };

std::string to_string(ObservationMode mode);
ObservationMode observation_mode_from_string(const std::string& s);

struct ObservationSet {
  ObservationOperator op;
  ObservationMode mode = ObservationMode::Continuous;
  std::vector<double> times;
  std::vector<std::vector<double>> data;
  NoiseModel noise;

  /// z_weight * w^T R^-1 w.
  double weighted_sq_norm(std::span<const double> w) const;
  /// Checks times/data shapes and ordering.
  void validate() const;
};

/// Runs the forward model from u_true and samples H y(t) at the requested
/// times, adding N(0, R) noise when noise.enabled. In continuous mode the
/// times are the forward time grid on [0, T] and `times` is ignored.
ObservationSet generate_twin_data(const Field& u_true, const ObservationOperator& H,
                                  const NoiseModel& noise, ObservationMode mode, double T,
                                  const std::vector<double>& times, double eps,
                                  const SolverConfig& cfg);

/// Z(t)^2 = int_0^t ||z||_Z^2: trapezoid rule in continuous mode,
/// gap-weighted cumulative sum in discrete mode.
double integrated_data_norm(const ObservationSet& obs, double t);
/// Z(t1)^2 - Z(t0)^2.
double integrated_data_norm(const ObservationSet& obs, double t0, double t1);
/// Z(t)^2 at every observation time.
std::vector<double> integrated_data_profile(const ObservationSet& obs);

/// Largest singular value of H measured from V = H^1_0 into Z (R-weighted),
/// by power iteration on (-Laplacian)^-1 H^* R^-1 H.
double operator_norm_estimate(const ObservationOperator& H, const Covariance& R,
                              std::uint64_t seed = 1, double tol = 1e-8, int max_iter = 10000);

std::string observation_set_to_json(const ObservationSet& obs);
ObservationSet observation_set_from_json(const std::string& text);
/// `t,z_1..z_m` rows.
void write_observations_csv(std::ostream& os, const ObservationSet& obs);

}  // namespace burgers4dvar
