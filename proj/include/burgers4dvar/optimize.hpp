#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "burgers4dvar/cost.hpp"

namespace burgers4dvar {

struct OptimOptions {
  int max_iterations = 500;
  /// Stop when the V norm of the gradient of J falls below this value
  /// (for picard_iterate: when critical_residual falls below it).
  double grad_tol = 1e-6;
  double armijo_c1 = 1e-4;
  double backtrack_factor = 0.5;
  int max_backtracks = 60;
  /// First trial step along the V-gradient direction; 0 selects 1/beta,
  /// the exact step for the pure regularization term.
  double initial_step = 0.0;
  int cg_restart = 50;
  /// L2 radius of the admissible ball; iterates leaving it stop the run.
  std::optional<double> K_bound;

  void validate() const;
};

enum class OptimStatus { Converged, MaxIterations, LineSearchFailure, LeftKBall, Diverged };

std::string to_string(OptimStatus status);

struct OptimResult {
  Field u_final;
  std::vector<double> J_history;
  std::vector<double> grad_norm_history;
  int iterations = 0;
  OptimStatus status = OptimStatus::MaxIterations;

  bool converged() const { return status == OptimStatus::Converged; }
};

/// Steepest descent in the V metric with Armijo backtracking.
OptimResult gradient_descent(const AssimilationProblem& prob, const Field& u0,
                             const OptimOptions& opts);

/// Polak-Ribiere-plus nonlinear CG in the V metric with periodic restarts.
OptimResult nonlinear_cg(const AssimilationProblem& prob, const Field& u0,
                         const OptimOptions& opts);

/// u_{k+1} = S_T(u_k). grad_norm_history holds the critical residuals.
OptimResult picard_iterate(const AssimilationProblem& prob, const Field& u0,
                           const OptimOptions& opts);

struct Cluster {
  std::vector<std::size_t> members;  // indices into MultiStartReport::results
  std::size_t representative = 0;
  double J = 0.0;
};

struct MultiStartReport {
  std::size_t starts = 0;
  double cluster_tol = 0.0;
  std::vector<Field> initial_states;
  std::vector<OptimResult> results;
  std::vector<Cluster> clusters;
  std::size_t non_converged = 0;
};

/// Random combination of sin(k pi x), k = 1..8, scaled to the given V norm
/// and then shrunk into the L2 ball of radius K_bound if necessary.
std::vector<Field> random_starts(const Grid1D& grid, std::size_t count, double radius_V,
                                 std::optional<double> K_bound, std::uint64_t seed);

/// Single-linkage clusters of the converged results at V distance <= tol.
std::vector<Cluster> cluster_results(const std::vector<OptimResult>& results, double tol);

/// Runs nonlinear_cg from each start (on up to `jobs` threads) and clusters
/// the converged minimizers at V distance 1e-3 * radius_V.
MultiStartReport multi_start(const AssimilationProblem& prob, std::size_t n_starts,
                             double radius_V, std::optional<double> K_bound, std::uint64_t seed,
                             const OptimOptions& opts, unsigned jobs = 1);

MultiStartReport multi_start_from(const AssimilationProblem& prob, std::vector<Field> starts,
                                  double cluster_tol, const OptimOptions& opts,
                                  unsigned jobs = 1);

std::string multi_start_report_to_json(const MultiStartReport& report,
                                       const std::vector<std::string>& representative_paths);

}  // namespace burgers4dvar
