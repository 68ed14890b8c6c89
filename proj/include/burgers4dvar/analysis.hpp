#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "burgers4dvar/cost.hpp"
#include "burgers4dvar/forward.hpp"
#include "burgers4dvar/problem.hpp"

namespace burgers4dvar {

/// Measured Lipschitz ratios of S_T over a horizon sweep.
struct ProbeResult {
  std::vector<double> T_values;
  std::vector<double> factors;
  std::vector<double> Z2;        // Z(T)^2 of the data at each horizon
  std::vector<double> envelope;  // A (1+T)(1+Z^2) exp(-eps lambda_h T)
  double envelope_A = 0.0;
  double tail_slope = 0.0;       // least-squares slope of log(factor) on the tail
  double decay_reference = 0.0;  // eps * poincare_rate(grid)
  /// Smallest T from which every later factor stays below 1.
  std::optional<double> first_contractive_T;
  std::vector<std::string> errors;  // per-T failures, empty string when fine
};

struct BoundSample {
  double t;
  double measured;
  double bound;
};

struct BoundReport {
  std::string name;
  std::vector<BoundSample> samples;
  double fitted_constant = 0.0;
  bool pass = false;
  double max_violation_ratio = 0.0;
  std::map<std::string, double> diagnostics;
  std::string note;
};

/// Least-squares slope of log(values) against t over the second half of the
/// window, skipping entries at or below `floor`. Returns {slope, points used}.
std::pair<double, std::size_t> tail_log_slope(const std::vector<double>& t,
                                              const std::vector<double>& values, double floor);

ProbeResult contraction_probe(const ProblemTemplate& prob_template, const Field& u1,
                              const Field& u2, const std::vector<double>& T_list);

/// Smallest T in T_grid at which the largest factor over all pairs is below
/// `threshold`; none if no such T exists.
std::optional<double> find_contractive_T(const ProblemTemplate& prob_template,
                                         const std::vector<std::pair<Field, Field>>& pairs,
                                         const std::vector<double>& T_grid,
                                         double threshold = 0.9,
                                         std::vector<double>* max_factors = nullptr);

/// int_0^T ||y_x||^2 dt <= ||u||^2 / (2 eps), relative tolerance 1e-3.
BoundReport verify_energy_bound(const Field& u, double eps, double T, const SolverConfig& cfg);

/// ||p(t)|| <= C sqrt(1 + Z(T)^2 - Z(t)^2) for the adjoint of the given problem.
BoundReport verify_adjoint_bound(const AssimilationProblem& prob, const Field& u);
/// Same, on the template and on one refinement (h and dt halved); passes when
/// the fitted C is finite and changes by less than 2x.
BoundReport verify_adjoint_bound(const ProblemTemplate& prob_template, const ProfileSpec& u);

/// ||delta(t)||^2 <= A ||u1 - u2||^2 exp(-eps lambda_h t) with fitted A, and a
/// tail decay rate of at least 0.9 eps lambda_h.
BoundReport verify_delta_decay(const Field& u1, const Field& u2, double eps, double T,
                               const SolverConfig& cfg);
/// Same at two resolutions; additionally requires A to change by less than 2x.
BoundReport verify_delta_decay(const ProfileSpec& u1, const ProfileSpec& u2, const Grid1D& grid,
                               double eps, double T, const SolverConfig& cfg);

/// Checks u(t) <= exp(A - a0 t) [u(0) + int_0^t b(s) exp(a0 s) ds] with
/// A = int a over the sample window, at every sample, relative slack 1e-6.
BoundReport gronwall_check(const std::vector<double>& a_samples, double a0,
                           const std::vector<double>& b_samples,
                           const std::vector<double>& u_samples, double dt);

std::string bound_report_to_json(const BoundReport& report);
/// `t,measured,bound` rows.
void write_bound_csv(std::ostream& os, const BoundReport& report);
std::string probe_result_to_json(const ProbeResult& probe);
/// `T,factor,envelope` rows.
void write_probe_csv(std::ostream& os, const ProbeResult& probe);

}  // namespace burgers4dvar
