#pragma once

#include <vector>

#include "burgers4dvar/adjoint.hpp"
#include "burgers4dvar/forward.hpp"
#include "burgers4dvar/grid.hpp"
#include "burgers4dvar/observe.hpp"

namespace burgers4dvar {

/// Everything needed to evaluate
///   J(u) = sum_i c_i ||H y(u)(t_i) - z_i||_Z^2 + beta ||u - background||_V^2
/// where c_i are trapezoid weights (continuous mode, J_T) or 1 (discrete
/// mode, J_4D).
struct AssimilationProblem {
  double eps = 0.1;
  double beta = 1.0;
  Field background;
  double T = 0.0;
  ObservationSet obs;
  SolverConfig cfg;

  const Grid1D& grid() const { return background.grid(); }
  const ObservationOperator& H() const { return obs.op; }
  void validate() const;
};

/// Representers of half the derivative of J: 1/2 DJ(u) v = <l2_repr, v> = <v_repr, v>_V.
struct GradientPair {
  Field l2_repr;
  Field v_repr;
};

/// Cost, its two parts, and the gradient from one forward/adjoint pass.
struct Evaluation {
  double J = 0.0;
  double mismatch = 0.0;
  double regularization = 0.0;
  GradientPair gradient;
  Field p0;  // adjoint sensitivity at t = 0

  /// V norm of the gradient of J itself (twice the representer norm).
  double grad_norm() const { return 2.0 * v_norm(gradient.v_repr); }
};

/// Cost in either observation mode.
double eval_cost(const AssimilationProblem& prob, const Field& u);
/// Continuous-time functional; rejects discrete-mode observations.
double eval_JT(const AssimilationProblem& prob, const Field& u);
/// Discrete-observation functional; rejects continuous-mode observations.
double eval_J4D(const AssimilationProblem& prob, const Field& u);

/// Per-observation ||H y(t_i) - z_i||_Z^2 (unweighted by quadrature).
struct MismatchTerm {
  double t;
  double weight;
  double sq_norm;
};
std::vector<MismatchTerm> mismatch_terms(const AssimilationProblem& prob, const Field& u);

Evaluation evaluate(const AssimilationProblem& prob, const Field& u);

/// l2_repr = p(0) - beta Laplacian(u - background), v_repr = -inv_laplacian(l2_repr).
/// The directional derivative of J along v is 2 <l2_repr, v>.
GradientPair grad_J(const AssimilationProblem& prob, const Field& u);

/// S_T(u) = background + (1/beta) inv_laplacian(p(0)).
Field apply_ST(const AssimilationProblem& prob, const Field& u);
/// Fixed-point map built from an existing evaluation at u.
Field apply_ST(const AssimilationProblem& prob, const Evaluation& eval);

/// v_norm(S_T(u) - u).
double critical_residual(const AssimilationProblem& prob, const Field& u);

}  // namespace burgers4dvar
