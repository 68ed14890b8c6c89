#include "burgers4dvar/cost.hpp"

#include <stdexcept>

namespace burgers4dvar {

void AssimilationProblem::validate() const {
  if (!(eps > 0.0)) throw std::invalid_argument("AssimilationProblem: eps must be positive");
  if (!(beta > 0.0)) throw std::invalid_argument("AssimilationProblem: beta must be positive");
  if (!(T >= 0.0)) throw std::invalid_argument("AssimilationProblem: T must be >= 0");
  if (!(obs.op.grid() == background.grid())) {
    throw std::invalid_argument("AssimilationProblem: observation grid differs from background");
  }
  obs.validate();
  for (double t : obs.times) {
    if (t > T * (1.0 + 1e-12) + 1e-14) {
      throw std::invalid_argument("AssimilationProblem: observation time beyond T");
    }
  }
}

namespace {

void check_grid(const AssimilationProblem& prob, const Field& u) {
  if (!(u.grid() == prob.grid())) {
    throw std::invalid_argument("initial state is not on the problem grid");
  }
}

double regularization(const AssimilationProblem& prob, const Field& u) {
  const double r = v_norm(u - prob.background);
  return prob.beta * r * r;
}

double mismatch(const AssimilationProblem& prob, const Trajectory& traj) {
  double acc = 0.0;
  for (const auto& s : schedule_observations(prob.obs, traj.time)) {
    if (s.weight == 0.0) continue;
    std::vector<double> e = prob.obs.op.apply(traj.states[s.step]);
    const auto& z = prob.obs.data[s.data_index];
    for (std::size_t i = 0; i < e.size(); ++i) e[i] -= z[i];
    acc += s.weight * prob.obs.weighted_sq_norm(e);
  }
  return acc;
}

}  // namespace

double eval_cost(const AssimilationProblem& prob, const Field& u) {
  check_grid(prob, u);
  const Trajectory traj = solve_forward(u, prob.T, prob.cfg, prob.eps);
  return mismatch(prob, traj) + regularization(prob, u);
}

double eval_JT(const AssimilationProblem& prob, const Field& u) {
  if (prob.obs.mode != ObservationMode::Continuous) {
    throw std::invalid_argument("eval_JT: requires continuous-mode observations");
  }
  return eval_cost(prob, u);
}

double eval_J4D(const AssimilationProblem& prob, const Field& u) {
  if (prob.obs.mode != ObservationMode::Discrete) {
    throw std::invalid_argument("eval_J4D: requires discrete-mode observations");
  }
  return eval_cost(prob, u);
}

std::vector<MismatchTerm> mismatch_terms(const AssimilationProblem& prob, const Field& u) {
  check_grid(prob, u);
  const Trajectory traj = solve_forward(u, prob.T, prob.cfg, prob.eps);
  std::vector<MismatchTerm> out;
  for (const auto& s : schedule_observations(prob.obs, traj.time)) {
    std::vector<double> e = prob.obs.op.apply(traj.states[s.step]);
    const auto& z = prob.obs.data[s.data_index];
    for (std::size_t i = 0; i < e.size(); ++i) e[i] -= z[i];
    out.push_back({traj.time.time(s.step), s.weight, prob.obs.weighted_sq_norm(e)});
  }
  return out;
}

Evaluation evaluate(const AssimilationProblem& prob, const Field& u) {
  check_grid(prob, u);
  const Trajectory traj = solve_forward(u, prob.T, prob.cfg, prob.eps);
  AdjointTrajectory adj = solve_adjoint_discrete(traj, prob.obs);
  Evaluation ev{0.0, mismatch(prob, traj), regularization(prob, u),
                GradientPair{Field(u.grid()), Field(u.grid())}, std::move(adj.initial_sensitivity)};
  ev.J = ev.mismatch + ev.regularization;
  Field r = ev.p0;
  r.axpy(-prob.beta, laplacian(u - prob.background));
  ev.gradient.v_repr = -1.0 * inv_laplacian(r);
  ev.gradient.l2_repr = std::move(r);
  return ev;
}

GradientPair grad_J(const AssimilationProblem& prob, const Field& u) {
  return evaluate(prob, u).gradient;
}

Field apply_ST(const AssimilationProblem& prob, const Evaluation& eval) {
  Field s = inv_laplacian(eval.p0);
  s *= 1.0 / prob.beta;
  s += prob.background;
  return s;
}

Field apply_ST(const AssimilationProblem& prob, const Field& u) {
  return apply_ST(prob, evaluate(prob, u));
}

double critical_residual(const AssimilationProblem& prob, const Field& u) {
  return v_norm(apply_ST(prob, u) - u);
}

}  // namespace burgers4dvar
