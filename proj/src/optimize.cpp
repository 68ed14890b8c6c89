#include "burgers4dvar/optimize.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace burgers4dvar {

void OptimOptions::validate() const {
  if (max_iterations < 0) throw std::invalid_argument("OptimOptions: max_iterations < 0");
  if (!(grad_tol > 0.0)) throw std::invalid_argument("OptimOptions: grad_tol must be positive");
  if (!(armijo_c1 > 0.0 && armijo_c1 < 1.0)) {
    throw std::invalid_argument("OptimOptions: armijo_c1 must lie in (0,1)");
  }
  if (!(backtrack_factor > 0.0 && backtrack_factor < 1.0)) {
    throw std::invalid_argument("OptimOptions: backtrack_factor must lie in (0,1)");
  }
  if (initial_step < 0.0) throw std::invalid_argument("OptimOptions: initial_step < 0");
  if (cg_restart < 1) throw std::invalid_argument("OptimOptions: cg_restart must be >= 1");
  if (K_bound && !(*K_bound > 0.0)) throw std::invalid_argument("OptimOptions: K_bound <= 0");
}

std::string to_string(OptimStatus status) {
  switch (status) {
    case OptimStatus::Converged: return "converged";
    case OptimStatus::MaxIterations: return "max-iters";
    case OptimStatus::LineSearchFailure: return "line-search-failure";
    case OptimStatus::LeftKBall: return "left-K-ball";
    case OptimStatus::Diverged: return "diverged";
  }
  return "unknown";
}

namespace {

OptimResult descend(const AssimilationProblem& prob, const Field& u0, const OptimOptions& opts,
                    bool conjugate) {
  opts.validate();
  prob.validate();
  OptimResult res{u0, {}, {}, 0, OptimStatus::MaxIterations};
  Field u = u0;
  Evaluation ev = evaluate(prob, u);
  res.J_history.push_back(ev.J);
  res.grad_norm_history.push_back(ev.grad_norm());

  const double first_step = opts.initial_step > 0.0 ? opts.initial_step : 1.0 / prob.beta;
  double alpha_prev = 0.0;
  Field direction(u.grid());
  Field g_prev(u.grid());

  for (int it = 0;; ++it) {
    res.iterations = it;
    res.u_final = u;
    if (ev.grad_norm() <= opts.grad_tol) {
      res.status = OptimStatus::Converged;
      return res;
    }
    if (it == opts.max_iterations) {
      res.status = OptimStatus::MaxIterations;
      return res;
    }

    const Field& g = ev.gradient.v_repr;
    bool restarted = true;
    if (conjugate && it > 0 && it % opts.cg_restart != 0) {
      const double denom = v_inner(g_prev, g_prev);
      const double pr = denom > 0.0 ? std::max(0.0, v_inner(g, g - g_prev) / denom) : 0.0;
      direction *= pr;
      direction -= g;
      restarted = pr == 0.0;
    } else {
      direction = -1.0 * g;
    }
    // DJ(u) d = 2 <g, d>_V
    double slope = 2.0 * v_inner(g, direction);
    if (!(slope < 0.0) && !restarted) {
      direction = -1.0 * g;
      slope = 2.0 * v_inner(g, direction);
    }
    if (!(slope < 0.0)) {
      res.status = OptimStatus::LineSearchFailure;
      return res;
    }

    double alpha = alpha_prev > 0.0 ? 2.0 * alpha_prev : first_step;
    bool accepted = false;
    std::optional<Evaluation> trial_ev;
    for (int b = 0; b <= opts.max_backtracks; ++b) {
      Field trial = u;
      trial.axpy(alpha, direction);
      double J_trial = std::numeric_limits<double>::infinity();
      try {
        if (b == 0) {
          trial_ev = evaluate(prob, trial);
          J_trial = trial_ev->J;
        } else {
          J_trial = eval_cost(prob, trial);
        }
      } catch (const SolverError&) {
        J_trial = std::numeric_limits<double>::infinity();
      }
      if (J_trial <= ev.J + opts.armijo_c1 * alpha * slope) {
        if (b > 0) trial_ev = evaluate(prob, trial);
        u = std::move(trial);
        accepted = true;
        break;
      }
      alpha *= opts.backtrack_factor;
    }
    if (!accepted) {
      res.status = OptimStatus::LineSearchFailure;
      return res;
    }
    alpha_prev = alpha;
    g_prev = g;
    ev = std::move(*trial_ev);
    res.J_history.push_back(ev.J);
    res.grad_norm_history.push_back(ev.grad_norm());
    if (opts.K_bound && l2_norm(u) > *opts.K_bound) {
      res.iterations = it + 1;
      res.u_final = u;
      res.status = OptimStatus::LeftKBall;
      return res;
    }
  }
}

}  // namespace

OptimResult gradient_descent(const AssimilationProblem& prob, const Field& u0,
                             const OptimOptions& opts) {
  return descend(prob, u0, opts, false);
}

OptimResult nonlinear_cg(const AssimilationProblem& prob, const Field& u0,
                         const OptimOptions& opts) {
  return descend(prob, u0, opts, true);
}

OptimResult picard_iterate(const AssimilationProblem& prob, const Field& u0,
                           const OptimOptions& opts) {
  opts.validate();
  prob.validate();
  OptimResult res{u0, {}, {}, 0, OptimStatus::MaxIterations};
  Field u = u0;
  int growth = 0;
  for (int it = 0;; ++it) {
    const Evaluation ev = evaluate(prob, u);
    Field next = apply_ST(prob, ev);
    const double residual = v_norm(next - u);
    res.J_history.push_back(ev.J);
    res.grad_norm_history.push_back(residual);
    res.iterations = it;
    res.u_final = u;
    if (residual <= opts.grad_tol) {
      res.status = OptimStatus::Converged;
      return res;
    }
    if (it > 0) growth = residual > res.grad_norm_history[it - 1] ? growth + 1 : 0;
    if (growth >= 5) {
      res.status = OptimStatus::Diverged;
      return res;
    }
    if (opts.K_bound && it > 0 && l2_norm(u) > *opts.K_bound) {
      res.status = OptimStatus::LeftKBall;
      return res;
    }
    if (it == opts.max_iterations) {
      res.status = OptimStatus::MaxIterations;
      return res;
    }
    u = std::move(next);
  }
}

std::vector<Field> random_starts(const Grid1D& grid, std::size_t count, double radius_V,
                                 std::optional<double> K_bound, std::uint64_t seed) {
  if (!(radius_V > 0.0)) throw std::invalid_argument("random_starts: radius_V must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Field> starts;
  starts.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    double c[8];
    for (double& v : c) v = normal(rng);
    Field f = Field::sample(grid, [&](double x) {
      double acc = 0.0;
      for (int k = 0; k < 8; ++k) acc += c[k] * std::sin((k + 1) * std::numbers::pi * x);
      return acc;
    });
    f *= radius_V / v_norm(f);
    if (K_bound) {
      const double l2 = l2_norm(f);
      if (l2 > *K_bound) f *= *K_bound / l2;
    }
    starts.push_back(std::move(f));
  }
  return starts;
}

std::vector<Cluster> cluster_results(const std::vector<OptimResult>& results, double tol) {
  const std::size_t n = results.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (std::size_t i = 0; i < n; ++i) {
    if (!results[i].converged()) continue;
    for (std::size_t j = i + 1; j < n; ++j) {
      if (!results[j].converged()) continue;
      if (v_norm(results[i].u_final - results[j].u_final) <= tol) {
        parent[find(i)] = find(j);
      }
    }
  }
  std::vector<Cluster> clusters;
  std::vector<std::ptrdiff_t> slot(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (!results[i].converged()) continue;
    const std::size_t root = find(i);
    if (slot[root] < 0) {
      slot[root] = static_cast<std::ptrdiff_t>(clusters.size());
      clusters.push_back({{}, i, results[i].J_history.back()});
    }
    Cluster& c = clusters[static_cast<std::size_t>(slot[root])];
    c.members.push_back(i);
    if (results[i].J_history.back() < c.J) {
      c.J = results[i].J_history.back();
      c.representative = i;
    }
  }
  return clusters;
}

MultiStartReport multi_start_from(const AssimilationProblem& prob, std::vector<Field> starts,
                                  double cluster_tol, const OptimOptions& opts, unsigned jobs) {
  if (starts.size() < 2) throw std::invalid_argument("multi_start: need at least 2 starts");
  opts.validate();
  MultiStartReport report;
  report.starts = starts.size();
  report.cluster_tol = cluster_tol;
  for (const auto& s : starts) {
    report.results.push_back(OptimResult{s, {}, {}, 0, OptimStatus::MaxIterations});
  }

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (std::size_t i = next++; i < starts.size(); i = next++) {
      try {
        report.results[i] = nonlinear_cg(prob, starts[i], opts);
      } catch (const SolverError&) {
        report.results[i] = OptimResult{starts[i], {}, {}, 0, OptimStatus::LineSearchFailure};
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  const unsigned n_threads = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(starts.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);

  for (const auto& r : report.results) {
    if (!r.converged()) ++report.non_converged;
  }
  report.clusters = cluster_results(report.results, cluster_tol);
  report.initial_states = std::move(starts);
  return report;
}

MultiStartReport multi_start(const AssimilationProblem& prob, std::size_t n_starts,
                             double radius_V, std::optional<double> K_bound, std::uint64_t seed,
                             const OptimOptions& opts, unsigned jobs) {
  if (n_starts < 2) throw std::invalid_argument("multi_start: need at least 2 starts");
  return multi_start_from(prob, random_starts(prob.grid(), n_starts, radius_V, K_bound, seed),
                          1e-3 * radius_V, opts, jobs);
}

std::string multi_start_report_to_json(const MultiStartReport& report,
                                       const std::vector<std::string>& representative_paths) {
  nlohmann::json j;
  j["starts"] = report.starts;
  j["cluster_tol"] = report.cluster_tol;
  j["non_converged"] = report.non_converged;
  j["clusters"] = nlohmann::json::array();
  for (std::size_t c = 0; c < report.clusters.size(); ++c) {
    const Cluster& cl = report.clusters[c];
    nlohmann::json jc;
    jc["size"] = cl.members.size();
    jc["J"] = cl.J;
    jc["members"] = cl.members;
    jc["u_repr_csv_path"] = c < representative_paths.size() ? representative_paths[c] : "";
    j["clusters"].push_back(std::move(jc));
  }
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : report.results) {
    runs.push_back({{"status", to_string(r.status)},
                    {"iterations", r.iterations},
                    {"J", r.J_history.empty() ? 0.0 : r.J_history.back()},
                    {"grad_norm", r.grad_norm_history.empty() ? 0.0 : r.grad_norm_history.back()}});
  }
  j["runs"] = std::move(runs);
  return j.dump(2);
}

}  // namespace burgers4dvar
