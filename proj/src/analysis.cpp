#include "burgers4dvar/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

#include "burgers4dvar/adjoint.hpp"
#include "burgers4dvar/format.hpp"

namespace burgers4dvar {

namespace {

constexpr std::size_t kMaxReportSamples = 2000;

std::size_t sample_stride(std::size_t count) {
  return std::max<std::size_t>(1, (count + kMaxReportSamples - 1) / kMaxReportSamples);
}

void push_thinned(BoundReport& report, std::size_t k, std::size_t last, std::size_t stride,
                  BoundSample s) {
  if (k % stride == 0 || k == last) report.samples.push_back(s);
}

}  // namespace

std::pair<double, std::size_t> tail_log_slope(const std::vector<double>& t,
                                              const std::vector<double>& values, double floor) {
  if (t.size() != values.size()) throw std::invalid_argument("tail_log_slope: size mismatch");
  if (t.empty()) return {0.0, 0};
  const double t_mid = 0.5 * (t.front() + t.back());
  double st = 0, sv = 0, stt = 0, stv = 0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t_mid || !(values[i] > floor) || !std::isfinite(values[i])) continue;
    const double lv = std::log(values[i]);
    st += t[i];
    sv += lv;
    stt += t[i] * t[i];
    stv += t[i] * lv;
    ++count;
  }
  if (count < 2) return {0.0, count};
  const double n = static_cast<double>(count);
  const double denom = n * stt - st * st;
  if (denom == 0.0) return {0.0, count};
  return {(n * stv - st * sv) / denom, count};
}

ProbeResult contraction_probe(const ProblemTemplate& prob_template, const Field& u1,
                              const Field& u2, const std::vector<double>& T_list) {
  check_same_grid(u1, u2, "contraction_probe");
  const double dv = v_norm(u2 - u1);
  if (!(dv > 0.0)) throw std::invalid_argument("contraction_probe: u1 and u2 coincide");
  for (std::size_t i = 1; i < T_list.size(); ++i) {
    if (!(T_list[i] > T_list[i - 1])) {
      throw std::invalid_argument("contraction_probe: T_list must be increasing");
    }
  }
  ProbeResult res;
  res.decay_reference = prob_template.eps * poincare_rate(prob_template.grid());
  for (double T : T_list) {
    res.T_values.push_back(T);
    double factor = std::numeric_limits<double>::quiet_NaN();
    double z2 = std::numeric_limits<double>::quiet_NaN();
    std::string error;
    try {
      const AssimilationProblem prob = prob_template.with_horizon(T).instantiate();
      z2 = integrated_data_norm(prob.obs, T);
      if (T == 0.0) {
        factor = 0.0;
      } else {
        factor = v_norm(apply_ST(prob, u2) - apply_ST(prob, u1)) / dv;
      }
    } catch (const std::exception& e) {
      error = e.what();
    }
    res.factors.push_back(factor);
    res.Z2.push_back(z2);
    res.errors.push_back(error);
  }

  const double rate = res.decay_reference;
  auto shape = [&](std::size_t i) {
    return (1.0 + res.T_values[i]) * (1.0 + res.Z2[i]) * std::exp(-rate * res.T_values[i]);
  };
  for (std::size_t i = 0; i < res.T_values.size(); ++i) {
    if (std::isfinite(res.factors[i]) && std::isfinite(res.Z2[i]) && shape(i) > 0.0) {
      res.envelope_A = std::max(res.envelope_A, res.factors[i] / shape(i));
    }
  }
  for (std::size_t i = 0; i < res.T_values.size(); ++i) {
    res.envelope.push_back(std::isfinite(res.Z2[i]) ? res.envelope_A * shape(i)
                                                    : std::numeric_limits<double>::quiet_NaN());
  }
  res.tail_slope = tail_log_slope(res.T_values, res.factors, 1e-300).first;
  for (std::size_t i = res.T_values.size(); i-- > 0;) {
    if (!(res.factors[i] < 1.0)) break;
    res.first_contractive_T = res.T_values[i];
  }
  return res;
}

std::optional<double> find_contractive_T(const ProblemTemplate& prob_template,
                                         const std::vector<std::pair<Field, Field>>& pairs,
                                         const std::vector<double>& T_grid, double threshold,
                                         std::vector<double>* max_factors) {
  if (pairs.size() < 3) throw std::invalid_argument("find_contractive_T: need at least 3 pairs");
  std::vector<double> worst(T_grid.size(), 0.0);
  for (const auto& [u1, u2] : pairs) {
    const ProbeResult probe = contraction_probe(prob_template, u1, u2, T_grid);
    for (std::size_t i = 0; i < T_grid.size(); ++i) {
      const double f = probe.factors[i];
      worst[i] = std::isfinite(f) ? std::max(worst[i], f) : std::numeric_limits<double>::infinity();
    }
  }
  if (max_factors) *max_factors = worst;
  for (std::size_t i = 0; i < T_grid.size(); ++i) {
    if (worst[i] < threshold) return T_grid[i];
  }
  return std::nullopt;
}

BoundReport verify_energy_bound(const Field& u, double eps, double T, const SolverConfig& cfg) {
  const Trajectory traj = solve_forward(u, T, cfg, eps);
  const std::vector<double> energy = cumulative_energy_integral(traj);
  const double l2 = l2_norm(u);
  const double bound = l2 * l2 / (2.0 * eps);

  BoundReport rep;
  rep.name = "energy";
  const std::size_t last = energy.size() - 1;
  const std::size_t stride = sample_stride(energy.size());
  double worst = 0.0;
  for (std::size_t k = 0; k <= last; ++k) {
    push_thinned(rep, k, last, stride, {traj.time.time(k), energy[k], bound});
    if (bound > 0.0) {
      worst = std::max(worst, energy[k] / bound);
    } else if (energy[k] > 0.0) {
      worst = std::numeric_limits<double>::infinity();
    }
  }
  rep.fitted_constant = bound > 0.0 ? energy.back() / bound : 0.0;
  rep.max_violation_ratio = worst;
  rep.pass = worst <= 1.0 + 1e-3;
  rep.diagnostics["bound"] = bound;
  rep.diagnostics["integral"] = energy.back();
  rep.diagnostics["dt"] = traj.time.dt;
  return rep;
}

namespace {

struct AdjointFit {
  double C = 0.0;
  std::vector<BoundSample> samples;
};

AdjointFit fit_adjoint_envelope(const AssimilationProblem& prob, const Field& u) {
  const Trajectory traj = solve_forward(u, prob.T, prob.cfg, prob.eps);
  const AdjointTrajectory adj = solve_adjoint_continuous(traj, prob.obs);
  const std::vector<double> Z2 = integrated_data_profile(prob.obs);
  const double Z2T = Z2.back();
  AdjointFit fit;
  std::vector<double> shape(adj.states.size());
  std::vector<double> norms(adj.states.size());
  for (std::size_t k = 0; k < adj.states.size(); ++k) {
    shape[k] = std::sqrt(std::max(0.0, 1.0 + Z2T - Z2[k]));
    norms[k] = l2_norm(adj.states[k]);
    fit.C = std::max(fit.C, norms[k] / shape[k]);
  }
  const std::size_t stride = sample_stride(norms.size());
  for (std::size_t k = 0; k < norms.size(); ++k) {
    if (k % stride == 0 || k + 1 == norms.size()) {
      fit.samples.push_back({traj.time.time(k), norms[k], fit.C * shape[k]});
    }
  }
  return fit;
}

}  // namespace

BoundReport verify_adjoint_bound(const AssimilationProblem& prob, const Field& u) {
  if (prob.obs.mode != ObservationMode::Continuous) {
    throw std::invalid_argument("verify_adjoint_bound: requires continuous-mode observations");
  }
  const AdjointFit fit = fit_adjoint_envelope(prob, u);
  BoundReport rep;
  rep.name = "adjoint-bound";
  rep.samples = fit.samples;
  rep.fitted_constant = fit.C;
  rep.max_violation_ratio = fit.C > 0.0 ? 1.0 : 0.0;
  rep.pass = std::isfinite(fit.C);
  rep.note = "single resolution; refinement stability not assessed";
  return rep;
}

BoundReport verify_adjoint_bound(const ProblemTemplate& prob_template, const ProfileSpec& u) {
  const AssimilationProblem coarse = prob_template.instantiate();
  const AssimilationProblem fine = prob_template.refined().instantiate();
  const AdjointFit fit = fit_adjoint_envelope(coarse, u.sample(coarse.grid()));
  const AdjointFit fit_fine = fit_adjoint_envelope(fine, u.sample(fine.grid()));

  BoundReport rep;
  rep.name = "adjoint-bound";
  rep.samples = fit.samples;
  rep.fitted_constant = fit.C;
  rep.max_violation_ratio = fit.C > 0.0 ? 1.0 : 0.0;
  rep.diagnostics["C_refined"] = fit_fine.C;
  double ratio = 1.0;
  if (fit.C > 0.0 || fit_fine.C > 0.0) {
    ratio = std::max(fit.C, fit_fine.C) / std::min(fit.C, fit_fine.C);
  }
  rep.diagnostics["refinement_ratio"] = ratio;
  rep.pass = std::isfinite(fit.C) && std::isfinite(fit_fine.C) && ratio < 2.0;
  return rep;
}

namespace {

struct DeltaFit {
  double A = 0.0;
  double rate = 0.0;
  std::size_t fit_points = 0;
  bool truncated = false;
  std::vector<BoundSample> samples;
};

DeltaFit fit_delta(const Field& u1, const Field& u2, double eps, double T, const SolverConfig& cfg) {
  const Trajectory t1 = solve_forward(u1, T, cfg, eps);
  const Trajectory t2 = solve_forward(u2, T, cfg, eps);
  const double lambda = poincare_rate(u1.grid());
  const double v = l2_norm(u1 - u2);
  const double v2 = v * v;
  DeltaFit fit;
  std::vector<double> times(t1.states.size());
  std::vector<double> d2(t1.states.size());
  for (std::size_t k = 0; k < t1.states.size(); ++k) {
    times[k] = t1.time.time(k);
    const double d = l2_norm(t1.states[k] - t2.states[k]);
    d2[k] = d * d;
    if (v2 > 0.0) fit.A = std::max(fit.A, d2[k] * std::exp(eps * lambda * times[k]) / v2);
  }
  // ||delta|| below 1e-14 is round-off.
  constexpr double kFloor = 1e-28;
  fit.truncated = std::any_of(d2.begin(), d2.end(), [](double x) { return x <= kFloor; });
  std::tie(fit.rate, fit.fit_points) = tail_log_slope(times, d2, kFloor);
  const std::size_t stride = sample_stride(d2.size());
  for (std::size_t k = 0; k < d2.size(); ++k) {
    if (k % stride == 0 || k + 1 == d2.size()) {
      fit.samples.push_back({times[k], d2[k], fit.A * v2 * std::exp(-eps * lambda * times[k])});
    }
  }
  return fit;
}

BoundReport delta_report(const DeltaFit& fit, double eps, const Grid1D& grid) {
  BoundReport rep;
  rep.name = "delta-decay";
  rep.samples = fit.samples;
  rep.fitted_constant = fit.A;
  const double reference = eps * poincare_rate(grid);
  rep.diagnostics["tail_rate"] = fit.rate;
  rep.diagnostics["reference_rate"] = reference;
  rep.diagnostics["fit_points"] = static_cast<double>(fit.fit_points);
  if (fit.truncated) rep.note = "fit window truncated where ||delta|| fell below 1e-14";
  rep.max_violation_ratio = fit.A > 0.0 ? 1.0 : 0.0;
  rep.pass = std::isfinite(fit.A) && fit.fit_points >= 2 && fit.rate <= -0.9 * reference;
  return rep;
}

}  // namespace

BoundReport verify_delta_decay(const Field& u1, const Field& u2, double eps, double T,
                               const SolverConfig& cfg) {
  check_same_grid(u1, u2, "verify_delta_decay");
  if (v_norm(u1 - u2) == 0.0) {
    BoundReport rep;
    rep.name = "delta-decay";
    rep.pass = true;
    rep.note = "identical initial states; delta vanishes identically";
    const Trajectory t1 = solve_forward(u1, T, cfg, eps);
    rep.samples.push_back({0.0, 0.0, 0.0});
    rep.samples.push_back({t1.time.T, 0.0, 0.0});
    return rep;
  }
  return delta_report(fit_delta(u1, u2, eps, T, cfg), eps, u1.grid());
}

BoundReport verify_delta_decay(const ProfileSpec& u1, const ProfileSpec& u2, const Grid1D& grid,
                               double eps, double T, const SolverConfig& cfg) {
  const DeltaFit coarse = fit_delta(u1.sample(grid), u2.sample(grid), eps, T, cfg);
  const Grid1D fine_grid = grid.refined();
  SolverConfig fine_cfg = cfg;
  fine_cfg.dt = 0.5 * TimeGrid::make(T, cfg).dt;
  if (T == 0.0) fine_cfg.dt = 0.5 * cfg.dt;
  const DeltaFit fine = fit_delta(u1.sample(fine_grid), u2.sample(fine_grid), eps, T, fine_cfg);
  BoundReport rep = delta_report(coarse, eps, grid);
  const double ratio = std::max(coarse.A, fine.A) / std::min(coarse.A, fine.A);
  rep.diagnostics["A_refined"] = fine.A;
  rep.diagnostics["refinement_ratio"] = ratio;
  rep.pass = rep.pass && ratio < 2.0;
  return rep;
}

BoundReport gronwall_check(const std::vector<double>& a_samples, double a0,
                           const std::vector<double>& b_samples,
                           const std::vector<double>& u_samples, double dt) {
  const std::size_t n = u_samples.size();
  if (n < 2 || a_samples.size() != n || b_samples.size() != n) {
    throw std::invalid_argument("gronwall_check: need equally sized sample vectors (>= 2)");
  }
  if (!(dt > 0.0)) throw std::invalid_argument("gronwall_check: dt must be positive");
  if (!(a0 >= 0.0)) throw std::invalid_argument("gronwall_check: a0 must be nonnegative");
  for (std::size_t k = 0; k < n; ++k) {
    if (!(a_samples[k] >= 0.0) || !(b_samples[k] >= 0.0)) {
      throw std::invalid_argument("gronwall_check: a and b must be nonnegative (sample " +
                                  std::to_string(k) + ")");
    }
  }
  auto rhs_f = [&](std::size_t k) { return (a_samples[k] - a0) * u_samples[k] + b_samples[k]; };
  // A sampled right-hand side can peak between samples; allow for that with
  // the local second difference.
  auto curvature = [&](std::size_t k) {
    if (k == 0 || k + 1 >= n) return 0.0;
    return std::abs(rhs_f(k + 1) - 2.0 * rhs_f(k) + rhs_f(k - 1));
  };
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double slope = (u_samples[k + 1] - u_samples[k]) / dt;
    const double f0 = rhs_f(k), f1 = rhs_f(k + 1);
    const double peak = 0.25 * std::max(curvature(k), curvature(k + 1));
    if (slope > std::max(f0, f1) + peak + 1e-6 * (1.0 + std::abs(f0) + std::abs(f1))) {
      throw std::invalid_argument("gronwall_check: samples violate u' <= (a - a0) u + b at step " +
                                  std::to_string(k));
    }
  }

  double A = 0.0;
  for (std::size_t k = 0; k + 1 < n; ++k) A += 0.5 * dt * (a_samples[k] + a_samples[k + 1]);

  BoundReport rep;
  rep.name = "gronwall";
  rep.fitted_constant = A;
  double integral = 0.0;
  double min_slack = std::numeric_limits<double>::infinity();
  double worst = 0.0;
  const std::size_t stride = sample_stride(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * dt;
    if (k > 0) {
      const double tp = static_cast<double>(k - 1) * dt;
      integral += 0.5 * dt * (b_samples[k - 1] * std::exp(a0 * tp) + b_samples[k] * std::exp(a0 * t));
    }
    const double bound = std::exp(A - a0 * t) * (u_samples[0] + integral);
    const double scale = std::max(std::abs(bound), std::numeric_limits<double>::min());
    min_slack = std::min(min_slack, (bound - u_samples[k]) / scale);
    if (bound > 0.0) worst = std::max(worst, u_samples[k] / bound);
    push_thinned(rep, k, n - 1, stride, {t, u_samples[k], bound});
  }
  rep.max_violation_ratio = worst;
  rep.diagnostics["min_relative_slack"] = min_slack;
  rep.pass = min_slack >= -1e-6;
  return rep;
}

std::string bound_report_to_json(const BoundReport& report) {
  nlohmann::json j;
  j["name"] = report.name;
  j["fitted_constant"] = report.fitted_constant;
  j["pass"] = report.pass;
  j["max_violation_ratio"] = report.max_violation_ratio;
  j["diagnostics"] = report.diagnostics;
  j["note"] = report.note;
  j["samples"] = report.samples.size();
  return j.dump(2);
}

void write_bound_csv(std::ostream& os, const BoundReport& report) {
  os << "t,measured,bound\n";
  for (const auto& s : report.samples) {
    os << format_double(s.t) << ',' << format_double(s.measured) << ',' << format_double(s.bound)
       << '\n';
  }
}

std::string probe_result_to_json(const ProbeResult& probe) {
  nlohmann::json j;
  j["T"] = probe.T_values;
  j["factor"] = probe.factors;
  j["Z2"] = probe.Z2;
  j["envelope"] = probe.envelope;
  j["envelope_A"] = probe.envelope_A;
  j["tail_slope"] = probe.tail_slope;
  j["decay_reference"] = probe.decay_reference;
  j["first_contractive_T"] =
      probe.first_contractive_T ? nlohmann::json(*probe.first_contractive_T) : nlohmann::json();
  j["errors"] = probe.errors;
  return j.dump(2);
}

void write_probe_csv(std::ostream& os, const ProbeResult& probe) {
  os << "T,factor,envelope\n";
  for (std::size_t i = 0; i < probe.T_values.size(); ++i) {
    os << format_double(probe.T_values[i]) << ',' << format_double(probe.factors[i]) << ','
       << format_double(probe.envelope[i]) << '\n';
  }
}

}  // namespace burgers4dvar
