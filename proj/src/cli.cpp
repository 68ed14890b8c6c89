#include "burgers4dvar/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "burgers4dvar/analysis.hpp"
#include "burgers4dvar/format.hpp"

#ifndef BURGERS4DVAR_VERSION
#define BURGERS4DVAR_VERSION "0.0.0"
#endif

namespace burgers4dvar {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string library_version() { return BURGERS4DVAR_VERSION; }

namespace {

// Typed view of one config object; remembers which keys were read so that
// leftovers can be reported as unknown.
class Node {
 public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  std::string key_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }
  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    throw ConfigError(key_path(key) + ": " + msg);
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  double number(const std::string& key, double def) {
    const json* v = find(key);
    if (!v) return def;
    if (!v->is_number()) fail(key, "expected a number");
    return v->get<double>();
  }
  std::optional<double> optional_number(const std::string& key) {
    const json* v = find(key);
    if (!v || v->is_null()) return std::nullopt;
    if (!v->is_number()) fail(key, "expected a number");
    return v->get<double>();
  }
  std::int64_t integer(const std::string& key, std::int64_t def) {
    const json* v = find(key);
    if (!v) return def;
    if (!v->is_number_integer()) fail(key, "expected an integer");
    return v->get<std::int64_t>();
  }
  std::size_t count(const std::string& key, std::size_t def) {
    const std::int64_t v = integer(key, static_cast<std::int64_t>(def));
    if (v < 0) fail(key, "must be nonnegative");
    return static_cast<std::size_t>(v);
  }
  bool boolean(const std::string& key, bool def) {
    const json* v = find(key);
    if (!v) return def;
    if (!v->is_boolean()) fail(key, "expected true or false");
    return v->get<bool>();
  }
  std::string string(const std::string& key, const std::string& def) {
    const json* v = find(key);
    if (!v) return def;
    if (!v->is_string()) fail(key, "expected a string");
    return v->get<std::string>();
  }
  std::vector<double> numbers(const std::string& key, std::vector<double> def) {
    const json* v = find(key);
    if (!v) return def;
    if (!v->is_array()) fail(key, "expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : *v) {
      if (!e.is_number()) fail(key, "expected an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }
  std::optional<Node> child(const std::string& key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    return Node(*v, key_path(key));
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ConfigError(key_path(item.key()) + ": unknown key");
    }
  }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const Node& node, const std::string& key, const std::string& msg) {
  if (!ok) node.fail(key, msg);
}

ProfileSpec parse_profile(Node node) {
  const std::string type = node.string("type", "zero");
  ProfileSpec p;
  if (type == "zero") {
    p = ProfileSpec::zero();
  } else if (type == "sines") {
    p = ProfileSpec::sines(node.numbers("amplitudes", {}));
  } else if (type == "hat") {
    const double center = node.number("center", 0.5);
    require(center > 0.0 && center < 1.0, node, "center", "must lie in (0,1)");
    p = ProfileSpec::hat(center, node.number("height", 1.0));
  } else {
    node.fail("type", "expected zero, sines or hat");
  }
  for (double a : p.amplitudes) require(std::isfinite(a), node, "amplitudes", "must be finite");
  node.finish();
  return p;
}

ProfileSpec profile_or(Node& parent, const std::string& key, ProfileSpec def) {
  auto child = parent.child(key);
  return child ? parse_profile(*child) : def;
}

void parse_problem(Node node, ProblemTemplate& t) {
  t.n_interior = node.count("n_interior", t.n_interior);
  require(t.n_interior >= 3, node, "n_interior", "must be at least 3");
  t.eps = node.number("eps", t.eps);
  require(t.eps > 0.0, node, "eps", "must be positive");
  t.beta = node.number("beta", t.beta);
  require(t.beta > 0.0, node, "beta", "must be positive");
  t.T = node.number("T", t.T);
  require(t.T >= 0.0 && std::isfinite(t.T), node, "T", "must be finite and >= 0");
  t.background = profile_or(node, "background", t.background);
  t.truth = profile_or(node, "truth", t.truth);
  const std::string data = node.string("data", "twin");
  if (data == "twin") {
    t.source = ProblemTemplate::DataSource::Twin;
  } else if (data == "constant") {
    t.source = ProblemTemplate::DataSource::Constant;
  } else {
    node.fail("data", "expected twin or constant");
  }

  if (auto obs = node.child("observation")) {
    try {
      t.kind = observation_kind_from_string(obs->string("kind", to_string(t.kind)));
    } catch (const std::invalid_argument&) {
      obs->fail("kind", "expected full, point or window");
    }
    t.locations = obs->numbers("locations", t.locations);
    for (double x : t.locations) require(x > 0.0 && x < 1.0, *obs, "locations", "must lie in (0,1)");
    t.window = obs->number("window", t.window);
    require(t.window >= 0.0, *obs, "window", "must be >= 0");
    if (t.kind != ObservationKind::FullState) {
      require(!t.locations.empty(), *obs, "locations", "required for point and window operators");
    }
    try {
      t.mode = observation_mode_from_string(obs->string("mode", to_string(t.mode)));
    } catch (const std::invalid_argument&) {
      obs->fail("mode", "expected continuous or discrete");
    }
    t.discrete_times = obs->numbers("times", t.discrete_times);
    if (t.mode == ObservationMode::Discrete) {
      require(!t.discrete_times.empty(), *obs, "times", "required in discrete mode");
      for (double s : t.discrete_times) {
        require(s > 0.0 && s <= t.T, *obs, "times", "must lie in (0, T]");
      }
    }
    t.obs_variance = obs->number("variance", t.obs_variance);
    require(t.obs_variance > 0.0, *obs, "variance", "must be positive");
    t.add_noise = obs->boolean("noise", t.add_noise);
    obs->finish();
  }
  if (auto solver = node.child("solver")) {
    t.dt = solver->number("dt", t.dt);
    require(t.dt >= 0.0, *solver, "dt", "must be >= 0 (0 selects the default rule)");
    t.amplitude_hint = solver->number("amplitude_hint", t.amplitude_hint);
    require(t.amplitude_hint >= 0.0, *solver, "amplitude_hint", "must be >= 0");
    solver->finish();
  }
  node.finish();
}

void parse_optimizer(Node node, RunConfig& cfg) {
  const std::string method = node.string("method", "cg");
  if (method == "cg") {
    cfg.method = OptimMethod::ConjugateGradient;
  } else if (method == "gd") {
    cfg.method = OptimMethod::GradientDescent;
  } else if (method == "picard") {
    cfg.method = OptimMethod::Picard;
  } else {
    node.fail("method", "expected cg, gd or picard");
  }
  OptimOptions& o = cfg.optimizer;
  o.max_iterations = static_cast<int>(node.integer("max_iterations", o.max_iterations));
  o.grad_tol = node.number("grad_tol", o.grad_tol);
  o.armijo_c1 = node.number("armijo_c1", o.armijo_c1);
  o.backtrack_factor = node.number("backtrack_factor", o.backtrack_factor);
  o.max_backtracks = static_cast<int>(node.integer("max_backtracks", o.max_backtracks));
  o.initial_step = node.number("initial_step", o.initial_step);
  o.cg_restart = static_cast<int>(node.integer("cg_restart", o.cg_restart));
  o.K_bound = node.optional_number("K_bound");
  node.finish();
  try {
    o.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("optimizer: ") + e.what());
  }
}

void parse_forward(Node node, ForwardSettings& f) {
  f.n_interior = node.count("n_interior", f.n_interior);
  require(f.n_interior >= 3, node, "n_interior", "must be at least 3");
  f.eps = node.number("eps", f.eps);
  require(f.eps > 0.0, node, "eps", "must be positive");
  f.T = node.number("T", f.T);
  require(f.T >= 0.0 && std::isfinite(f.T), node, "T", "must be finite and >= 0");
  f.initial = profile_or(node, "initial", f.initial);
  f.dt = node.number("dt", f.dt);
  require(f.dt >= 0.0, node, "dt", "must be >= 0 (0 selects the default rule)");
  f.stride = node.count("stride", f.stride);
  require(f.stride >= 1, node, "stride", "must be at least 1");
  f.oracle = node.boolean("oracle", f.oracle);
  f.oracle_levels = static_cast<int>(node.integer("oracle_levels", f.oracle_levels));
  require(f.oracle_levels >= 2, node, "oracle_levels", "must be at least 2");
  f.oracle_modes = static_cast<int>(node.integer("oracle_modes", f.oracle_modes));
  require(f.oracle_modes >= 1, node, "oracle_modes", "must be at least 1");
  node.finish();
}

void parse_probe(Node node, ProbeSettings& p) {
  p.u1 = profile_or(node, "u1", p.u1);
  p.u2 = profile_or(node, "u2", p.u2);
  p.T_values = node.numbers("T_values", p.T_values);
  for (std::size_t i = 0; i < p.T_values.size(); ++i) {
    require(p.T_values[i] >= 0.0, node, "T_values", "must be >= 0");
    require(i == 0 || p.T_values[i] > p.T_values[i - 1], node, "T_values", "must be increasing");
  }
  node.finish();
}

void parse_verify(Node node, VerifySettings& v) {
  if (const json* checks = node.find("checks")) {
    if (!checks->is_array()) node.fail("checks", "expected an array of names");
    v.checks.clear();
    for (const auto& c : *checks) {
      if (!c.is_string()) node.fail("checks", "expected an array of names");
      const std::string name = c.get<std::string>();
      if (name != "energy" && name != "adjoint-bound" && name != "delta-decay" && name != "gronwall") {
        node.fail("checks", "unknown check '" + name + "'");
      }
      v.checks.push_back(name);
    }
  }
  if (auto e = node.child("energy")) {
    v.energy_u = profile_or(*e, "u", v.energy_u);
    v.energy_eps = e->number("eps", v.energy_eps);
    require(v.energy_eps > 0.0, *e, "eps", "must be positive");
    v.energy_T = e->number("T", v.energy_T);
    require(v.energy_T >= 0.0, *e, "T", "must be >= 0");
    v.energy_n = e->count("n_interior", v.energy_n);
    require(v.energy_n >= 3, *e, "n_interior", "must be at least 3");
    v.energy_dt = e->number("dt", v.energy_dt);
    require(v.energy_dt >= 0.0, *e, "dt", "must be >= 0");
    e->finish();
  }
  if (auto a = node.child("adjoint")) {
    v.adjoint_u = profile_or(*a, "u", v.adjoint_u);
    a->finish();
  }
  if (auto d = node.child("delta")) {
    v.delta_u1 = profile_or(*d, "u1", v.delta_u1);
    v.delta_u2 = profile_or(*d, "u2", v.delta_u2);
    v.delta_eps = d->number("eps", v.delta_eps);
    require(v.delta_eps > 0.0, *d, "eps", "must be positive");
    v.delta_T = d->number("T", v.delta_T);
    require(v.delta_T > 0.0, *d, "T", "must be positive");
    v.delta_n = d->count("n_interior", v.delta_n);
    require(v.delta_n >= 3, *d, "n_interior", "must be at least 3");
    v.delta_dt = d->number("dt", v.delta_dt);
    require(v.delta_dt >= 0.0, *d, "dt", "must be >= 0");
    d->finish();
  }
  if (auto g = node.child("gronwall")) {
    v.gronwall_instances = static_cast<int>(g->integer("instances", v.gronwall_instances));
    require(v.gronwall_instances >= 1, *g, "instances", "must be at least 1");
    v.gronwall_steps = static_cast<int>(g->integer("steps", v.gronwall_steps));
    require(v.gronwall_steps >= 1, *g, "steps", "must be at least 1");
    v.gronwall_T = g->number("T", v.gronwall_T);
    require(v.gronwall_T > 0.0, *g, "T", "must be positive");
    g->finish();
  }
  node.finish();
}

void parse_sweep(Node node, SweepSettings& s, const ProblemTemplate& t) {
  s.eps = node.numbers("eps", {t.eps});
  s.beta = node.numbers("beta", {t.beta});
  s.T = node.numbers("T", {t.T});
  for (double e : s.eps) require(e > 0.0, node, "eps", "must be positive");
  for (double b : s.beta) require(b > 0.0, node, "beta", "must be positive");
  for (std::size_t i = 0; i < s.T.size(); ++i) {
    require(s.T[i] >= 0.0, node, "T", "must be >= 0");
    require(i == 0 || s.T[i] > s.T[i - 1], node, "T", "must be increasing");
  }
  require(!s.eps.empty() && !s.beta.empty() && !s.T.empty(), node, "eps/beta/T",
          "grids must be nonempty");
  s.starts = node.count("starts", s.starts);
  require(s.starts >= 2, node, "starts", "must be at least 2");
  s.radius_V = node.number("radius_V", s.radius_V);
  require(s.radius_V > 0.0, node, "radius_V", "must be positive");
  s.K_bound = node.number("K_bound", s.K_bound);
  require(s.K_bound > 0.0, node, "K_bound", "must be positive");
  s.pairs = node.count("pairs", s.pairs);
  require(s.pairs >= 3, node, "pairs", "must be at least 3");
  s.threshold = node.number("threshold", s.threshold);
  require(s.threshold > 0.0, node, "threshold", "must be positive");
  node.finish();
}

// Output files of one run; paths are recorded relative to the run directory.
class Emitter {
 public:
  Emitter(fs::path dir, RunRecord& record) : dir_(std::move(dir)), record_(record) {}

  void write(const std::string& name, const std::string& content) {
    std::ofstream os(dir_ / name, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + (dir_ / name).string());
    os << content;
    if (!os) throw std::runtime_error("write failed: " + (dir_ / name).string());
    record_.files.push_back(name);
  }
  template <class Fn>
  void write_with(const std::string& name, Fn&& fn) {
    std::ostringstream os;
    fn(os);
    write(name, os.str());
  }

 private:
  fs::path dir_;
  RunRecord& record_;
};

RunRecord start_record(const std::string& command, const RunConfig& config) {
  RunRecord r;
  r.command = command;
  r.version = library_version();
  r.config_snapshot = config.snapshot;
  return r;
}

OptimResult run_optimizer(const AssimilationProblem& prob, const Field& u0, const RunConfig& cfg) {
  switch (cfg.method) {
    case OptimMethod::ConjugateGradient: return nonlinear_cg(prob, u0, cfg.optimizer);
    case OptimMethod::GradientDescent: return gradient_descent(prob, u0, cfg.optimizer);
    case OptimMethod::Picard: return picard_iterate(prob, u0, cfg.optimizer);
  }
  throw std::logic_error("unreachable optimizer");
}

// Random Gronwall instance: smooth nonnegative a and b, u integrated with RK4
// from u' = (a - a0) u + b.
struct GronwallInstance {
  std::vector<double> a, b, u;
  double a0 = 0.0;
  double dt = 0.0;
};

GronwallInstance make_gronwall_instance(std::mt19937_64& rng, int steps, double T) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double a_amp = 2.0 * unit(rng), a_freq = 1.0 + 5.0 * unit(rng), a_phase = 6.0 * unit(rng);
  const double b_amp = 2.0 * unit(rng), b_freq = 1.0 + 5.0 * unit(rng), b_phase = 6.0 * unit(rng);
  GronwallInstance inst;
  inst.a0 = 3.0 * unit(rng);
  inst.dt = T / steps;
  auto a = [&](double t) { return a_amp * (1.0 + std::sin(a_freq * t + a_phase)); };
  auto b = [&](double t) { return b_amp * (1.0 + std::cos(b_freq * t + b_phase)); };
  auto f = [&](double t, double u) { return (a(t) - inst.a0) * u + b(t); };
  double u = unit(rng);
  for (int k = 0; k <= steps; ++k) {
    const double t = k * inst.dt;
    inst.a.push_back(a(t));
    inst.b.push_back(b(t));
    inst.u.push_back(u);
    const double h = inst.dt;
    const double k1 = f(t, u);
    const double k2 = f(t + 0.5 * h, u + 0.5 * h * k1);
    const double k3 = f(t + 0.5 * h, u + 0.5 * h * k2);
    const double k4 = f(t + h, u + h * k3);
    u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return inst;
}

std::string write_report(Emitter& out, const BoundReport& report) {
  out.write(report.name + ".json", bound_report_to_json(report) + "\n");
  out.write_with(report.name + ".csv", [&](std::ostream& os) { write_bound_csv(os, report); });
  return report.name;
}

}  // namespace

RunConfig parse_run_config(const std::string& text, std::optional<std::uint64_t> seed_override) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  if (seed_override) root["seed"] = *seed_override;

  RunConfig cfg;
  Node node(root, "");
  if (const json* seed = node.find("seed")) {
    if (!seed->is_number_unsigned() && !(seed->is_number_integer() && seed->get<std::int64_t>() >= 0)) {
      node.fail("seed", "expected a nonnegative integer");
    }
    cfg.seed = seed->get<std::uint64_t>();
  }
  if (const json* out = node.find("output")) {
    if (!out->is_string()) node.fail("output", "expected a string");
    cfg.output = out->get<std::string>();
  }
  if (auto p = node.child("problem")) parse_problem(*p, cfg.problem);
  cfg.problem.seed = cfg.seed;
  if (auto o = node.child("optimizer")) {
    parse_optimizer(*o, cfg);
  }
  if (auto f = node.child("forward")) parse_forward(*f, cfg.forward);
  cfg.probe.T_values.clear();
  for (int i = 0; i <= 20; ++i) cfg.probe.T_values.push_back(0.5 * i);
  cfg.probe.u1 = ProfileSpec::sines({0.5});
  cfg.probe.u2 = ProfileSpec::sines({-0.3, 0.4});
  if (auto p = node.child("probe")) parse_probe(*p, cfg.probe);
  if (auto v = node.child("verify")) parse_verify(*v, cfg.verify);
  if (auto s = node.child("sweep")) {
    parse_sweep(*s, cfg.sweep, cfg.problem);
  } else {
    cfg.sweep.eps = {cfg.problem.eps};
    cfg.sweep.beta = {cfg.problem.beta};
    cfg.sweep.T = {cfg.problem.T};
  }
  node.finish();
  cfg.snapshot = root.dump(2) + "\n";
  return cfg;
}

std::string run_record_to_json(const RunRecord& record) {
  json j;
  j["command"] = record.command;
  j["version"] = record.version;
  j["status"] = record.status;
  j["message"] = record.message;
  j["wall_clock_seconds"] = record.wall_clock_seconds;
  j["files"] = record.files;
  j["config"] = record.config_snapshot.empty() ? json() : json::parse(record.config_snapshot);
  return j.dump(2) + "\n";
}

RunRecord cmd_forward(const RunConfig& config, const fs::path& out_dir) {
  RunRecord record = start_record("forward", config);
  Emitter out(out_dir, record);
  const ForwardSettings& f = config.forward;
  const Grid1D grid(f.n_interior);
  SolverConfig cfg = f.dt > 0.0 ? SolverConfig{} : SolverConfig::default_for(grid, f.eps, f.initial.max_abs());
  if (f.dt > 0.0) cfg.dt = f.dt;

  const Trajectory traj = solve_forward(f.initial.sample(grid), f.T, cfg, f.eps);
  out.write_with("trajectory.csv", [&](std::ostream& os) { write_trajectory_csv(os, traj, f.stride); });

  json summary;
  summary["n_interior"] = f.n_interior;
  summary["steps"] = traj.steps();
  summary["dt"] = traj.time.dt;
  summary["final_l2"] = l2_norm(traj.final());
  summary["energy_integral"] = energy_integral(traj);

  if (f.oracle) {
    json levels = json::array();
    std::vector<double> hs, errors;
    Grid1D g = grid;
    double dt = traj.time.dt;
    for (int l = 0; l < f.oracle_levels; ++l) {
      if (l > 0) {
        const Grid1D next = g.refined();
        dt *= (next.h() / g.h()) * (next.h() / g.h());
        g = next;
      }
      SolverConfig lc;
      lc.dt = dt;
      const Trajectory lt = solve_forward(f.initial.sample(g), f.T, lc, f.eps);
      const Field ref = cole_hopf_reference(f.initial.function(), g, f.T, f.eps, f.oracle_modes);
      const double err = l2_norm(lt.final() - ref);
      hs.push_back(g.h());
      errors.push_back(err);
      levels.push_back({{"n_interior", g.size()}, {"h", g.h()}, {"dt", lt.time.dt}, {"l2_error", err}});
    }
    json orders = json::array();
    double min_order = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < errors.size(); ++i) {
      const double p = std::log(errors[i - 1] / errors[i]) / std::log(hs[i - 1] / hs[i]);
      orders.push_back(p);
      min_order = std::min(min_order, p);
    }
    summary["oracle"] = {{"t", f.T}, {"modes", f.oracle_modes}, {"levels", levels},
                         {"orders", orders}, {"observed_order", min_order}};
  }
  out.write("summary.json", summary.dump(2) + "\n");
  record.status = "ok";
  return record;
}

RunRecord cmd_twin(const RunConfig& config, const fs::path& out_dir) {
  RunRecord record = start_record("twin", config);
  Emitter out(out_dir, record);
  const AssimilationProblem prob = config.problem.instantiate();
  out.write("observations.json", observation_set_to_json(prob.obs) + "\n");
  out.write_with("observations.csv", [&](std::ostream& os) { write_observations_csv(os, prob.obs); });

  const OptimResult res = run_optimizer(prob, prob.background, config);
  out.write_with("recovered.csv", [&](std::ostream& os) { write_field_csv(os, res.u_final); });
  out.write_with("history.csv", [&](std::ostream& os) {
    os << "iteration," << (config.method == OptimMethod::Picard ? "residual" : "J") << ",grad_norm\n";
    for (std::size_t i = 0; i < res.grad_norm_history.size(); ++i) {
      const double J = i < res.J_history.size() ? res.J_history[i] : std::nan("");
      os << i << ',' << format_double(J) << ',' << format_double(res.grad_norm_history[i]) << '\n';
    }
  });

  const Field truth = config.problem.truth.sample(prob.grid());
  const double truth_norm = v_norm(truth);
  const double err = v_norm(res.u_final - truth);
  json summary;
  summary["status"] = to_string(res.status);
  summary["iterations"] = res.iterations;
  summary["J"] = eval_cost(prob, res.u_final);
  summary["critical_residual"] = critical_residual(prob, res.u_final);
  summary["recovery_error_V"] = err;
  summary["relative_recovery_error_V"] = truth_norm > 0.0 ? json(err / truth_norm) : json();
  summary["background_distance_V"] = v_norm(res.u_final - prob.background);
  out.write("summary.json", summary.dump(2) + "\n");
  record.status = res.converged() ? "ok" : "checks-failed";
  if (!res.converged()) record.message = "optimizer stopped: " + to_string(res.status);
  return record;
}

RunRecord cmd_probe(const RunConfig& config, const fs::path& out_dir) {
  RunRecord record = start_record("probe", config);
  Emitter out(out_dir, record);
  const Grid1D grid = config.problem.grid();
  const ProbeResult probe = contraction_probe(config.problem, config.probe.u1.sample(grid),
                                              config.probe.u2.sample(grid), config.probe.T_values);
  out.write_with("probe.csv", [&](std::ostream& os) { write_probe_csv(os, probe); });
  out.write("probe.json", probe_result_to_json(probe) + "\n");
  const bool clean = std::all_of(probe.errors.begin(), probe.errors.end(),
                                 [](const std::string& e) { return e.empty(); });
  record.status = clean ? "ok" : "checks-failed";
  if (!clean) record.message = "solver errors at some horizons (see probe.json)";
  return record;
}

RunRecord cmd_verify(const RunConfig& config, const fs::path& out_dir) {
  RunRecord record = start_record("verify", config);
  Emitter out(out_dir, record);
  const VerifySettings& v = config.verify;
  json summary = json::object();
  bool all_pass = true;

  auto run_check = [&](const std::string& name, auto&& fn) {
    try {
      const BoundReport rep = fn();
      write_report(out, rep);
      summary[name] = {{"pass", rep.pass}, {"fitted_constant", rep.fitted_constant}};
      all_pass = all_pass && rep.pass;
    } catch (const std::exception& e) {
      summary[name] = {{"pass", false}, {"error", e.what()}};
      all_pass = false;
    }
  };

  for (const std::string& check : v.checks) {
    if (check == "energy") {
      run_check(check, [&] {
        const Grid1D g(v.energy_n);
        SolverConfig cfg = SolverConfig::default_for(g, v.energy_eps, v.energy_u.max_abs());
        if (v.energy_dt > 0.0) cfg.dt = v.energy_dt;
        return verify_energy_bound(v.energy_u.sample(g), v.energy_eps, v.energy_T, cfg);
      });
    } else if (check == "adjoint-bound") {
      run_check(check, [&] { return verify_adjoint_bound(config.problem, v.adjoint_u); });
    } else if (check == "delta-decay") {
      run_check(check, [&] {
        const Grid1D g(v.delta_n);
        const double amp = std::max(v.delta_u1.max_abs(), v.delta_u2.max_abs());
        SolverConfig cfg = SolverConfig::default_for(g, v.delta_eps, amp);
        if (v.delta_dt > 0.0) cfg.dt = v.delta_dt;
        return verify_delta_decay(v.delta_u1, v.delta_u2, g, v.delta_eps, v.delta_T, cfg);
      });
    } else if (check == "gronwall") {
      run_check(check, [&] {
        std::mt19937_64 rng(config.seed);
        BoundReport worst;
        double worst_slack = std::numeric_limits<double>::infinity();
        int passed = 0;
        for (int i = 0; i < v.gronwall_instances; ++i) {
          const GronwallInstance inst = make_gronwall_instance(rng, v.gronwall_steps, v.gronwall_T);
          BoundReport rep = gronwall_check(inst.a, inst.a0, inst.b, inst.u, inst.dt);
          if (rep.pass) ++passed;
          const double slack = rep.diagnostics["min_relative_slack"];
          if (i == 0 || slack < worst_slack) {
            worst_slack = slack;
            worst = std::move(rep);
          }
        }
        worst.diagnostics["instances"] = v.gronwall_instances;
        worst.diagnostics["passed"] = passed;
        worst.pass = passed == v.gronwall_instances;
        worst.note = "samples from the instance with the smallest slack";
        return worst;
      });
    }
  }
  out.write("verify.json", summary.dump(2) + "\n");
  record.status = all_pass ? "ok" : "checks-failed";
  if (!all_pass) record.message = "one or more checks failed";
  return record;
}

RunRecord cmd_sweep(const RunConfig& config, const fs::path& out_dir, unsigned jobs) {
  RunRecord record = start_record("sweep", config);
  Emitter out(out_dir, record);
  const SweepSettings& s = config.sweep;
  const Grid1D grid = config.problem.grid();

  std::vector<Field> pool = random_starts(grid, 2 * s.pairs, s.radius_V, s.K_bound, config.seed + 1);
  std::vector<std::pair<Field, Field>> pairs;
  for (std::size_t i = 0; i < s.pairs; ++i) pairs.emplace_back(pool[2 * i], pool[2 * i + 1]);

  struct Row {
    double eps, beta, T;
    long clusters = -1;
    double max_factor = std::nan("");
    std::size_t non_converged = 0;
    std::string error;
  };
  std::vector<Row> rows;
  for (double e : s.eps) {
    for (double b : s.beta) {
      for (double T : s.T) rows.push_back({e, b, T, -1, std::nan(""), 0, {}});
    }
  }

  OptimOptions opts = config.optimizer;
  opts.K_bound = s.K_bound;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < rows.size(); i = next++) {
      Row& row = rows[i];
      try {
        const ProblemTemplate t = config.problem.with_eps(row.eps).with_beta(row.beta).with_horizon(row.T);
        const AssimilationProblem prob = t.instantiate();
        const MultiStartReport ms = multi_start(prob, s.starts, s.radius_V, s.K_bound, config.seed, opts, 1);
        row.clusters = static_cast<long>(ms.clusters.size());
        row.non_converged = ms.non_converged;
        double worst = 0.0;
        for (const auto& [u1, u2] : pairs) {
          const ProbeResult pr = contraction_probe(t, u1, u2, {row.T});
          if (!pr.errors[0].empty()) throw std::runtime_error(pr.errors[0]);
          worst = std::max(worst, pr.factors[0]);
        }
        row.max_factor = worst;
      } catch (const std::exception& e) {
        row.error = e.what();
      }
    }
  };
  const unsigned n_threads = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(rows.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> threads;
    for (unsigned i = 0; i < n_threads; ++i) threads.emplace_back(worker);
  }

  out.write_with("sweep.csv", [&](std::ostream& os) {
    os << "eps,beta,T,clusters,max_factor\n";
    for (const Row& r : rows) {
      os << format_double(r.eps) << ',' << format_double(r.beta) << ',' << format_double(r.T) << ','
         << r.clusters << ',' << format_double(r.max_factor) << '\n';
    }
  });

  // Smallest contractive T per (eps, beta), read off the measured factors.
  json contractive = json::array();
  for (double e : s.eps) {
    for (double b : s.beta) {
      json entry = {{"eps", e}, {"beta", b}, {"T", nullptr}};
      for (const Row& r : rows) {
        if (r.eps == e && r.beta == b && r.error.empty() && r.max_factor < s.threshold) {
          entry["T"] = r.T;
          break;
        }
      }
      contractive.push_back(entry);
    }
  }
  json summary;
  summary["rows"] = rows.size();
  summary["pairs"] = s.pairs;
  summary["starts"] = s.starts;
  summary["contractive_T"] = contractive;
  json errors = json::array();
  json nonconv = json::array();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].error.empty()) errors.push_back({{"row", i}, {"error", rows[i].error}});
    nonconv.push_back(rows[i].non_converged);
  }
  summary["non_converged"] = nonconv;
  summary["errors"] = errors;
  out.write("summary.json", summary.dump(2) + "\n");
  record.status = errors.empty() ? "ok" : "checks-failed";
  if (!errors.empty()) record.message = "some sweep rows failed (see summary.json)";
  return record;
}

fs::path resolve_output_dir(const CliOptions& opts, const RunConfig* config) {
  if (opts.out) return *opts.out;
  if (config && config->output) return *config->output;
  if (const char* root = std::getenv("BURGERS4DVAR_OUT"); root && *root) {
    return fs::path(root) / opts.command;
  }
  return fs::path("runs") / opts.command;
}

RunRecord run_command(const CliOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  RunRecord record;
  record.command = opts.command;
  record.version = library_version();

  std::optional<RunConfig> config;
  fs::path out_dir;
  auto finish = [&] {
    record.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) return;
    std::ofstream(out_dir / "run.json", std::ios::binary) << run_record_to_json(record);
  };

  try {
    std::ifstream is(opts.config_path, std::ios::binary);
    if (!is) throw ConfigError("cannot read config file " + opts.config_path.string());
    std::ostringstream text;
    text << is.rdbuf();
    config = parse_run_config(text.str(), opts.seed);
  } catch (const std::exception& e) {
    out_dir = resolve_output_dir(opts, nullptr);
    record.status = "error";
    record.message = e.what();
    finish();
    return record;
  }

  out_dir = resolve_output_dir(opts, &*config);
  record.config_snapshot = config->snapshot;
  try {
    fs::create_directories(out_dir);
    {
      std::ofstream os(out_dir / "config.json", std::ios::binary);
      os << config->snapshot;
      if (!os) throw std::runtime_error("cannot write config.json");
    }
    RunRecord result;
    if (opts.command == "forward") {
      result = cmd_forward(*config, out_dir);
    } else if (opts.command == "twin") {
      result = cmd_twin(*config, out_dir);
    } else if (opts.command == "probe") {
      result = cmd_probe(*config, out_dir);
    } else if (opts.command == "verify") {
      result = cmd_verify(*config, out_dir);
    } else if (opts.command == "sweep") {
      result = cmd_sweep(*config, out_dir, opts.jobs);
    } else {
      throw std::invalid_argument("unknown command '" + opts.command + "'");
    }
    record.status = result.status;
    record.message = result.message;
    record.files = {"config.json"};
    record.files.insert(record.files.end(), result.files.begin(), result.files.end());
  } catch (const std::exception& e) {
    record.status = "error";
    record.message = e.what();
    // Whatever was written before the failure is still listed.
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(out_dir, ec)) {
      const std::string name = entry.path().filename().string();
      if (name != "run.json") record.files.push_back(name);
    }
    std::sort(record.files.begin(), record.files.end());
  }
  finish();
  return record;
}

}  // namespace burgers4dvar
