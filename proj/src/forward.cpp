#include "burgers4dvar/forward.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>

#include "burgers4dvar/format.hpp"

namespace burgers4dvar {

SolverConfig SolverConfig::default_for(const Grid1D& grid, double eps, double max_abs_u) {
  if (!(eps > 0.0)) throw std::invalid_argument("SolverConfig: eps must be positive");
  const double h = grid.h();
  SolverConfig cfg;
  cfg.dt = 0.25 * h * h / eps;
  if (max_abs_u > 0.0) cfg.dt = std::min(cfg.dt, 0.5 * h / max_abs_u);
  return cfg;
}

TimeGrid TimeGrid::make(double T, const SolverConfig& cfg) {
  if (!(T >= 0.0) || !std::isfinite(T)) throw std::invalid_argument("TimeGrid: T must be >= 0");
  if (!(cfg.dt > 0.0)) throw std::invalid_argument("TimeGrid: dt must be positive");
  TimeGrid tg;
  tg.T = T;
  if (T == 0.0) return tg;
  // Guard against ceil(3.0000000001) when T is an exact multiple of dt.
  const double ratio = T / cfg.dt;
  tg.steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(ratio - 1e-9)));
  tg.dt = T / static_cast<double>(tg.steps);
  return tg;
}

std::vector<double> TimeGrid::times() const {
  std::vector<double> t(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) t[k] = time(k);
  return t;
}

std::size_t TimeGrid::index_of(double t) const {
  const double tol = 1e-9 * std::max(1.0, T);
  if (steps == 0) {
    if (std::abs(t) <= tol) return 0;
  } else {
    const double r = std::round(t / dt);
    if (r >= 0.0 && r <= static_cast<double>(steps) && std::abs(r * dt - t) <= tol) {
      return static_cast<std::size_t>(r);
    }
  }
  throw std::invalid_argument("time " + format_double(t) + " is not on the time grid");
}

Field advection(const Field& y) {
  const std::size_t n = y.size();
  const double inv4h = 1.0 / (4.0 * y.grid().h());
  Field out(y.grid());
  for (std::size_t i = 0; i < n; ++i) {
    const double left = i > 0 ? y[i - 1] : 0.0;
    const double right = i + 1 < n ? y[i + 1] : 0.0;
    out[i] = (right * right - left * left) * inv4h;
  }
  return out;
}

ForwardStepper::ForwardStepper(const Grid1D& grid, double dt, double eps)
    : grid_(grid),
      dt_(dt),
      eps_(eps),
      solver_(grid.size(), 1.0 + 2.0 * dt * eps / (grid.h() * grid.h()),
              -dt * eps / (grid.h() * grid.h())) {
  if (!(dt > 0.0)) throw std::invalid_argument("ForwardStepper: dt must be positive");
  if (!(eps > 0.0)) throw std::invalid_argument("ForwardStepper: eps must be positive");
}

void ForwardStepper::apply_inverse(Field& rhs) const { solver_.solve_in_place(rhs.values()); }

Field ForwardStepper::step(const Field& y) const {
  Field next = y;
  next.axpy(-dt_, advection(y));
  apply_inverse(next);
  return next;
}

namespace {

void check_step(const Field& in, const Field& out, double blowup, std::size_t k) {
  if (!out.all_finite()) throw SolverError("forward step produced nonfinite values", k);
  if (out.max_abs() > blowup * in.max_abs()) {
    throw SolverError("forward step unstable: max-norm grew beyond the blow-up factor; reduce dt",
                      k);
  }
}

}  // namespace

Field step(const Field& y, double dt, double eps) {
  if (!y.all_finite()) throw std::invalid_argument("step: nonfinite input");
  ForwardStepper stepper(y.grid(), dt, eps);
  Field next = stepper.step(y);
  check_step(y, next, SolverConfig{}.blowup_factor, 0);
  return next;
}

Trajectory solve_forward(const Field& u, double T, const SolverConfig& cfg, double eps) {
  if (!u.all_finite()) throw std::invalid_argument("solve_forward: nonfinite initial state");
  Trajectory traj{u.grid(), TimeGrid::make(T, cfg), eps, {}};
  traj.states.reserve(traj.time.steps + 1);
  traj.states.push_back(u);
  if (traj.time.steps == 0) return traj;
  ForwardStepper stepper(u.grid(), traj.time.dt, eps);
  for (std::size_t k = 0; k < traj.time.steps; ++k) {
    const Field& prev = traj.states.back();
    Field next = stepper.step(prev);
    check_step(prev, next, cfg.blowup_factor, k);
    traj.states.push_back(std::move(next));
  }
  return traj;
}

namespace {

// Fine quadrature resolution for the Cole-Hopf initial transform.
constexpr std::size_t kColeHopfPanels = 1u << 14;

Field cole_hopf_from_samples(const std::vector<double>& u_fine, const Grid1D& grid, double t,
                             double eps, int n_modes) {
  if (!(t >= 0.0)) throw std::invalid_argument("cole_hopf_reference: t must be >= 0");
  if (n_modes < 1) throw std::invalid_argument("cole_hopf_reference: n_modes must be >= 1");
  if (!(eps > 0.0)) throw std::invalid_argument("cole_hopf_reference: eps must be positive");
  const std::size_t m = u_fine.size() - 1;
  const double dx = 1.0 / static_cast<double>(m);

  // phi_0(x) = exp(-(1/2eps) int_0^x u), shifted so its largest value is 1.
  std::vector<double> primitive(m + 1, 0.0);
  for (std::size_t j = 1; j <= m; ++j) {
    primitive[j] = primitive[j - 1] + 0.5 * dx * (u_fine[j - 1] + u_fine[j]);
  }
  const double pmin = *std::min_element(primitive.begin(), primitive.end());
  std::vector<double> phi0(m + 1);
  for (std::size_t j = 0; j <= m; ++j) phi0[j] = std::exp(-(primitive[j] - pmin) / (2.0 * eps));

  // Cosine coefficients by the trapezoid rule, spectrally accurate for the
  // smooth even extension.
  const double pi = std::numbers::pi;
  std::vector<double> coeff(static_cast<std::size_t>(n_modes) + 1, 0.0);
  for (int k = 0; k <= n_modes; ++k) {
    double s = 0.0;
    for (std::size_t j = 0; j <= m; ++j) {
      const double w = (j == 0 || j == m) ? 0.5 : 1.0;
      s += w * phi0[j] * std::cos(k * pi * static_cast<double>(j) * dx);
    }
    coeff[static_cast<std::size_t>(k)] = (k == 0 ? 1.0 : 2.0) * s * dx;
  }
  for (int k = 1; k <= n_modes; ++k) {
    coeff[static_cast<std::size_t>(k)] *= std::exp(-eps * k * k * pi * pi * t);
  }

  Field y(grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = grid.x(i);
    double phi = coeff[0];
    double phi_x = 0.0;
    for (int k = 1; k <= n_modes; ++k) {
      const double c = coeff[static_cast<std::size_t>(k)];
      phi += c * std::cos(k * pi * x);
      phi_x -= c * k * pi * std::sin(k * pi * x);
    }
    if (!(phi > std::numeric_limits<double>::min())) {
      throw std::runtime_error(
          "cole_hopf_reference: transformed solution lost positivity; increase n_modes");
    }
    y[i] = -2.0 * eps * phi_x / phi;
  }
  return y;
}

}  // namespace

Field cole_hopf_reference(const Profile& u, const Grid1D& grid, double t, double eps,
                          int n_modes) {
  std::vector<double> fine(kColeHopfPanels + 1);
  for (std::size_t j = 0; j <= kColeHopfPanels; ++j) {
    fine[j] = u(static_cast<double>(j) / static_cast<double>(kColeHopfPanels));
  }
  return cole_hopf_from_samples(fine, grid, t, eps, n_modes);
}

Field cole_hopf_reference(const Field& u, double t, double eps, int n_modes) {
  const Grid1D& grid = u.grid();
  const double h = grid.h();
  const std::size_t n = grid.size();
  auto interp = [&](double x) {
    const double s = x / h;
    const auto j = std::min(static_cast<std::size_t>(s), n);  // cell [x_j, x_{j+1}]
    const double frac = s - static_cast<double>(j);
    const double left = (j >= 1 && j <= n) ? u[j - 1] : 0.0;
    const double right = (j + 1 <= n) ? u[j] : 0.0;
    return (1.0 - frac) * left + frac * right;
  };
  return cole_hopf_reference(Profile(interp), grid, t, eps, n_modes);
}

std::vector<double> cumulative_energy_integral(const Trajectory& traj) {
  std::vector<double> out(traj.states.size(), 0.0);
  double prev = v_norm(traj.states[0]);
  prev *= prev;
  for (std::size_t k = 1; k < traj.states.size(); ++k) {
    double cur = v_norm(traj.states[k]);
    cur *= cur;
    out[k] = out[k - 1] + 0.5 * traj.time.dt * (prev + cur);
    prev = cur;
  }
  return out;
}

double energy_integral(const Trajectory& traj) { return cumulative_energy_integral(traj).back(); }

void write_trajectory_csv(std::ostream& os, const Trajectory& traj, std::size_t stride) {
  if (stride == 0) stride = 1;
  os << "t,x,y\n";
  const std::size_t last = traj.states.size() - 1;
  for (std::size_t k = 0; k <= last; ++k) {
    if (k % stride != 0 && k != last) continue;
    const std::string t = format_double(traj.time.time(k));
    const Field& y = traj.states[k];
    os << t << ",0,0\n";
    for (std::size_t i = 0; i < y.size(); ++i) {
      os << t << ',' << format_double(traj.grid.x(i)) << ',' << format_double(y[i]) << '\n';
    }
    os << t << ",1,0\n";
  }
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "binary checkpoints assume a little-endian host");

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("read_trajectory_binary: truncated checkpoint");
  return v;
}

}  // namespace

void write_trajectory_binary(std::ostream& os, const Trajectory& traj) {
  put<std::uint64_t>(os, traj.grid.size());
  put<std::uint64_t>(os, traj.states.size());
  put<double>(os, traj.time.dt);
  put<double>(os, traj.time.T);
  put<double>(os, traj.eps);
  for (const Field& s : traj.states) {
    os.write(reinterpret_cast<const char*>(s.values().data()),
             static_cast<std::streamsize>(s.size() * sizeof(double)));
  }
}

Trajectory read_trajectory_binary(std::istream& is) {
  const auto n = get<std::uint64_t>(is);
  const auto count = get<std::uint64_t>(is);
  if (count == 0) throw std::runtime_error("read_trajectory_binary: empty trajectory");
  Grid1D grid(n);
  TimeGrid tg;
  tg.dt = get<double>(is);
  tg.T = get<double>(is);
  tg.steps = count - 1;
  const double eps = get<double>(is);
  Trajectory traj{grid, tg, eps, {}};
  traj.states.reserve(count);
  for (std::uint64_t k = 0; k < count; ++k) {
    std::vector<double> v(n);
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!is) throw std::runtime_error("read_trajectory_binary: truncated checkpoint");
    traj.states.emplace_back(grid, std::move(v));
  }
  return traj;
}

}  // namespace burgers4dvar
