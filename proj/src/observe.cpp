#include "burgers4dvar/observe.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "burgers4dvar/format.hpp"

namespace burgers4dvar {

using nlohmann::json;

std::string to_string(ObservationKind kind) {
  switch (kind) {
    case ObservationKind::FullState: return "full";
    case ObservationKind::PointSampling: return "point";
    case ObservationKind::WindowAveraging: return "window";
  }
  return "unknown";
}

ObservationKind observation_kind_from_string(const std::string& s) {
  if (s == "full") return ObservationKind::FullState;
  if (s == "point") return ObservationKind::PointSampling;
  if (s == "window") return ObservationKind::WindowAveraging;
  throw std::invalid_argument("unknown observation kind '" + s + "' (expected full|point|window)");
}

std::string to_string(ObservationMode mode) {
  return mode == ObservationMode::Continuous ? "continuous" : "discrete";
}

ObservationMode observation_mode_from_string(const std::string& s) {
  if (s == "continuous") return ObservationMode::Continuous;
  if (s == "discrete") return ObservationMode::Discrete;
  throw std::invalid_argument("unknown observation mode '" + s +
                              "' (expected continuous|discrete)");
}

ObservationOperator::ObservationOperator(ObservationKind kind, const Grid1D& grid)
    : kind_(kind), grid_(grid) {}

ObservationOperator ObservationOperator::full_state(const Grid1D& grid) {
  ObservationOperator H(ObservationKind::FullState, grid);
  H.z_weight_ = grid.h();
  return H;
}

namespace {

// Weights of the interpolant at x on the interior nodes touching its cell.
void add_interpolation_weights(const Grid1D& grid, double x, double scale,
                               std::map<std::size_t, double>& row) {
  const double h = grid.h();
  const std::size_t n = grid.size();
  const double s = x / h;
  const auto j = std::min(static_cast<std::size_t>(std::floor(s)), n);
  const double frac = s - static_cast<double>(j);
  if (j >= 1 && j <= n) row[j - 1] += scale * (1.0 - frac);
  if (j + 1 <= n) row[j] += scale * frac;
}

}  // namespace

ObservationOperator ObservationOperator::point_sampling(const Grid1D& grid,
                                                        std::vector<double> locations) {
  if (locations.empty()) throw std::invalid_argument("point_sampling: no sensor locations");
  ObservationOperator H(ObservationKind::PointSampling, grid);
  for (double x : locations) {
    if (!(x > 0.0 && x < 1.0)) {
      throw std::invalid_argument("point_sampling: location " + format_double(x) +
                                  " outside (0,1)");
    }
    std::map<std::size_t, double> row;
    add_interpolation_weights(grid, x, 1.0, row);
    H.rows_.emplace_back(row.begin(), row.end());
  }
  H.locations_ = std::move(locations);
  return H;
}

ObservationOperator ObservationOperator::window_averaging(const Grid1D& grid,
                                                          std::vector<double> centers,
                                                          double width) {
  if (centers.empty()) throw std::invalid_argument("window_averaging: no windows");
  if (!(width >= 0.0)) throw std::invalid_argument("window_averaging: negative width");
  ObservationOperator H(ObservationKind::WindowAveraging, grid);
  const double h = grid.h();
  for (double c : centers) {
    const double a = c - 0.5 * width;
    const double b = c + 0.5 * width;
    if (!(c > 0.0 && c < 1.0) || a < -1e-14 || b > 1.0 + 1e-14) {
      throw std::invalid_argument("window_averaging: window around " + format_double(c) +
                                  " leaves [0,1]");
    }
    std::map<std::size_t, double> row;
    if (width > 0.0) {
      // Exact integral of the piecewise-linear interpolant, cell by cell.
      for (std::size_t cell = 0; cell <= grid.size(); ++cell) {
        const double x0 = static_cast<double>(cell) * h;
        const double x1 = x0 + h;
        const double s = std::max(a, x0);
        const double e = std::min(b, x1);
        if (!(e > s)) continue;
        add_interpolation_weights(grid, s, 0.5 * (e - s) / width, row);
        add_interpolation_weights(grid, e, 0.5 * (e - s) / width, row);
      }
    }
    H.rows_.emplace_back(row.begin(), row.end());
  }
  H.locations_ = std::move(centers);
  H.window_ = width;
  return H;
}

double ObservationOperator::z_inner(std::span<const double> a, std::span<const double> b) const {
  if (a.size() != dim() || b.size() != dim()) {
    throw std::invalid_argument("z_inner: dimension mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return z_weight_ * s;
}

std::vector<double> ObservationOperator::apply(const Field& y) const {
  if (!(y.grid() == grid_)) throw std::invalid_argument("observe: field grid does not match H");
  if (kind_ == ObservationKind::FullState) return y.vector();
  std::vector<double> out(rows_.size(), 0.0);
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    double s = 0.0;
    for (const auto& [i, w] : rows_[r]) s += w * y[i];
    out[r] = s;
  }
  return out;
}

Field ObservationOperator::apply_transpose(std::span<const double> w) const {
  if (w.size() != dim()) throw std::invalid_argument("adjoint_observe: dimension mismatch");
  Field out(grid_);
  const double scale = z_weight_ / grid_.h();
  if (kind_ == ObservationKind::FullState) {
    for (std::size_t i = 0; i < w.size(); ++i) out[i] = scale * w[i];
    return out;
  }
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    for (const auto& [i, weight] : rows_[r]) out[i] += scale * weight * w[r];
  }
  return out;
}

std::vector<double> observe(const ObservationOperator& H, const Field& y) { return H.apply(y); }

Field adjoint_observe(const ObservationOperator& H, std::span<const double> w) {
  return H.apply_transpose(w);
}

Covariance::Covariance(std::size_t m, double variance) : m_(m), matrix_(m * m, 0.0), diagonal_(true) {
  if (m == 0) throw std::invalid_argument("Covariance: dimension must be >= 1");
  if (!(variance > 0.0)) throw std::invalid_argument("Covariance: variance must be positive");
  chol_.assign(m * m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    matrix_[i * m + i] = variance;
    chol_[i * m + i] = std::sqrt(variance);
  }
}

Covariance::Covariance(std::size_t m, std::vector<double> matrix)
    : m_(m), matrix_(std::move(matrix)) {
  if (m == 0) throw std::invalid_argument("Covariance: dimension must be >= 1");
  if (matrix_.size() != m * m) throw std::invalid_argument("Covariance: expected m*m entries");
  double scale = 1.0;
  for (double v : matrix_) scale = std::max(scale, std::abs(v));
  diagonal_ = true;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (std::abs(matrix_[i * m + j] - matrix_[j * m + i]) > 1e-12 * scale) {
        throw std::invalid_argument("Covariance: matrix is not symmetric");
      }
      if (i != j && matrix_[i * m + j] != 0.0) diagonal_ = false;
    }
  }
  chol_.assign(m * m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    double d = matrix_[j * m + j];
    for (std::size_t k = 0; k < j; ++k) d -= chol_[j * m + k] * chol_[j * m + k];
    if (!(d > 0.0)) throw std::invalid_argument("Covariance: matrix is not positive definite");
    const double ljj = std::sqrt(d);
    chol_[j * m + j] = ljj;
    for (std::size_t i = j + 1; i < m; ++i) {
      double s = matrix_[i * m + j];
      for (std::size_t k = 0; k < j; ++k) s -= chol_[i * m + k] * chol_[j * m + k];
      chol_[i * m + j] = s / ljj;
    }
  }
}

std::vector<double> Covariance::solve(std::span<const double> w) const {
  if (w.size() != m_) throw std::invalid_argument("Covariance::solve: dimension mismatch");
  std::vector<double> x(w.begin(), w.end());
  if (diagonal_) {
    for (std::size_t i = 0; i < m_; ++i) x[i] /= matrix_[i * m_ + i];
    return x;
  }
  for (std::size_t i = 0; i < m_; ++i) {
    for (std::size_t k = 0; k < i; ++k) x[i] -= chol_[i * m_ + k] * x[k];
    x[i] /= chol_[i * m_ + i];
  }
  for (std::size_t i = m_; i-- > 0;) {
    for (std::size_t k = i + 1; k < m_; ++k) x[i] -= chol_[k * m_ + i] * x[k];
    x[i] /= chol_[i * m_ + i];
  }
  return x;
}

std::vector<double> Covariance::apply_factor(std::span<const double> xi) const {
  if (xi.size() != m_) throw std::invalid_argument("Covariance::apply_factor: dimension mismatch");
  std::vector<double> out(m_, 0.0);
  for (std::size_t i = 0; i < m_; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k <= i; ++k) s += chol_[i * m_ + k] * xi[k];
    out[i] = s;
  }
  return out;
}

double z_norm(const Covariance& R, std::span<const double> w) {
  const std::vector<double> rw = R.solve(w);
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * rw[i];
  return std::sqrt(std::max(s, 0.0));
}

double ObservationSet::weighted_sq_norm(std::span<const double> w) const {
  const double zn = z_norm(noise.R, w);
  return op.z_weight() * zn * zn;
}

void ObservationSet::validate() const {
  if (times.size() != data.size()) {
    throw std::invalid_argument("ObservationSet: times and data lengths differ");
  }
  if (noise.R.dim() != op.dim()) {
    throw std::invalid_argument("ObservationSet: covariance dimension does not match H");
  }
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (data[i].size() != op.dim()) {
      throw std::invalid_argument("ObservationSet: sample " + std::to_string(i) +
                                  " has wrong dimension");
    }
    if (!(times[i] >= 0.0)) throw std::invalid_argument("ObservationSet: negative time");
    if (i > 0 && !(times[i] > times[i - 1])) {
      throw std::invalid_argument("ObservationSet: times not strictly increasing at index " +
                                  std::to_string(i));
    }
  }
}

ObservationSet generate_twin_data(const Field& u_true, const ObservationOperator& H,
                                  const NoiseModel& noise, ObservationMode mode, double T,
                                  const std::vector<double>& times, double eps,
                                  const SolverConfig& cfg) {
  if (noise.R.dim() != H.dim()) {
    throw std::invalid_argument("generate_twin_data: covariance dimension does not match H");
  }
  const Trajectory traj = solve_forward(u_true, T, cfg, eps);
  ObservationSet obs{H, mode, {}, {}, noise};
  std::vector<std::size_t> steps;
  if (mode == ObservationMode::Continuous) {
    obs.times = traj.time.times();
    for (std::size_t k = 0; k <= traj.steps(); ++k) steps.push_back(k);
  } else {
    obs.times = times;
    for (std::size_t i = 0; i < times.size(); ++i) {
      if (!(times[i] > 0.0) || times[i] > T * (1.0 + 1e-12)) {
        throw std::invalid_argument("generate_twin_data: observation time " +
                                    format_double(times[i]) + " outside (0, T]");
      }
      steps.push_back(traj.time.index_of(times[i]));
    }
  }
  std::mt19937_64 rng(noise.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> xi(H.dim());
  for (std::size_t k : steps) {
    std::vector<double> z = H.apply(traj.states[k]);
    if (noise.enabled) {
      for (double& v : xi) v = normal(rng);
      const std::vector<double> e = noise.R.apply_factor(xi);
      for (std::size_t i = 0; i < z.size(); ++i) z[i] += e[i];
    }
    obs.data.push_back(std::move(z));
  }
  obs.validate();
  return obs;
}

namespace {

double integrated_from_zero(const ObservationSet& obs, double t) {
  if (!(t >= 0.0)) throw std::invalid_argument("integrated_data_norm: t must be >= 0");
  const auto& ts = obs.times;
  if (ts.empty()) return 0.0;
  if (obs.mode == ObservationMode::Discrete) {
    double acc = 0.0;
    double prev = 0.0;
    for (std::size_t i = 0; i < ts.size() && ts[i] <= t; ++i) {
      acc += (ts[i] - prev) * obs.weighted_sq_norm(obs.data[i]);
      prev = ts[i];
    }
    return acc;
  }
  const double T = ts.back();
  if (t > T * (1.0 + 1e-12) + 1e-14) {
    throw std::invalid_argument("integrated_data_norm: t = " + format_double(t) +
                                " beyond the observation window");
  }
  t = std::min(t, T);
  double acc = 0.0;
  double q_prev = obs.weighted_sq_norm(obs.data[0]);
  for (std::size_t k = 1; k < ts.size(); ++k) {
    const double q = obs.weighted_sq_norm(obs.data[k]);
    if (ts[k] <= t) {
      acc += 0.5 * (ts[k] - ts[k - 1]) * (q_prev + q);
    } else {
      const double s = (t - ts[k - 1]) / (ts[k] - ts[k - 1]);
      const double q_t = q_prev + s * (q - q_prev);
      acc += 0.5 * (t - ts[k - 1]) * (q_prev + q_t);
      break;
    }
    q_prev = q;
  }
  return acc;
}

}  // namespace

double integrated_data_norm(const ObservationSet& obs, double t) {
  return integrated_from_zero(obs, t);
}

double integrated_data_norm(const ObservationSet& obs, double t0, double t1) {
  if (t1 < t0) throw std::invalid_argument("integrated_data_norm: t1 < t0");
  return integrated_from_zero(obs, t1) - integrated_from_zero(obs, t0);
}

std::vector<double> integrated_data_profile(const ObservationSet& obs) {
  std::vector<double> out(obs.times.size(), 0.0);
  double acc = 0.0;
  double prev_t = 0.0;
  double prev_q = 0.0;
  for (std::size_t k = 0; k < obs.times.size(); ++k) {
    const double q = obs.weighted_sq_norm(obs.data[k]);
    if (obs.mode == ObservationMode::Discrete) {
      acc += (obs.times[k] - prev_t) * q;
    } else if (k > 0) {
      acc += 0.5 * (obs.times[k] - prev_t) * (prev_q + q);
    }
    out[k] = acc;
    prev_t = obs.times[k];
    prev_q = q;
  }
  return out;
}

double operator_norm_estimate(const ObservationOperator& H, const Covariance& R,
                              std::uint64_t seed, double tol, int max_iter) {
  if (R.dim() != H.dim()) {
    throw std::invalid_argument("operator_norm_estimate: covariance dimension mismatch");
  }
  const Grid1D& grid = H.grid();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  Field y(grid);
  for (std::size_t i = 0; i < grid.size(); ++i) y[i] = uni(rng);
  y *= 1.0 / v_norm(y);

  auto rayleigh = [&](const Field& v, std::vector<double>& hv) {
    hv = H.apply(v);
    const std::vector<double> rhv = R.solve(hv);
    double s = 0.0;
    for (std::size_t i = 0; i < hv.size(); ++i) s += hv[i] * rhv[i];
    const double vv = v_norm(v);
    return H.z_weight() * s / (vv * vv);
  };

  std::vector<double> hy;
  double sigma2 = rayleigh(y, hy);
  for (int it = 0; it < max_iter; ++it) {
    Field next = inv_laplacian(H.apply_transpose(R.solve(hy)));
    next *= -1.0;
    const double nv = v_norm(next);
    if (nv == 0.0) return 0.0;
    next *= 1.0 / nv;
    const double s2 = rayleigh(next, hy);
    y = std::move(next);
    if (std::abs(s2 - sigma2) <= tol * std::max(s2, 1e-300)) return std::sqrt(s2);
    sigma2 = s2;
  }
  throw std::runtime_error("operator_norm_estimate: power iteration did not converge");
}

std::string observation_set_to_json(const ObservationSet& obs) {
  const std::size_t m = obs.op.dim();
  json R = json::array();
  const auto& mat = obs.noise.R.matrix();
  for (std::size_t i = 0; i < m; ++i) {
    R.push_back(std::vector<double>(mat.begin() + static_cast<std::ptrdiff_t>(i * m),
                                    mat.begin() + static_cast<std::ptrdiff_t>((i + 1) * m)));
  }
  json j;
  j["kind"] = to_string(obs.op.kind());
  j["n_interior"] = obs.op.grid().size();
  j["locations"] = obs.op.locations();
  j["window"] = obs.op.window();
  j["times"] = obs.times;
  j["data"] = obs.data;
  j["R"] = std::move(R);
  j["seed"] = obs.noise.seed;
  j["noise_enabled"] = obs.noise.enabled;
  j["mode"] = to_string(obs.mode);
  return j.dump(2);
}

ObservationSet observation_set_from_json(const std::string& text) {
  const json j = json::parse(text);
  const Grid1D grid(j.at("n_interior").get<std::size_t>());
  const ObservationKind kind = observation_kind_from_string(j.at("kind").get<std::string>());
  ObservationOperator op = ObservationOperator::full_state(grid);
  if (kind == ObservationKind::PointSampling) {
    op = ObservationOperator::point_sampling(grid, j.at("locations").get<std::vector<double>>());
  } else if (kind == ObservationKind::WindowAveraging) {
    op = ObservationOperator::window_averaging(grid, j.at("locations").get<std::vector<double>>(),
                                               j.at("window").get<double>());
  }
  const auto rows = j.at("R").get<std::vector<std::vector<double>>>();
  std::vector<double> flat;
  for (const auto& r : rows) {
    if (r.size() != rows.size()) throw std::invalid_argument("observation JSON: R is not square");
    flat.insert(flat.end(), r.begin(), r.end());
  }
  NoiseModel noise{Covariance(rows.size(), std::move(flat)), j.at("seed").get<std::uint64_t>(),
                   j.value("noise_enabled", true)};
  ObservationSet obs{op, observation_mode_from_string(j.at("mode").get<std::string>()),
                     j.at("times").get<std::vector<double>>(),
                     j.at("data").get<std::vector<std::vector<double>>>(), std::move(noise)};
  obs.validate();
  return obs;
}

void write_observations_csv(std::ostream& os, const ObservationSet& obs) {
  os << 't';
  for (std::size_t i = 0; i < obs.op.dim(); ++i) os << ",z_" << (i + 1);
  os << '\n';
  for (std::size_t k = 0; k < obs.times.size(); ++k) {
    os << format_double(obs.times[k]);
    for (double v : obs.data[k]) os << ',' << format_double(v);
    os << '\n';
  }
}

}  // namespace burgers4dvar
