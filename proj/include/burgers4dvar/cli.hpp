#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "burgers4dvar/optimize.hpp"
#include "burgers4dvar/problem.hpp"

namespace burgers4dvar {

/// Bad configuration. The message names the offending key path.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ForwardSettings {
  std::size_t n_interior = 63;
  double eps = 0.1;
  double T = 1.0;
  ProfileSpec initial;
  double dt = 0.0;  // 0: default rule
  std::size_t stride = 1;
  /// Cole-Hopf comparison at time T over `oracle_levels` grids, dt ~ h^2.
  bool oracle = false;
  int oracle_levels = 3;
  int oracle_modes = 512;
};

struct ProbeSettings {
  ProfileSpec u1;
  ProfileSpec u2;
  std::vector<double> T_values;
};

struct VerifySettings {
  std::vector<std::string> checks{"energy", "adjoint-bound", "delta-decay", "gronwall"};

  ProfileSpec energy_u = ProfileSpec::sines({0.0, 1.0});
  double energy_eps = 0.05;
  double energy_T = 10.0;
  std::size_t energy_n = 63;
  double energy_dt = 0.0;

  /// Adjoint bound uses the problem section with constant data from its truth.
  ProfileSpec adjoint_u;

  ProfileSpec delta_u1 = ProfileSpec::sines({1.0});
  ProfileSpec delta_u2 = ProfileSpec::sines({0.5, 0.5});
  double delta_eps = 0.1;
  double delta_T = 5.0;
  std::size_t delta_n = 63;
  double delta_dt = 0.0;

  int gronwall_instances = 100;
  int gronwall_steps = 2000;
  double gronwall_T = 2.0;
};

struct SweepSettings {
  std::vector<double> eps;
  std::vector<double> beta;
  std::vector<double> T;
  std::size_t starts = 20;
  double radius_V = 1.0;
  double K_bound = 2.0;
  std::size_t pairs = 3;
  double threshold = 0.9;
};

enum class OptimMethod { ConjugateGradient, GradientDescent, Picard };

struct RunConfig {
  /// Config tree as stored in the run directory (seed override applied).
  std::string snapshot;
  std::uint64_t seed = 0;
  std::optional<std::string> output;
  ProblemTemplate problem;
  OptimMethod method = OptimMethod::ConjugateGradient;
  OptimOptions optimizer;
  ForwardSettings forward;
  ProbeSettings probe;
  VerifySettings verify;
  SweepSettings sweep;
};

/// Parses and validates a JSON config. Unknown keys, wrong types and values
/// outside module invariants raise ConfigError naming the key path.
RunConfig parse_run_config(const std::string& text,
                           std::optional<std::uint64_t> seed_override = std::nullopt);

struct RunRecord {
  std::string command;
  std::string version;
  std::string config_snapshot;
  double wall_clock_seconds = 0.0;
  /// "ok", "checks-failed" or "error".
  std::string status = "error";
  std::string message;
  std::vector<std::string> files;  // relative to the run directory

  int exit_code() const { return status == "ok" ? 0 : 1; }
};

std::string run_record_to_json(const RunRecord& record);

RunRecord cmd_forward(const RunConfig& config, const std::filesystem::path& out);
RunRecord cmd_twin(const RunConfig& config, const std::filesystem::path& out);
RunRecord cmd_probe(const RunConfig& config, const std::filesystem::path& out);
RunRecord cmd_verify(const RunConfig& config, const std::filesystem::path& out);
RunRecord cmd_sweep(const RunConfig& config, const std::filesystem::path& out, unsigned jobs = 1);

struct CliOptions {
  std::string command;
  std::filesystem::path config_path;
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;
};

/// Output directory: --out, else the config's "output", else
/// $BURGERS4DVAR_OUT/<command>, else runs/<command>.
std::filesystem::path resolve_output_dir(const CliOptions& opts, const RunConfig* config);

/// Loads the config, runs the command and writes config.json and run.json
/// into the output directory, also when the run fails.
RunRecord run_command(const CliOptions& opts);

std::string library_version();

}  // namespace burgers4dvar
