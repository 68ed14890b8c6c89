#include <iostream>

#include <CLI11.hpp>

#include "burgers4dvar/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"4D-Var toolkit for the viscous Burgers equation"};
  app.set_version_flag("--version", burgers4dvar::library_version());
  app.require_subcommand(1);

  burgers4dvar::CliOptions opts;
  std::string out;
  std::uint64_t seed = 0;
  for (const char* name : {"forward", "twin", "probe", "verify", "sweep"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", opts.config_path, "JSON run configuration")->required();
    sub->add_option("--out", out, "output directory");
    sub->add_option("--seed", seed, "overrides the config seed");
    sub->add_option("--jobs", opts.jobs, "worker threads for sweeps")->check(CLI::PositiveNumber);
  }
  CLI11_PARSE(app, argc, argv);

  const CLI::App* sub = app.get_subcommands().front();
  opts.command = sub->get_name();
  if (!out.empty()) opts.out = out;
  if (sub->count("--seed")) opts.seed = seed;

  const burgers4dvar::RunRecord record = burgers4dvar::run_command(opts);
  if (record.status == "error") {
    std::cerr << "error: " << record.message << '\n';
  } else if (record.status != "ok") {
    std::cerr << record.status << ": " << record.message << '\n';
  }
  std::cout << opts.command << ": " << record.status << " (" << record.files.size() << " files)\n";
  return record.exit_code();
}
