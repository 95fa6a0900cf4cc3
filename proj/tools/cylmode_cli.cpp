#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "cylmode/commands.hpp"
#include "cylmode/cylmode.hpp"

int main(int argc, char** argv) {
  using namespace cylmode;
  CLI::App app{"cylmode: azimuthal-mode Navier-Stokes simulator in a cylinder"};
  app.require_subcommand(1);
  std::string config_path;
  CommandOptions opts;
  int threads = 1;
  app.add_option("--config", config_path, "experiment config (INI)")->required()->check(CLI::ExistingFile);
  app.add_option("--out", opts.out_dir, "output directory (overrides run.output_dir)");
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--quiet", opts.quiet, "suppress progress output");

  auto* sim = app.add_subcommand("simulate", "run the mode solver with diagnostics");
  auto* stokes = app.add_subcommand("stokes-test", "linear Stokes energy and invariance checks");
  auto* lin = app.add_subcommand("linear-flow", "single-mode linear flow bounds");
  auto* scan = app.add_subcommand("inequality-scan", "empirical Sobolev-inequality constants");
  auto* oracle = app.add_subcommand("oracle-compare", "mode solver against the full 3-D oracle");
  auto* decay = app.add_subcommand("decay-report", "rebuild the decay report from a stored history");
  decay->add_option("--history", opts.history_path, "history JSON (default: <out>/history.json)");
  app.fallthrough();

  CLI11_PARSE(app, argc, argv);
  set_num_threads(threads);
  try {
    const ExperimentConfig cfg = load_config(config_path);
    if (sim->parsed()) return cmd_simulate(cfg, opts);
    if (stokes->parsed()) return cmd_stokes_test(cfg, opts);
    if (lin->parsed()) return cmd_linear_flow(cfg, opts);
    if (scan->parsed()) return cmd_inequality_scan(cfg, opts);
    if (oracle->parsed()) return cmd_oracle_compare(cfg, opts);
    if (decay->parsed()) return cmd_decay_report(cfg, opts);
  } catch (const InvalidArgument& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}
