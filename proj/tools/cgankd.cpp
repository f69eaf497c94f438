#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cgankd/cli.hpp"

int main(int argc, char** argv) {
  using namespace cgankd::cli;
  CLI::App app{"cgankd: knowledge distillation with processed conditional-generator samples"};
  app.require_subcommand(1);

  RunArgs run;
  std::uint64_t run_seed = 0;
  auto* run_cmd = app.add_subcommand("run", "Run the full pipeline once and write report.csv");
  run_cmd->add_option("config", run.config_path, "Pipeline config file");
  run_cmd->add_option("--manifest", run.manifest_path, "Re-run from a manifest written by a previous run");
  auto* seed_opt = run_cmd->add_option("--seed", run_seed, "Override the master seed");
  run_cmd->add_option("--out-dir", run.out_dir, "Output directory")->required();
  run_cmd->add_flag("!--no-checkpoints", run.checkpoints, "Skip writing intermediate datasets and models");

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "Sensitivity sweep over mg, rho or teacher-epochs");
  sweep_cmd->add_option("config", sweep.config_path, "Pipeline config file")->required();
  sweep_cmd->add_option("--param", sweep.param, "mg | rho | teacher-epochs")->required();
  sweep_cmd->add_option("--values", sweep.values, "Comma-separated parameter values")->required();
  sweep_cmd->add_option("--seeds", sweep.seeds, "Comma-separated master seeds")->required();
  sweep_cmd->add_option("--jobs", sweep.jobs, "Concurrent cells")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--out-dir", sweep.out_dir, "Output directory")->required();

  AblationArgs abl;
  auto* abl_cmd = app.add_subcommand("ablation", "Raw, +M1, +M1+filter, +M1+filter+replacement variants");
  abl_cmd->add_option("config", abl.config_path, "Pipeline config file")->required();
  abl_cmd->add_option("--seeds", abl.seeds, "Comma-separated master seeds")->required();
  abl_cmd->add_option("--jobs", abl.jobs, "Concurrent seeds")->check(CLI::PositiveNumber);
  abl_cmd->add_option("--out-dir", abl.out_dir, "Output directory")->required();

  VerifyArgs ver;
  std::uint64_t ver_seed = 0;
  auto* ver_cmd = app.add_subcommand("verify-bound", "Check the augmentation error bound on a discrete setup");
  ver_cmd->add_option("setup", ver.setup_path, "Discrete setup file")->required();
  ver_cmd->add_option("--trials", ver.trials, "Number of trials");
  ver_cmd->add_option("--delta", ver.delta, "Confidence parameter");
  auto* ver_seed_opt = ver_cmd->add_option("--seed", ver_seed, "Override the setup seed");
  ver_cmd->add_option("--out-dir", ver.out_dir, "Output directory")->required();

  PlotArgs plot;
  auto* plot_cmd = app.add_subcommand("plotdata", "Long-format plot data from a sweep or ablation CSV");
  plot_cmd->add_option("report", plot.input_csv, "Sweep or ablation CSV")->required();
  plot_cmd->add_option("--kind", plot.kind, "sweep | ablation")->required()->check(CLI::IsMember({"sweep", "ablation"}));
  plot_cmd->add_option("--out-dir", plot.out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  if (*run_cmd) {
    if (*seed_opt) run.seed = run_seed;
    return cmd_run(run);
  }
  if (*sweep_cmd) return cmd_sweep(sweep);
  if (*abl_cmd) return cmd_ablation(abl);
  if (*ver_cmd) {
    if (*ver_seed_opt) ver.seed = ver_seed;
    return cmd_verify_bound(ver);
  }
  return cmd_plotdata(plot);
}
