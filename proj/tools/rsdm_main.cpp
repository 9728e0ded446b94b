#include <rsdm/cli.hpp>

#include <CLI11.hpp>

int main(int argc, char** argv) {
  CLI::App app{"Randomized submanifold descent on the Stiefel manifold"};
  app.set_version_flag("--version", std::string(rsdm::kVersion));
  app.require_subcommand(1);

  rsdm::CliOptions opts;
  std::string output_dir;
  app.add_option("--jobs", opts.jobs, "Worker threads for runs or Monte Carlo shards")->check(CLI::PositiveNumber);
  auto* out_opt = app.add_option("--output-dir", output_dir, "Directory for traces and reports");

  std::string config;
  auto* run = app.add_subcommand("run", "Run an experiment config");
  run->add_option("config", config, "Config file (key=value or JSON)")->required();

  std::string suite = "all";
  std::uint64_t seed = 0;
  auto* verify = app.add_subcommand("verify", "Run numerical oracle suites");
  verify->add_option("suite", suite, "gradients | prop1 | lemma2 | prop2 | embedding | all");
  verify->add_option("--seed", seed, "Master seed");
  verify->add_option("--perturb-gradient", opts.perturb_gradient)->group("");

  std::string param, values;
  auto* sweep = app.add_subcommand("sweep", "Sweep one solver parameter");
  sweep->add_option("config", config, "Config file")->required();
  sweep->add_option("--param", param, "eta or r")->required();
  sweep->add_option("--values", values, "Comma-separated values")->required();

  for (auto* sub : {run, verify, sweep}) {
    sub->add_option("--jobs", opts.jobs, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--output-dir", output_dir, "Output directory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : rsdm::kExitConfig;
  }
  if (!output_dir.empty() || out_opt->count() > 0) opts.output_dir = output_dir;

  if (*run) return rsdm::cmd_run(config, opts);
  if (*verify) return rsdm::cmd_verify(suite, seed, opts);
  return rsdm::cmd_sweep(config, param, values, opts);
}
