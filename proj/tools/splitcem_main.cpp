#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "splitcem/driver.hpp"
#include "splitcem/error.hpp"

using namespace splitcem;

int main(int argc, char** argv) {
  CLI::App app{"Multiscale partially explicit time stepping for high-contrast parabolic problems"};
  app.set_version_flag("--version", std::string("splitcem ") + kVersion);
  app.require_subcommand(1);

  std::string config;
  std::string out_dir;
  int threads = 0;
  std::uint64_t seed = 0;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "INI run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory (overrides output.dir)");
    sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "kappa generator seed (overrides problem.seed)");
  };
  const auto overrides = [&](CLI::App* sub) {
    ConfigOverrides ov;
    if (sub->count("--out")) ov.output_dir = out_dir;
    if (sub->count("--threads")) ov.threads = threads;
    if (sub->count("--seed")) ov.seed = seed;
    return ov;
  };

  CLI::App* run = app.add_subcommand("run", "run every configured scheme and write CSV outputs");
  add_common(run);
  CLI::App* stability = app.add_subcommand("stability", "report the stability quantities and dt*");
  add_common(stability);

  std::string axis;
  std::vector<double> values;
  CLI::App* sweep = app.add_subcommand("sweep", "repeat a run over contrast, dt or layers values");
  add_common(sweep);
  sweep->add_option("--axis", axis, "contrast | dt | layers")->required();
  sweep->add_option("--values", values, "values along the axis")->required()->delimiter(',');

  CLI::App* kappa = app.add_subcommand("kappa", "generate or inspect coefficient fields");
  kappa->require_subcommand(1);
  KappaParams kp;
  std::string kappa_out;
  std::string complexity = "simple";
  CLI::App* generate = kappa->add_subcommand("generate", "write a channelized field");
  generate->add_option("--out", kappa_out, "field file")->required();
  generate->add_option("--fine-cells", kp.fine_cells, "fine cells per side");
  generate->add_option("--seed", kp.seed, "generator seed");
  generate->add_option("--contrast", kp.contrast, "channel value over background");
  generate->add_option("--channels", kp.channels, "number of channels");
  generate->add_option("--complexity", complexity, "simple | complex");
  std::string inspect_path;
  CLI::App* inspect = kappa->add_subcommand("inspect", "print min, max, contrast and channel fraction");
  inspect->add_option("file", inspect_path, "field file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  if (*run) return cmd_run(config, overrides(run), std::cout, std::cerr);
  if (*stability) return cmd_stability(config, overrides(stability), std::cout, std::cerr);
  if (*sweep) {
    SweepAxis a;
    try {
      a = parse_sweep_axis(axis);
    } catch (const ConfigError& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return kExitConfig;
    }
    return cmd_sweep(config, a, values, overrides(sweep), std::cout, std::cerr);
  }
  if (*generate) {
    try {
      kp.complexity = parse_complexity(complexity);
    } catch (const ConfigError& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return kExitConfig;
    }
    return cmd_kappa_generate(kp, kappa_out, std::cout, std::cerr);
  }
  if (*inspect) return cmd_kappa_inspect(inspect_path, std::cout, std::cerr);
  return kExitConfig;
}
