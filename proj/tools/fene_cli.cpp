// fene: run, check and sweep driver for the FENE Fokker-Planck solver.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fene/fene.hpp"

int main(int argc, char** argv) {
  CLI::App app{"FENE Fokker-Planck Galerkin solver"};
  app.set_version_flag("--version", std::string("fene ") + fene::kVersion);
  app.require_subcommand(1);

  struct Args {
    std::string config;
    std::vector<std::string> overrides;
  };
  Args run_args, check_args, sweep_args;
  auto add = [&](const char* name, const char* help, Args& a) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("config", a.config, "JSON configuration file")->required();
    sub->add_option("overrides", a.overrides, "key=value overrides, dotted keys (model.b=3)");
    return sub;
  };
  CLI::App* run = add("run", "solve one scenario and write report.json and CSV outputs", run_args);
  CLI::App* check = add("check", "run the verification suites", check_args);
  CLI::App* sweep = add("sweep", "equilibrium trace sweep over b", sweep_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : fene::kExitConfig;
  }
  if (run->parsed()) return fene::guarded_execute("run", run_args.config, run_args.overrides, std::cout, std::cerr);
  if (check->parsed()) return fene::guarded_execute("check", check_args.config, check_args.overrides, std::cout, std::cerr);
  if (sweep->parsed()) return fene::guarded_execute("sweep", sweep_args.config, sweep_args.overrides, std::cout, std::cerr);
  return fene::kExitConfig;
}
