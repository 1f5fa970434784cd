#include "ptflow/ptflow.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <limits>
#include <string>
#include <vector>

namespace {

/// Exit codes: 0 success, 1 verification found violations, 2 configuration
/// error, 3 runtime failure.
int dispatch(int argc, char** argv) {
  CLI::App app{"ptflow: continuous-time optimization flows with prescribed-time diagnostics"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "path to a key = value config file")->required();
    sub->add_option("--set", overrides, "override a config key, e.g. --set flow.Tp=5");
  };

  CLI::App* run = app.add_subcommand("run", "integrate one trajectory");
  add_common(run);
  CLI::App* sweep = app.add_subcommand("sweep", "integrate a batch of initial conditions");
  add_common(sweep);
  CLI::App* verify = app.add_subcommand("verify", "check an objective's modulus on a domain");
  add_common(verify);

  CLI::App* plot = app.add_subcommand("plot", "render a trajectory CSV as an SVG chart");
  std::string csv_path, svg_path;
  double tp = std::numeric_limits<double>::quiet_NaN();
  plot->add_option("csv", csv_path, "trajectory CSV written by `ptflow run`")->required();
  plot->add_option("-o,--output", svg_path, "output SVG path")->required();
  plot->add_option("--tp", tp, "override the horizon marker position");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  if (run->parsed()) return ptflow::cli::cmd_run(config_path, overrides, std::cout);
  if (sweep->parsed()) return ptflow::cli::cmd_sweep(config_path, overrides, std::cout);
  if (verify->parsed()) return ptflow::cli::cmd_verify(config_path, overrides, std::cout);
  return ptflow::cli::cmd_plot(csv_path, svg_path, tp, std::cout);
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const ptflow::cli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
