#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "submfg/report.hpp"
#include "submfg/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"submfg: ordered equilibria for stochastic games with shared "
               "noise"};
  app.set_version_flag("--version", std::string(submfg::version_string()) +
                                        " (" + submfg::build_hash() + ")");
  app.require_subcommand(1);

  struct Cmd {
    const char* name;
    const char* desc;
  };
  const Cmd cmds[] = {
      {"check", "run the structural condition suites on the configured model"},
      {"solve", "solve the forward-backward system against a frozen flow"},
      {"iterate", "iterate the best-reply map toward an extremal equilibrium"},
      {"fp", "run the averaged (fictitious-play) learning scheme"},
      {"compare", "solve under two ordered flows and test trajectory ordering"},
      {"bench", "cross-check the regression solver against the closed-form "
                "linear-quadratic solution"},
  };

  submfg::RunnerOptions opts;
  std::string chosen;
  for (const Cmd& c : cmds) {
    CLI::App* sub = app.add_subcommand(c.name, c.desc);
    sub->add_option("config", opts.config_path, "JSON run configuration file")
        ->required();
    sub->add_option("-o,--output", opts.output_override,
                    "run directory (overrides outputs.directory)");
    sub->add_flag("-v,--verbose", opts.verbose, "progress log on stderr");
    sub->callback([&chosen, name = std::string(c.name)] { chosen = name; });
  }

  CLI11_PARSE(app, argc, argv);

  try {
    return submfg::run_command(chosen, opts);
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}
