#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "gibbsflow/config.hpp"
#include "gibbsflow/errors.hpp"
#include "gibbsflow/experiments.hpp"
#include "gibbsflow/report.hpp"

int main(int argc, char** argv) {
  CLI::App app{"gibbsflow: transfer operators, Gibbs measures and suspension flows"};
  app.require_subcommand(1);

  std::string config_path, out_dir, preset;
  int jobs = 0;
  for (const auto& name : gf::experiment_names()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--jobs", jobs, "worker cap")->check(CLI::PositiveNumber);
    sub->add_option("--preset", preset, "built-in system, overrides the config");
  }
  std::vector<std::string> runs;
  std::string bundle_out = "bundle";
  auto* bundle = app.add_subcommand("bundle", "merge completed runs into one summary");
  bundle->add_option("runs", runs, "run directories")->required();
  bundle->add_option("--out", bundle_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (bundle->parsed()) {
      auto doc = gf::report_bundle(runs, bundle_out);
      std::cout << doc.dump(2) << "\n";
      return 0;
    }
    const std::string experiment = app.get_subcommands().front()->get_name();
    gf::Overrides ov;
    if (!preset.empty()) ov.preset = preset;
    if (jobs > 0) ov.jobs = jobs;
    if (!out_dir.empty()) ov.out_dir = out_dir;
    if (const char* s = std::getenv("GIBBSFLOW_SEED")) {
      try {
        std::size_t used = 0;
        ov.seed = std::stoull(s, &used);
        if (used != std::string(s).size()) throw std::invalid_argument(s);
      } catch (const std::exception&) {
        throw gf::ConfigError(std::string("GIBBSFLOW_SEED is not an unsigned integer: ") + s, "/seed");
      }
    }
    gf::ExperimentConfig cfg;
    if (!config_path.empty())
      cfg = gf::load_config(config_path, experiment, ov);
    else if (ov.preset)
      cfg = gf::parse_config(gf::json::object(), experiment, ov);
    else
      throw gf::ConfigError("give --config or --preset", "");
    return gf::run(cfg, std::cout);
  } catch (const gf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
