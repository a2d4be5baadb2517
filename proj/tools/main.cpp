#include <CLI11.hpp>

#include <cstdint>
#include <string>

#include "plvc/cli.hpp"
#include "plvc/version.hpp"

int main(int argc, char** argv) {
  CLI::App app{"plvc: series estimation of partially linear varying coefficient models"};
  app.set_version_flag("--version", std::string(plvc::kVersion));
  app.require_subcommand(1);

  std::string config_path;
  std::string data_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  int threads = 0;
  bool strict = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "run configuration file (JSON)");
    sub->add_option("--data", data_path, "dataset CSV, overrides the config");
    sub->add_option("--out", out_dir, "output directory, overrides the config");
    sub->add_option("--seed", seed, "RNG seed, overrides the config");
    sub->add_option("--threads", threads, "worker threads, overrides the config");
    sub->add_flag("--strict", strict, "error on out-of-range index values instead of clamping");
  };

  CLI::App* fit = app.add_subcommand("fit", "estimate the model; writes fit.json and beta_curves.csv");
  CLI::App* cv = app.add_subcommand("cv", "emit the cross-validation curve; writes cv_curve.csv");
  CLI::App* test = app.add_subcommand("test", "wild-bootstrap specification test; writes test.json");
  CLI::App* simulate =
      app.add_subcommand("simulate", "Monte Carlo study; writes sim.json and tables.csv");
  CLI::App* dump =
      app.add_subcommand("basis-dump", "emit raw basis values on a grid; writes basis_values.csv");
  for (CLI::App* sub : {fit, cv, test, simulate, dump}) add_common(sub);

  CLI11_PARSE(app, argc, argv);

  plvc::RunConfig cfg;
  try {
    if (!config_path.empty()) cfg = plvc::load_config(config_path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "{\"error\":\"config\",\"message\":\"%s\"}\n", e.what());
    return 1;
  }
  if (!data_path.empty()) cfg.data_path = data_path;
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  for (CLI::App* sub : {fit, cv, test, simulate, dump}) {
    if (sub->parsed()) {
      if (sub->count("--seed") > 0) {
        cfg.seed = seed;
        cfg.seed_set = true;
      }
      if (sub->count("--threads") > 0) cfg.threads = threads;
      if (strict) cfg.strict = true;
      return plvc::run_command(sub->get_name(), cfg);
    }
  }
  return 1;
}
