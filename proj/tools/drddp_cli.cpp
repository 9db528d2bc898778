#include <CLI11.hpp>

#include "drddp/cli.hpp"

int main(int argc, char** argv) {
  drddp::configure_logging();

  CLI::App app{"Distributionally robust DDP: solve, tune, evaluate and benchmark"};
  app.require_subcommand(1);

  drddp::CliOptions opts;
  std::string out, controller, lambda_grid, sizes;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config, "INI configuration file")->required();
    sub->add_option("--out", out, "output directory (overrides [run] out)");
    sub->add_option("--seed", seed, "root seed (overrides [run] seed)");
    sub->add_option("--controller", controller, "dr_ddp, box_ddp or minimax_ddp");
  };
  CLI::App* solve = app.add_subcommand("solve", "solve one problem and write trajectories");
  CLI::App* tune = app.add_subcommand("tune", "grid-search lambda against the cost bound");
  CLI::App* eval = app.add_subcommand("eval", "out-of-sample evaluation of controllers");
  CLI::App* bench = app.add_subcommand("bench", "per-iteration timing sweep");
  for (CLI::App* sub : {solve, tune, eval, bench}) add_common(sub);
  tune->add_option("--lambda-grid", lambda_grid, "comma-separated lambda values");
  bench->add_option("--sizes", sizes, "comma-separated problem sizes");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : drddp::kExitConfigError;
  }

  CLI::App* chosen = app.get_subcommands().front();
  opts.command = chosen->get_name();
  auto given = [&](const char* name) {
    const CLI::Option* opt = chosen->get_option_no_throw(name);
    return opt != nullptr && opt->count() > 0;
  };
  if (given("--out")) opts.out = out;
  if (given("--seed")) opts.seed = seed;
  if (given("--controller")) opts.controller = controller;
  if (given("--lambda-grid")) opts.lambda_grid = lambda_grid;
  if (given("--sizes")) opts.sizes = sizes;
  return drddp::run_command(opts);
}
