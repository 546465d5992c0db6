#include <CLI11.hpp>

#include "snorm/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{"streamnorm experiment runner"};
  app.require_subcommand(1);

  snorm::CliOptions opts;
  std::uint64_t seed_value = 0;

  auto add_common = [&](CLI::App* sub, bool with_out) {
    sub->add_option("--config", opts.config_path, "experiment config file")->required();
    sub->add_option("--set", opts.sets, "override as key=value (repeatable)");
    if (with_out) sub->add_option("--out", opts.out_dir, "output directory");
    sub->add_option("--seed", seed_value, "override train.seed")
        ->each([&](const std::string&) { opts.seed = seed_value; });
  };

  CLI::App* train = app.add_subcommand("train", "run a training experiment");
  add_common(train, true);

  CLI::App* gradcheck = app.add_subcommand(
      "gradcheck", "finite-difference check of the configured model");
  add_common(gradcheck, false);

  CLI::App* sweep = app.add_subcommand("sweep", "cross-product of config overrides");
  add_common(sweep, true);
  sweep->add_option("axes", opts.axes, "sweep axes as key=v1,v2,...");

  CLI::App* eval = app.add_subcommand("eval", "train per config, report validation metrics");
  add_common(eval, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  if (train->parsed()) return snorm::cmd_train(opts);
  if (gradcheck->parsed()) return snorm::cmd_gradcheck(opts);
  if (sweep->parsed()) return snorm::cmd_sweep(opts);
  if (eval->parsed()) return snorm::cmd_eval(opts);
  return 2;
}
