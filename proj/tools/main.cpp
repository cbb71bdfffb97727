#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "synthimu/commands.hpp"
#include "synthimu/errors.hpp"

namespace {

struct GlobalArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
};

synthimu::ExperimentConfig load(const GlobalArgs& args) {
  if (args.config_path.empty())
    throw synthimu::ConfigError("this command needs --config <path>");
  return synthimu::load_config(args.config_path, args.overrides, args.seed,
                               args.out_dir);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pose-to-inertial transfer learning toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand name

  GlobalArgs args;
  std::uint64_t seed_value = 0;
  std::string out_value;
  app.add_option("--config", args.config_path, "experiment config JSON");
  app.add_option("--set", args.overrides,
                 "override a config value, e.g. --set train.epochs=3");
  auto* seed_opt = app.add_option("--seed", seed_value,
                                  "base experiment seed (train/transfer/split)");
  auto* out_opt = app.add_option("--out", out_value, "output directory");

  auto* synth = app.add_subcommand("synth", "build windowed dataset shards");
  auto* train = app.add_subcommand("train", "train a network from a manifest");

  auto* transfer =
      app.add_subcommand("transfer", "run the layer-transfer experiment grid");
  std::string source_ckpt;
  transfer->add_option("--source", source_ckpt, "source checkpoint")->required();

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string eval_ckpt;
  bool majority = false;
  eval->add_option("--ckpt", eval_ckpt, "checkpoint to evaluate")->required();
  eval->add_flag("--majority-vote", majority,
                 "vote per clip before computing metrics");

  auto* permtest = app.add_subcommand(
      "permtest", "paired permutation test between two prediction files");
  std::string preds_a, preds_b, perm_out;
  int n_perm = 9999;
  std::uint64_t perm_seed = 42;
  permtest->add_option("preds_a", preds_a, "first predictions JSON")->required();
  permtest->add_option("preds_b", preds_b, "second predictions JSON")->required();
  permtest->add_option("--n-perm", n_perm, "number of permutations");
  permtest->add_option("--perm-seed", perm_seed, "permutation rng seed");
  permtest->add_option("--result", perm_out, "write the result JSON here");

  auto* gradcheck =
      app.add_subcommand("gradcheck", "finite-difference gradient verification");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 1;
  }
  if (seed_opt->count() > 0) args.seed = seed_value;
  if (out_opt->count() > 0) args.out_dir = out_value;

  try {
    if (synth->parsed()) {
      synthimu::cmd_synth(load(args));
    } else if (train->parsed()) {
      synthimu::cmd_train(load(args));
    } else if (transfer->parsed()) {
      synthimu::cmd_transfer(load(args), source_ckpt);
    } else if (eval->parsed()) {
      synthimu::cmd_eval(load(args), eval_ckpt, majority);
    } else if (permtest->parsed()) {
      synthimu::cmd_permtest(preds_a, preds_b, n_perm, perm_seed, perm_out);
    } else if (gradcheck->parsed()) {
      synthimu::cmd_gradcheck(load(args));
    }
  } catch (const synthimu::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const synthimu::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const synthimu::NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
