#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gates/commands.hpp"
#include "gates/config.hpp"
#include "gates/errors.hpp"

namespace {

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config_path, "key = value config file")->check(CLI::ExistingFile);
  cmd->add_option("--set", opts.overrides, "override a config key (key=value), repeatable")->take_all();
  cmd->add_option("--seed", opts.seed, "master seed, same as --set seed=N");
}

gates::RunConfig resolve(const CommonOptions& opts) {
  std::vector<std::string> overrides = opts.overrides;
  if (opts.seed) overrides.push_back("seed=" + std::to_string(*opts.seed));
  std::optional<std::filesystem::path> path;
  if (!opts.config_path.empty()) path = opts.config_path;
  return gates::load_config(path, overrides);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Consensus-gated self-distillation on a synthetic asymmetric-context task"};
  app.require_subcommand(1);

  CommonOptions build_opts, train_opts, eval_opts, sweep_opts;
  auto* build = app.add_subcommand("build-dataset", "warm-start a model and build the filtered dataset");
  add_common(build, build_opts);
  auto* train = app.add_subcommand("train", "train on the built dataset and evaluate the result");
  add_common(train, train_opts);
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  add_common(eval, eval_opts);
  auto* sweep = app.add_subcommand("gate-sweep", "exact and simulated gate reliability over tau");
  add_common(sweep, sweep_opts);
  auto* inspect = app.add_subcommand("inspect", "summarize a run directory");
  std::string inspect_dir;
  inspect->add_option("run_dir", inspect_dir, "run directory")->required();
  auto* keys = app.add_subcommand("config-keys", "list every config key with its default");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*build) gates::command_build_dataset(resolve(build_opts), std::cout);
    if (*train) gates::command_train(resolve(train_opts), std::cout);
    if (*eval) gates::command_eval(resolve(eval_opts), std::cout);
    if (*sweep) gates::command_gate_sweep(resolve(sweep_opts), std::cout);
    if (*inspect) return gates::command_inspect(inspect_dir, std::cout) ? 0 : 3;
    if (*keys) {
      for (const auto& k : gates::config_reference())
        std::cout << k.key << " = " << k.default_value << "  # " << k.description << "\n";
    }
  } catch (const gates::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const gates::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const gates::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
