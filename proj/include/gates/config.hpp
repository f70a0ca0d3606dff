#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gates/evaluation.hpp"
#include "gates/synthetic.hpp"
#include "gates/trainer.hpp"

namespace gates {

/// How the built dataset is split into train and held-out questions.
enum class HeldoutRule { family, fraction };

struct ModelConfig {
  int context = 4;
  int embed_dim = 16;
  int hidden_dim = 32;
};

struct DatasetConfig {
  int k = 8;
  int min_agree = 5;
  double temperature = 0.5;
  HeldoutRule heldout = HeldoutRule::family;
  double heldout_fraction = 0.5;
  double adversarial_fraction = 0.0;  ///< of train questions, applied after filtering
};

struct GateSweepConfig {
  std::vector<double> probs{0.6, 0.2, 0.2};
  double invalid_prob = 0.0;
  int correct_index = 0;
  int k = 8;
  int tau_min = 1;
  int tau_max = 8;
  std::int64_t trials = 100000;
};

/// Everything a command needs. Keys are "section.name"; the full list with
/// defaults is config_reference() and docs/formats.md.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string run_dir = "runs/default";
  int workers = 1;

  SyntheticConfig world;
  PretrainConfig pretrain;
  ModelConfig model;
  DatasetConfig dataset;
  TrainerConfig trainer;
  int checkpoint_every = 0;  ///< epochs between intermediate checkpoints; 0 keeps only the final one
  EvalConfig eval = EvalConfig::majority();
  std::string eval_split = "heldout";
  std::string eval_checkpoint;  ///< empty means <run_dir>/final.ckpt
  OracleConfig oracle;
  GateSweepConfig gate;

  /// Copies seed and workers into every section. Throws ConfigError on any
  /// violated range, naming the key.
  void finalize();
};

/// Defaults, then the file (if given), then each override in order.
/// File lines are "key = value"; "[section]" prefixes later bare keys;
/// '#' starts a comment. Throws ConfigError on an unknown key, a malformed
/// line, a value of the wrong type or a violated constraint.
RunConfig load_config(const std::optional<std::filesystem::path>& path, const std::vector<std::string>& overrides);

/// Every key with its effective value, one "key = value" per line in
/// sorted order. Loading this text reproduces the config.
std::string dump_config(const RunConfig& config);

struct ConfigKeyDoc {
  std::string key;
  std::string default_value;
  std::string description;
};

std::vector<ConfigKeyDoc> config_reference();

}  // namespace gates
