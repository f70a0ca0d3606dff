#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gates/config.hpp"
#include "gates/evaluation.hpp"
#include "gates/synthetic.hpp"
#include "gates/trainer.hpp"

namespace gates {

/// A warm-started model together with the filtered dataset built from it.
struct BuiltDataset {
  SyntheticWorld world;
  Vocabulary vocab;
  PolicyParams base;
  DatasetSplits splits;
  GoldLabels gold;  ///< both splits
  std::vector<std::string> adversarial_ids;
};

/// World, warm start, fixed-challenger filtering with the warm-started tutor,
/// held-out split, adversarial injection into the train split, and gold
/// labels from the generator truth through the labeling oracle.
BuiltDataset build_synthetic_dataset(const RunConfig& config);

DatasetBuildConfig dataset_build_config(const RunConfig& config);

/// Runs config.trainer.epochs epochs. `on_epoch` sees the state after each epoch.
std::vector<StepReport> train_epochs(TrainState& state, std::span<const QuestionRecord> train, const Vocabulary& vocab,
                                     const TrainerConfig& config,
                                     const std::function<void(const TrainState&, const std::vector<StepReport>&)>& on_epoch = {});

}  // namespace gates
