#include "gates/pipeline.hpp"

#include "gates/tutor_model.hpp"

namespace gates {

DatasetBuildConfig dataset_build_config(const RunConfig& config) {
  DatasetBuildConfig bc;
  bc.k = config.dataset.k;
  bc.min_agree = config.dataset.min_agree;
  bc.sampling = config.trainer.sampling;
  bc.sampling.temperature = config.dataset.temperature;
  bc.heldout_fraction = config.dataset.heldout_fraction;
  bc.seed = config.seed;
  bc.workers = config.workers;
  if (config.dataset.heldout == HeldoutRule::family) bc.heldout_family = SyntheticWorld::is_heldout_family;
  return bc;
}

BuiltDataset build_synthetic_dataset(const RunConfig& config) {
  BuiltDataset out;
  out.world = SyntheticWorld::generate(config.world);
  out.vocab = synthetic_vocabulary(out.world);
  const NgramShape shape{out.vocab.size(), config.model.context, config.model.embed_dim, config.model.hidden_dim};
  out.base = pretrain_base_model(pretraining_corpus(out.world, out.vocab, config.pretrain), shape, config.pretrain);

  const NgramPolicy tutor(out.base, out.vocab);
  out.splits = build_fixed_challenger_dataset(out.world.candidates(), tutor, dataset_build_config(config));
  if (config.dataset.adversarial_fraction > 0.0)
    out.adversarial_ids = inject_adversarial(out.splits.train, out.world, config.dataset.adversarial_fraction, config.seed);

  // Labels come from the clean documents, so injected questions keep their true answers.
  const ScriptedOracle oracle(out.world.truth());
  for (const auto* split : {&out.splits.train, &out.splits.heldout}) {
    GoldLabels g = label_split(oracle, *split, config.oracle);
    out.gold.insert(g.begin(), g.end());
  }
  return out;
}

std::vector<StepReport> train_epochs(TrainState& state, std::span<const QuestionRecord> train, const Vocabulary& vocab,
                                     const TrainerConfig& config,
                                     const std::function<void(const TrainState&, const std::vector<StepReport>&)>& on_epoch) {
  config.validate();
  std::vector<StepReport> all;
  for (int e = 0; e < config.epochs; ++e) {
    std::vector<StepReport> reports = run_epoch(state, train, vocab, config);
    if (on_epoch) on_epoch(state, reports);
    all.insert(all.end(), reports.begin(), reports.end());
  }
  return all;
}

}  // namespace gates
