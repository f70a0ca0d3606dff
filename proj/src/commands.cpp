#include "gates/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "gates/checkpoint.hpp"
#include "gates/errors.hpp"
#include "gates/gate_dynamics.hpp"
#include "gates/io.hpp"
#include "gates/pipeline.hpp"

namespace gates {

namespace fs = std::filesystem;

namespace {

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

fs::path in_run(const RunConfig& config, const char* name) { return fs::path(config.run_dir) / name; }

std::string report_stem(const std::string& split, Role role, EvalMode mode) {
  return split + "-" + std::string(role_name(role)) + "-" + std::string(eval_mode_name(mode));
}

void write_eval_report(const RunConfig& config, const std::string& split, const EvalReport& report) {
  const fs::path dir = in_run(config, run_files::kEvalDir);
  const std::string stem = report_stem(split, report.role, report.mode);
  write_text(dir / (stem + ".json"), eval_report_to_json(report).dump(2) + "\n");
  write_text(dir / (stem + ".csv"), eval_report_csv(report));
}

void evaluate_roles(const RunConfig& config, const PolicyParams& params, const Vocabulary& vocab,
                    const std::string& split_name, const std::vector<QuestionRecord>& split, const GoldLabels& gold,
                    std::ostream& log) {
  for (Role role : {Role::student, Role::tutor}) {
    const EvalReport report = evaluate_split(params, vocab, split, role, config.eval, gold);
    write_eval_report(config, split_name, report);
    log << split_name << " " << role_name(role) << " " << eval_mode_name(config.eval.mode)
        << ": accuracy " << fixed(report.accuracy) << " (" << report.labeled_count << " labeled, "
        << report.unlabeled_count << " unlabeled), validity " << fixed(report.validity_rate) << "\n";
  }
}

Checkpoint load_base(const RunConfig& config) {
  const fs::path base = in_run(config, run_files::kBaseCheckpoint);
  if (!fs::exists(base))
    throw DataError("no dataset in " + config.run_dir + " (missing " + base.string() + "); run build-dataset first");
  return load_checkpoint(base);
}

}  // namespace

void command_build_dataset(const RunConfig& config, std::ostream& log) {
  const BuiltDataset built = build_synthetic_dataset(config);
  write_text(in_run(config, run_files::kDatasetConfig), dump_config(config));
  write_dataset(in_run(config, run_files::kTrainSplit), built.splits.train);
  write_dataset(in_run(config, run_files::kHeldoutSplit), built.splits.heldout);
  write_gold(in_run(config, run_files::kGold), built.gold);
  save_checkpoint(in_run(config, run_files::kBaseCheckpoint), built.vocab, TrainState::initialize(built.base, config.seed));

  Json summary;
  summary["schema"] = kReportSchemaVersion;
  summary["candidates"] = built.splits.candidates;
  summary["dropped_leakage"] = built.splits.dropped_leakage;
  summary["dropped_disagreement"] = built.splits.dropped_disagreement;
  summary["train"] = built.splits.train.size();
  summary["heldout"] = built.splits.heldout.size();
  summary["vocabulary"] = built.vocab.size();
  summary["parameters"] = built.base.size();
  summary["adversarial_ids"] = built.adversarial_ids;
  write_text(in_run(config, run_files::kDatasetSummary), summary.dump(2) + "\n");

  log << "candidates " << built.splits.candidates << ", kept " << built.splits.train.size() << " train + "
      << built.splits.heldout.size() << " held-out (dropped " << built.splits.dropped_leakage << " leakage, "
      << built.splits.dropped_disagreement << " disagreement); " << built.adversarial_ids.size()
      << " adversarial documents\n";
  evaluate_roles(config, built.base, built.vocab, "base-heldout", built.splits.heldout, built.gold, log);
}

void command_train(const RunConfig& config, std::ostream& log) {
  const Checkpoint base = load_base(config);
  const auto train = read_dataset(in_run(config, run_files::kTrainSplit));
  const auto heldout = read_dataset(in_run(config, run_files::kHeldoutSplit));
  const GoldLabels gold = read_gold(in_run(config, run_files::kGold));

  write_text(in_run(config, run_files::kConfig), dump_config(config));
  const fs::path metrics = in_run(config, run_files::kMetrics);
  write_text(metrics, "");

  TrainState state = TrainState::initialize(base.state.params, config.seed);
  for (int e = 0; e < config.trainer.epochs; ++e) {
    const std::int64_t epoch = state.epoch;
    const auto reports = run_epoch(state, train, base.vocab, config.trainer, [&](const StepReport& r) {
      append_metrics(metrics, {step_to_json(r, epoch)});
    });
    double gate = 0.0, total = 0.0;
    for (const auto& r : reports) {
      gate += r.gate_rate;
      total += r.losses.total;
    }
    const double n = reports.empty() ? 1.0 : static_cast<double>(reports.size());
    log << "epoch " << epoch << ": " << reports.size() << " steps, mean gate rate " << fixed(gate / n)
        << ", mean loss " << fixed(total / n) << "\n";
    if (config.checkpoint_every > 0 && state.epoch % config.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof(name), "epoch-%04lld.ckpt", static_cast<long long>(state.epoch));
      save_checkpoint(in_run(config, run_files::kCheckpointDir) / name, base.vocab, state);
    }
  }
  save_checkpoint(in_run(config, run_files::kFinalCheckpoint), base.vocab, state);
  evaluate_roles(config, state.params, base.vocab, "heldout", heldout, gold, log);

  const auto missing = missing_run_files(config.run_dir);
  if (!missing.empty()) throw DataError("run directory incomplete after training: missing " + missing.front());
}

void command_eval(const RunConfig& config, std::ostream& log) {
  const fs::path ckpt_path =
      config.eval_checkpoint.empty() ? in_run(config, run_files::kFinalCheckpoint) : fs::path(config.eval_checkpoint);
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const Checkpoint base = load_base(config);
  require_vocabulary(ckpt, base.vocab);
  const auto split = read_dataset(in_run(config, config.eval_split == "train" ? run_files::kTrainSplit
                                                                               : run_files::kHeldoutSplit));
  const GoldLabels gold = read_gold(in_run(config, run_files::kGold));
  log << "checkpoint " << ckpt_path.string() << " (step " << ckpt.state.step << ")\n";
  evaluate_roles(config, ckpt.state.params, ckpt.vocab, config.eval_split, split, gold, log);
}

void command_gate_sweep(const RunConfig& config, std::ostream& log) {
  TutorAnswerModel model;
  model.probs = config.gate.probs;
  model.invalid_prob = config.gate.invalid_prob;
  model.correct_index = config.gate.correct_index;
  try {
    model.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("gate model: ") + e.what());
  }
  std::vector<GateStats> rows = sweep_operating_points(model, config.gate.k, config.gate.tau_min, config.gate.tau_max,
                                                       config.workers);
  for (const auto& v : sweep_violations(model, rows)) log << "warning: " << v << "\n";
  if (config.gate.trials > 0) {
    std::vector<int> taus;
    for (int t = config.gate.tau_min; t <= config.gate.tau_max; ++t) taus.push_back(t);
    const auto sim = simulate_gate_sweep(model, config.gate.k, taus, config.gate.trials, config.seed, config.workers);
    rows.insert(rows.end(), sim.begin(), sim.end());
  }
  std::ostringstream csv;
  write_gate_csv(csv, rows);
  write_text(in_run(config, run_files::kGateSweep), csv.str());
  log << csv.str();
}

std::vector<std::string> missing_run_files(const fs::path& run_dir) {
  std::vector<std::string> missing;
  for (const char* name : {run_files::kConfig, run_files::kMetrics, run_files::kFinalCheckpoint})
    if (!fs::is_regular_file(run_dir / name)) missing.emplace_back(name);
  bool student = false, tutor = false;
  const fs::path eval = run_dir / run_files::kEvalDir;
  if (fs::is_directory(eval)) {
    for (const auto& entry : fs::directory_iterator(eval)) {
      const std::string name = entry.path().filename().string();
      if (entry.path().extension() != ".json" || name.rfind("heldout-", 0) != 0) continue;
      student |= name.find("-student-") != std::string::npos;
      tutor |= name.find("-tutor-") != std::string::npos;
    }
  }
  if (!student) missing.emplace_back("eval/heldout-student-*.json");
  if (!tutor) missing.emplace_back("eval/heldout-tutor-*.json");
  return missing;
}

bool command_inspect(const fs::path& run_dir, std::ostream& log) {
  if (!fs::is_directory(run_dir)) throw DataError("not a directory: " + run_dir.string());
  log << "run " << run_dir.string() << "\n";
  const fs::path summary = run_dir / run_files::kDatasetSummary;
  if (fs::exists(summary)) {
    const Json s = read_json(summary);
    log << "dataset: " << s.value("train", 0) << " train, " << s.value("heldout", 0) << " held-out, "
        << s["adversarial_ids"].size() << " adversarial\n";
  }
  const fs::path metrics = run_dir / run_files::kMetrics;
  if (fs::exists(metrics)) {
    const auto lines = read_jsonl(metrics);
    log << "metrics: " << lines.size() << " steps\n";
    if (!lines.empty()) {
      const StepReport last = step_from_json(lines.back());
      log << "last step " << last.step << ": gate rate " << fixed(last.gate_rate) << ", loss "
          << fixed(last.losses.total) << ", grad norm " << fixed(last.grad_norm_pre_clip) << "\n";
    }
  }
  const fs::path final_ckpt = run_dir / run_files::kFinalCheckpoint;
  if (fs::exists(final_ckpt)) {
    const Checkpoint ck = load_checkpoint(final_ckpt);
    log << "checkpoint: step " << ck.state.step << ", epoch " << ck.state.epoch << ", "
        << ck.state.params.size() << " parameters, vocabulary " << ck.vocab.size() << "\n";
  }
  const fs::path eval = run_dir / run_files::kEvalDir;
  if (fs::is_directory(eval)) {
    std::vector<fs::path> reports;
    for (const auto& entry : fs::directory_iterator(eval))
      if (entry.path().extension() == ".json") reports.push_back(entry.path());
    std::sort(reports.begin(), reports.end());
    for (const auto& p : reports) {
      const EvalReport r = eval_report_from_json(read_json(p));
      log << "eval " << p.stem().string() << ": accuracy " << fixed(r.accuracy) << " over " << r.labeled_count
          << " labeled\n";
    }
  }
  const auto missing = missing_run_files(run_dir);
  for (const auto& m : missing) log << "missing: " << m << "\n";
  log << (missing.empty() ? "complete\n" : "incomplete\n");
  return missing.empty();
}

}  // namespace gates
