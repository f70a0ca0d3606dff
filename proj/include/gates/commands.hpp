#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "gates/config.hpp"

namespace gates {

/// File names inside a run directory.
namespace run_files {
inline constexpr const char* kConfig = "config.txt";
inline constexpr const char* kMetrics = "metrics.jsonl";
inline constexpr const char* kFinalCheckpoint = "final.ckpt";
inline constexpr const char* kDatasetDir = "dataset";
inline constexpr const char* kBaseCheckpoint = "dataset/base.ckpt";
inline constexpr const char* kTrainSplit = "dataset/train.jsonl";
inline constexpr const char* kHeldoutSplit = "dataset/heldout.jsonl";
inline constexpr const char* kGold = "dataset/gold.jsonl";
inline constexpr const char* kDatasetSummary = "dataset/summary.json";
inline constexpr const char* kDatasetConfig = "dataset/config.txt";
inline constexpr const char* kEvalDir = "eval";
inline constexpr const char* kCheckpointDir = "checkpoints";
inline constexpr const char* kGateSweep = "gate_sweep.csv";
}  // namespace run_files

/// Each command writes its outputs under config.run_dir and a short
/// human-readable summary to `log`. Errors propagate as ConfigError,
/// DataError or NumericalError.
void command_build_dataset(const RunConfig& config, std::ostream& log);
void command_train(const RunConfig& config, std::ostream& log);
void command_eval(const RunConfig& config, std::ostream& log);
void command_gate_sweep(const RunConfig& config, std::ostream& log);

/// Files a finished training run must contain; empty when complete.
std::vector<std::string> missing_run_files(const std::filesystem::path& run_dir);

/// Prints what the run directory holds. Returns false if it is incomplete.
bool command_inspect(const std::filesystem::path& run_dir, std::ostream& log);

}  // namespace gates
