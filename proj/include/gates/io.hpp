#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "gates/consensus.hpp"
#include "gates/evaluation.hpp"
#include "gates/question.hpp"
#include "gates/trainer.hpp"

namespace gates {

inline constexpr int kMetricsSchemaVersion = 1;
inline constexpr int kReportSchemaVersion = 1;

using Json = nlohmann::ordered_json;

Json question_to_json(const QuestionRecord& q);
/// Throws DataError on a missing or mistyped field.
QuestionRecord question_from_json(const Json& j);

/// One compact JSON object per line, fields in canonical order.
std::string serialize_dataset(const std::vector<QuestionRecord>& records);
std::vector<QuestionRecord> parse_dataset(const std::string& text, const std::string& source = "<dataset>");
void write_dataset(const std::filesystem::path& path, const std::vector<QuestionRecord>& records);
std::vector<QuestionRecord> read_dataset(const std::filesystem::path& path);

Json rollout_to_json(const RolloutRecord& r);
RolloutRecord rollout_from_json(const Json& j);

/// One metrics line: schema version, epoch and every StepReport field
/// except the applied gradient.
Json step_to_json(const StepReport& report, std::int64_t epoch);
StepReport step_from_json(const Json& j);

/// Appends to an existing log; the caller owns the single writer.
void append_metrics(const std::filesystem::path& path, const std::vector<Json>& lines);
std::vector<Json> read_jsonl(const std::filesystem::path& path);
Json read_json(const std::filesystem::path& path);

/// Gold labels as JSONL: {"question_id": ..., "answer": "..." | null}.
void write_gold(const std::filesystem::path& path, const GoldLabels& gold);
GoldLabels read_gold(const std::filesystem::path& path);

Json eval_report_to_json(const EvalReport& report);
EvalReport eval_report_from_json(const Json& j);
/// Columns question_id,role,mode,verdict with verdict correct, wrong or unlabeled.
std::string eval_report_csv(const EvalReport& report);

/// Whole-file helpers that surface the path in errors (DataError).
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace gates
