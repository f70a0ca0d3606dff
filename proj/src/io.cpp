#include "gates/io.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

#include "gates/errors.hpp"

namespace gates {

namespace {

template <typename T>
T get(const Json& j, const char* key, const std::string& what) {
  auto it = j.find(key);
  if (it == j.end()) throw DataError(what + ": missing field '" + key + "'");
  try {
    return it->template get<T>();
  } catch (const Json::exception& e) {
    throw DataError(what + ": field '" + key + "' has the wrong type");
  }
}

Json answer_json(const std::optional<CanonicalAnswer>& a) { return a ? Json(a->to_string()) : Json(nullptr); }

std::optional<CanonicalAnswer> answer_from(const Json& j, const char* key, const std::string& what) {
  auto it = j.find(key);
  if (it == j.end()) throw DataError(what + ": missing field '" + key + "'");
  if (it->is_null()) return std::nullopt;
  if (!it->is_string()) throw DataError(what + ": field '" + key + "' must be a string or null");
  return canonicalize(it->get<std::string>());
}

Role role_from(const std::string& s, const std::string& what) {
  if (s == "tutor") return Role::tutor;
  if (s == "student") return Role::student;
  throw DataError(what + ": unknown role '" + s + "'");
}

Provenance provenance_from(const std::string& s, const std::string& what) {
  if (s == "synthetic") return Provenance::synthetic;
  if (s == "imported") return Provenance::imported;
  throw DataError(what + ": unknown provenance '" + s + "'");
}

Json parse_line(const std::string& line, const std::string& where) {
  try {
    return Json::parse(line);
  } catch (const Json::parse_error& e) {
    throw DataError(where + ": " + e.what());
  }
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

Json question_to_json(const QuestionRecord& q) {
  Json j;
  j["question_id"] = q.question_id;
  j["document"] = q.document;
  j["question"] = q.question;
  j["provenance"] = std::string(provenance_name(q.provenance));
  j["build_consensus_answer"] = answer_json(q.build_consensus_answer);
  return j;
}

QuestionRecord question_from_json(const Json& j) {
  const std::string what = "question record";
  if (!j.is_object()) throw DataError(what + ": not a JSON object");
  QuestionRecord q;
  q.question_id = get<std::string>(j, "question_id", what);
  const std::string where = what + " " + q.question_id;
  q.document = get<std::string>(j, "document", where);
  q.question = get<std::string>(j, "question", where);
  q.provenance = provenance_from(get<std::string>(j, "provenance", where), where);
  q.build_consensus_answer = answer_from(j, "build_consensus_answer", where);
  return q;
}

std::string serialize_dataset(const std::vector<QuestionRecord>& records) {
  std::string out;
  for (const auto& q : records) out += question_to_json(q).dump() + "\n";
  return out;
}

std::vector<QuestionRecord> parse_dataset(const std::string& text, const std::string& source) {
  std::vector<QuestionRecord> out;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(number);
    try {
      out.push_back(question_from_json(parse_line(line, where)));
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  return out;
}

void write_dataset(const std::filesystem::path& path, const std::vector<QuestionRecord>& records) {
  write_text(path, serialize_dataset(records));
}

std::vector<QuestionRecord> read_dataset(const std::filesystem::path& path) {
  return parse_dataset(read_text(path), path.string());
}

Json rollout_to_json(const RolloutRecord& r) {
  Json j;
  j["question_id"] = r.question_id;
  j["role"] = std::string(role_name(r.role));
  j["prompt_tokens"] = r.prompt_tokens;
  j["completion_tokens"] = r.completion_tokens;
  j["completion_text"] = r.completion_text;
  j["token_logprobs"] = r.token_logprobs;
  j["extracted"] = answer_json(r.extracted);
  j["ended_with_eos"] = r.ended_with_eos;
  j["truncated"] = r.truncated;
  j["leakage"] = r.leakage;
  j["valid"] = r.valid;
  return j;
}

RolloutRecord rollout_from_json(const Json& j) {
  const std::string what = "rollout record";
  RolloutRecord r;
  r.question_id = get<std::string>(j, "question_id", what);
  r.role = role_from(get<std::string>(j, "role", what), what);
  r.prompt_tokens = get<TokenSeq>(j, "prompt_tokens", what);
  r.completion_tokens = get<TokenSeq>(j, "completion_tokens", what);
  r.completion_text = get<std::string>(j, "completion_text", what);
  r.token_logprobs = get<std::vector<double>>(j, "token_logprobs", what);
  r.extracted = answer_from(j, "extracted", what);
  r.ended_with_eos = get<bool>(j, "ended_with_eos", what);
  r.truncated = get<bool>(j, "truncated", what);
  r.leakage = get<bool>(j, "leakage", what);
  r.valid = get<bool>(j, "valid", what);
  return r;
}

Json step_to_json(const StepReport& s, std::int64_t epoch) {
  Json j;
  j["schema"] = kMetricsSchemaVersion;
  j["epoch"] = epoch;
  j["step"] = s.step;
  j["questions"] = s.questions;
  j["gate_rate"] = s.gate_rate;
  j["eligible_fraction"] = s.eligible_fraction;
  j["tie_rate"] = s.tie_rate;
  j["validity_rate"] = s.validity_rate;
  j["tutor_validity_rate"] = s.tutor_validity_rate;
  j["student_validity_rate"] = s.student_validity_rate;
  j["leakage_rate"] = s.leakage_rate;
  j["loss_off"] = s.losses.off;
  j["loss_on"] = s.losses.on;
  j["loss_cons"] = s.losses.cons;
  j["loss_kl"] = s.losses.kl;
  j["loss_total"] = s.losses.total;
  j["included_tutor_tokens"] = s.losses.included_tutor_tokens;
  j["included_student_tokens"] = s.losses.included_student_tokens;
  j["grad_norm_pre_clip"] = s.grad_norm_pre_clip;
  j["update_applied"] = s.update_applied;
  return j;
}

StepReport step_from_json(const Json& j) {
  const std::string what = "metrics line";
  const int schema = get<int>(j, "schema", what);
  if (schema != kMetricsSchemaVersion)
    throw DataError(what + ": schema " + std::to_string(schema) + " (expected " + std::to_string(kMetricsSchemaVersion) + ")");
  StepReport s;
  s.step = get<std::int64_t>(j, "step", what);
  s.questions = get<int>(j, "questions", what);
  s.gate_rate = get<double>(j, "gate_rate", what);
  s.eligible_fraction = get<double>(j, "eligible_fraction", what);
  s.tie_rate = get<double>(j, "tie_rate", what);
  s.validity_rate = get<double>(j, "validity_rate", what);
  s.tutor_validity_rate = get<double>(j, "tutor_validity_rate", what);
  s.student_validity_rate = get<double>(j, "student_validity_rate", what);
  s.leakage_rate = get<double>(j, "leakage_rate", what);
  s.losses.off = get<double>(j, "loss_off", what);
  s.losses.on = get<double>(j, "loss_on", what);
  s.losses.cons = get<double>(j, "loss_cons", what);
  s.losses.kl = get<double>(j, "loss_kl", what);
  s.losses.total = get<double>(j, "loss_total", what);
  s.losses.included_tutor_tokens = get<std::int64_t>(j, "included_tutor_tokens", what);
  s.losses.included_student_tokens = get<std::int64_t>(j, "included_student_tokens", what);
  s.grad_norm_pre_clip = get<double>(j, "grad_norm_pre_clip", what);
  s.update_applied = get<bool>(j, "update_applied", what);
  return s;
}

void append_metrics(const std::filesystem::path& path, const std::vector<Json>& lines) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw DataError("cannot append to " + path.string());
  for (const auto& j : lines) out << j.dump() << '\n';
  out.flush();
  if (!out) throw DataError("failed writing " + path.string());
}

std::vector<Json> read_jsonl(const std::filesystem::path& path) {
  std::vector<Json> out;
  std::istringstream in(read_text(path));
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty()) out.push_back(parse_line(line, path.string() + ":" + std::to_string(number)));
  }
  return out;
}

Json read_json(const std::filesystem::path& path) { return parse_line(read_text(path), path.string()); }

void write_gold(const std::filesystem::path& path, const GoldLabels& gold) {
  std::string text;
  for (const auto& [id, answer] : gold) {
    Json j;
    j["question_id"] = id;
    j["answer"] = answer_json(answer);
    text += j.dump() + "\n";
  }
  write_text(path, text);
}

GoldLabels read_gold(const std::filesystem::path& path) {
  GoldLabels gold;
  for (const Json& j : read_jsonl(path)) {
    const std::string what = "gold label in " + path.string();
    gold[get<std::string>(j, "question_id", what)] = answer_from(j, "answer", what);
  }
  return gold;
}

Json eval_report_to_json(const EvalReport& report) {
  Json j;
  j["schema"] = kReportSchemaVersion;
  j["mode"] = std::string(eval_mode_name(report.mode));
  j["role"] = std::string(role_name(report.role));
  j["accuracy"] = report.accuracy;
  j["validity_rate"] = report.validity_rate;
  j["labeled_count"] = report.labeled_count;
  j["unlabeled_count"] = report.unlabeled_count;
  Json items = Json::array();
  for (const auto& v : report.per_question) {
    Json item;
    item["question_id"] = v.question_id;
    item["role"] = std::string(role_name(v.role));
    Json preds = Json::array();
    for (const auto& p : v.predictions) preds.push_back(answer_json(p));
    item["predictions"] = std::move(preds);
    item["verdict"] = v.verdict ? Json(*v.verdict) : Json(nullptr);
    items.push_back(std::move(item));
  }
  j["per_question"] = std::move(items);
  return j;
}

EvalReport eval_report_from_json(const Json& j) {
  const std::string what = "eval report";
  const int schema = get<int>(j, "schema", what);
  if (schema != kReportSchemaVersion) throw DataError(what + ": schema " + std::to_string(schema));
  EvalReport r;
  try {
    r.mode = parse_eval_mode(get<std::string>(j, "mode", what));
  } catch (const ConfigError& e) {
    throw DataError(what + ": " + e.what());
  }
  r.role = role_from(get<std::string>(j, "role", what), what);
  r.accuracy = get<double>(j, "accuracy", what);
  r.validity_rate = get<double>(j, "validity_rate", what);
  r.labeled_count = get<int>(j, "labeled_count", what);
  r.unlabeled_count = get<int>(j, "unlabeled_count", what);
  for (const Json& item : get<Json>(j, "per_question", what)) {
    QuestionVerdict v;
    v.question_id = get<std::string>(item, "question_id", what);
    v.role = role_from(get<std::string>(item, "role", what), what);
    for (const Json& p : get<Json>(item, "predictions", what)) {
      if (p.is_null()) {
        v.predictions.emplace_back();
      } else {
        v.predictions.emplace_back(canonicalize(p.get<std::string>()));
      }
    }
    const Json& verdict = get<Json>(item, "verdict", what);
    if (!verdict.is_null()) v.verdict = verdict.get<bool>();
    r.per_question.push_back(std::move(v));
  }
  return r;
}

std::string eval_report_csv(const EvalReport& report) {
  std::string out = "question_id,role,mode,verdict\n";
  for (const auto& v : report.per_question) {
    out += csv_field(v.question_id) + "," + std::string(role_name(v.role)) + "," + std::string(eval_mode_name(report.mode)) + ",";
    out += !v.verdict ? "unlabeled" : *v.verdict ? "correct" : "wrong";
    out += "\n";
  }
  return out;
}

}  // namespace gates
