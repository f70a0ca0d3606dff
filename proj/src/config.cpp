#include "gates/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "gates/errors.hpp"

namespace gates {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as " + expected);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value, const char* expected) {
  T out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end) bad_value(key, value, expected);
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  const double d = parse_number<double>(key, value, "a real number");
  if (!std::isfinite(d)) bad_value(key, value, "a finite real number");
  return d;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value, "a boolean (true/false)");
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::vector<double> parse_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(key, trim(item)));
  if (out.empty()) bad_value(key, value, "a comma-separated list of reals");
  return out;
}

std::string format_list(const std::vector<double>& values) {
  std::string s;
  for (std::size_t i = 0; i < values.size(); ++i) s += (i ? "," : "") + format_double(values[i]);
  return s;
}

struct KeySpec {
  std::string doc;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

class Registry {
 public:
  template <typename F>
  void integer(const std::string& key, const std::string& doc, F ref) {
    add(key, doc,
        [ref](RunConfig& c, const std::string& k, const std::string& v) { ref(c) = parse_number<int>(k, v, "an integer"); },
        [ref](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); });
  }
  template <typename F>
  void int64(const std::string& key, const std::string& doc, F ref) {
    add(key, doc,
        [ref](RunConfig& c, const std::string& k, const std::string& v) {
          ref(c) = parse_number<std::int64_t>(k, v, "an integer");
        },
        [ref](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); });
  }
  template <typename F>
  void uint64(const std::string& key, const std::string& doc, F ref) {
    add(key, doc,
        [ref](RunConfig& c, const std::string& k, const std::string& v) {
          ref(c) = parse_number<std::uint64_t>(k, v, "an unsigned 64-bit integer");
        },
        [ref](const RunConfig& c) { return std::to_string(ref(const_cast<RunConfig&>(c))); });
  }
  template <typename F>
  void real(const std::string& key, const std::string& doc, F ref) {
    add(key, doc, [ref](RunConfig& c, const std::string& k, const std::string& v) { ref(c) = parse_double(k, v); },
        [ref](const RunConfig& c) { return format_double(ref(const_cast<RunConfig&>(c))); });
  }
  template <typename F>
  void boolean(const std::string& key, const std::string& doc, F ref) {
    add(key, doc, [ref](RunConfig& c, const std::string& k, const std::string& v) { ref(c) = parse_bool(k, v); },
        [ref](const RunConfig& c) { return std::string(ref(const_cast<RunConfig&>(c)) ? "true" : "false"); });
  }
  template <typename F>
  void text(const std::string& key, const std::string& doc, F ref) {
    add(key, doc, [ref](RunConfig& c, const std::string&, const std::string& v) { ref(c) = v; },
        [ref](const RunConfig& c) { return ref(const_cast<RunConfig&>(c)); });
  }
  void add(const std::string& key, const std::string& doc,
           std::function<void(RunConfig&, const std::string&, const std::string&)> set,
           std::function<std::string(const RunConfig&)> get) {
    keys_.emplace(key, KeySpec{doc, std::move(set), std::move(get)});
  }

  const std::map<std::string, KeySpec>& keys() const { return keys_; }

  void set(RunConfig& c, const std::string& key, const std::string& value) const {
    auto it = keys_.find(key);
    if (it == keys_.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second.set(c, key, value);
  }

 private:
  std::map<std::string, KeySpec> keys_;
};

const Registry& registry() {
  static const Registry reg = [] {
    Registry r;
    r.uint64("seed", "master seed; every random stream is derived from it", [](RunConfig& c) -> auto& { return c.seed; });
    r.text("run_dir", "directory for datasets, checkpoints, metrics and reports",
           [](RunConfig& c) -> auto& { return c.run_dir; });
    r.integer("workers", "worker threads; results do not depend on it", [](RunConfig& c) -> auto& { return c.workers; });

    r.integer("world.entities", "synthetic entities, two candidate questions each",
              [](RunConfig& c) -> auto& { return c.world.entities; });
    r.real("world.known_fraction", "fraction of facts the warm-started student already holds",
           [](RunConfig& c) -> auto& { return c.world.known_fraction; });
    r.integer("world.decoys", "wrong values listed by an adversarial document (1-8)",
              [](RunConfig& c) -> auto& { return c.world.decoys; });

    r.integer("pretrain.tutor_per_entity", "warm-start examples reading a fact document",
              [](RunConfig& c) -> auto& { return c.pretrain.tutor_per_entity; });
    r.integer("pretrain.listing_per_entity", "warm-start listing documents per entity",
              [](RunConfig& c) -> auto& { return c.pretrain.listing_per_entity; });
    r.integer("pretrain.student_per_entity", "warm-start question-only examples per known entity",
              [](RunConfig& c) -> auto& { return c.pretrain.student_per_entity; });
    r.integer("pretrain.epochs", "warm-start passes over the corpus", [](RunConfig& c) -> auto& { return c.pretrain.epochs; });
    r.integer("pretrain.batch", "warm-start minibatch size", [](RunConfig& c) -> auto& { return c.pretrain.batch; });
    r.real("pretrain.learning_rate", "warm-start AdamW learning rate",
           [](RunConfig& c) -> auto& { return c.pretrain.learning_rate; });
    r.real("pretrain.init_scale", "initial weight scale", [](RunConfig& c) -> auto& { return c.pretrain.init_scale; });

    r.integer("model.context", "tokens in the n-gram window", [](RunConfig& c) -> auto& { return c.model.context; });
    r.integer("model.embed_dim", "embedding width", [](RunConfig& c) -> auto& { return c.model.embed_dim; });
    r.integer("model.hidden_dim", "hidden layer width", [](RunConfig& c) -> auto& { return c.model.hidden_dim; });

    r.integer("dataset.k", "tutor rollouts per candidate while filtering", [](RunConfig& c) -> auto& { return c.dataset.k; });
    r.integer("dataset.min_agree", "agreeing rollouts needed to keep a candidate",
              [](RunConfig& c) -> auto& { return c.dataset.min_agree; });
    r.real("dataset.temperature", "sampling temperature while filtering",
           [](RunConfig& c) -> auto& { return c.dataset.temperature; });
    r.add(
        "dataset.heldout", "split rule: family (disjoint question family) or fraction",
        [](RunConfig& c, const std::string& k, const std::string& v) {
          if (v == "family") {
            c.dataset.heldout = HeldoutRule::family;
          } else if (v == "fraction") {
            c.dataset.heldout = HeldoutRule::fraction;
          } else {
            bad_value(k, v, "family or fraction");
          }
        },
        [](const RunConfig& c) { return std::string(c.dataset.heldout == HeldoutRule::family ? "family" : "fraction"); });
    r.real("dataset.heldout_fraction", "held-out share under the fraction rule",
           [](RunConfig& c) -> auto& { return c.dataset.heldout_fraction; });
    r.real("dataset.adversarial_fraction", "train questions whose document is replaced by a decoy listing",
           [](RunConfig& c) -> auto& { return c.dataset.adversarial_fraction; });

    r.real("sampling.temperature", "training rollout temperature; 0 is greedy",
           [](RunConfig& c) -> auto& { return c.trainer.sampling.temperature; });
    r.real("sampling.top_p", "nucleus mass", [](RunConfig& c) -> auto& { return c.trainer.sampling.top_p; });
    r.add(
        "sampling.top_k", "top-k cutoff; 0 disables",
        [](RunConfig& c, const std::string& k, const std::string& v) {
          const int n = parse_number<int>(k, v, "an integer");
          if (n < 0) bad_value(k, v, "a nonnegative integer");
          c.trainer.sampling.top_k = n == 0 ? std::nullopt : std::optional<int>(n);
        },
        [](const RunConfig& c) { return std::to_string(c.trainer.sampling.top_k.value_or(0)); });
    r.integer("sampling.max_tokens", "completion token limit",
              [](RunConfig& c) -> auto& { return c.trainer.sampling.max_tokens; });

    r.integer("trainer.n", "questions per step", [](RunConfig& c) -> auto& { return c.trainer.n; });
    r.integer("trainer.k", "rollouts per role per question", [](RunConfig& c) -> auto& { return c.trainer.k; });
    r.integer("trainer.tau", "gate threshold: agreeing tutor rollouts needed", [](RunConfig& c) -> auto& { return c.trainer.tau; });
    r.real("trainer.learning_rate", "AdamW learning rate", [](RunConfig& c) -> auto& { return c.trainer.learning_rate; });
    r.real("trainer.weight_decay", "decoupled weight decay", [](RunConfig& c) -> auto& { return c.trainer.weight_decay; });
    r.real("trainer.grad_clip_norm", "global gradient norm limit; 0 disables",
           [](RunConfig& c) -> auto& { return c.trainer.grad_clip_norm; });
    r.integer("trainer.epochs", "passes over the train split", [](RunConfig& c) -> auto& { return c.trainer.epochs; });
    r.boolean("trainer.gate", "false trains on every question (the gate ablation)",
              [](RunConfig& c) -> auto& { return c.trainer.gate_enabled; });
    r.integer("trainer.checkpoint_every", "epochs between intermediate checkpoints; 0 disables",
              [](RunConfig& c) -> auto& { return c.checkpoint_every; });

    r.real("losses.lambda_off", "off-policy distillation weight", [](RunConfig& c) -> auto& { return c.trainer.weights.lambda_off; });
    r.real("losses.lambda_on", "on-policy distillation weight", [](RunConfig& c) -> auto& { return c.trainer.weights.lambda_on; });
    r.real("losses.lambda_cons", "consensus-reward weight", [](RunConfig& c) -> auto& { return c.trainer.weights.lambda_cons; });
    r.real("losses.lambda_kl", "reference KL weight", [](RunConfig& c) -> auto& { return c.trainer.weights.lambda_kl; });
    r.real("losses.beta", "KL coefficient inside the KL term", [](RunConfig& c) -> auto& { return c.trainer.weights.beta; });
    r.real("losses.clip_a", "advantage clip", [](RunConfig& c) -> auto& { return c.trainer.weights.clip_a; });

    r.add(
        "eval.mode", "greedy, maj_k or pass_k",
        [](RunConfig& c, const std::string&, const std::string& v) { c.eval.mode = parse_eval_mode(v); },
        [](const RunConfig& c) { return std::string(eval_mode_name(c.eval.mode)); });
    r.integer("eval.samples", "samples per question for maj_k and pass_k", [](RunConfig& c) -> auto& { return c.eval.samples; });
    r.real("eval.temperature", "sampling temperature for maj_k and pass_k",
           [](RunConfig& c) -> auto& { return c.eval.temperature; });
    r.integer("eval.max_tokens", "completion token limit", [](RunConfig& c) -> auto& { return c.eval.max_tokens; });
    r.text("eval.split", "train or heldout", [](RunConfig& c) -> auto& { return c.eval_split; });
    r.text("eval.checkpoint", "checkpoint to evaluate; empty means <run_dir>/final.ckpt",
           [](RunConfig& c) -> auto& { return c.eval_checkpoint; });

    r.integer("oracle.samples", "labeling oracle samples per question", [](RunConfig& c) -> auto& { return c.oracle.samples; });
    r.integer("oracle.min_agree", "agreeing oracle samples needed for a label",
              [](RunConfig& c) -> auto& { return c.oracle.min_agree; });
    r.real("oracle.temperature", "labeling oracle temperature", [](RunConfig& c) -> auto& { return c.oracle.temperature; });

    r.add(
        "gate.probs", "answer category probabilities, comma separated",
        [](RunConfig& c, const std::string& k, const std::string& v) { c.gate.probs = parse_list(k, v); },
        [](const RunConfig& c) { return format_list(c.gate.probs); });
    r.real("gate.invalid_prob", "probability of an invalid rollout", [](RunConfig& c) -> auto& { return c.gate.invalid_prob; });
    r.integer("gate.correct_index", "category holding the correct answer",
              [](RunConfig& c) -> auto& { return c.gate.correct_index; });
    r.integer("gate.k", "rollouts per question", [](RunConfig& c) -> auto& { return c.gate.k; });
    r.integer("gate.tau_min", "first threshold of the sweep", [](RunConfig& c) -> auto& { return c.gate.tau_min; });
    r.integer("gate.tau_max", "last threshold of the sweep", [](RunConfig& c) -> auto& { return c.gate.tau_max; });
    r.int64("gate.trials", "Monte Carlo trials; 0 skips simulation", [](RunConfig& c) -> auto& { return c.gate.trials; });
    return r;
  }();
  return reg;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

void RunConfig::finalize() {
  require(workers >= 1, "workers must be >= 1");
  require(!run_dir.empty(), "run_dir must not be empty");
  world.seed = seed;
  pretrain.seed = seed;
  pretrain.workers = workers;
  trainer.seed = seed;
  trainer.workers = workers;
  eval.seed = seed;
  eval.workers = workers;
  oracle.seed = seed;
  oracle.max_tokens = eval.max_tokens;
  if (eval.mode == EvalMode::greedy) {
    eval.samples = 1;
    eval.temperature = 0.0;
  }

  require(world.entities >= 1, "world.entities must be >= 1");
  require(world.known_fraction >= 0.0 && world.known_fraction <= 1.0, "world.known_fraction must be in [0, 1]");
  require(world.decoys >= 1 && world.decoys <= 8, "world.decoys must be in [1, 8]");
  require(pretrain.tutor_per_entity >= 0 && pretrain.listing_per_entity >= 0 && pretrain.student_per_entity >= 0,
          "pretrain example counts must be >= 0");
  require(pretrain.epochs >= 0, "pretrain.epochs must be >= 0");
  require(pretrain.batch >= 1, "pretrain.batch must be >= 1");
  require(pretrain.learning_rate >= 0.0, "pretrain.learning_rate must be >= 0");
  require(pretrain.init_scale > 0.0, "pretrain.init_scale must be > 0");
  require(model.context >= 1 && model.embed_dim >= 1 && model.hidden_dim >= 1, "model dimensions must be >= 1");
  require(dataset.k >= 1, "dataset.k must be >= 1");
  require(dataset.min_agree >= 1 && dataset.min_agree <= dataset.k,
          "dataset.min_agree must satisfy 1 <= min_agree <= dataset.k (min_agree=" + std::to_string(dataset.min_agree) +
              ", k=" + std::to_string(dataset.k) + ")");
  require(dataset.temperature >= 0.0, "dataset.temperature must be >= 0");
  require(dataset.heldout_fraction >= 0.0 && dataset.heldout_fraction <= 1.0, "dataset.heldout_fraction must be in [0, 1]");
  require(dataset.adversarial_fraction >= 0.0 && dataset.adversarial_fraction <= 1.0,
          "dataset.adversarial_fraction must be in [0, 1]");
  trainer.validate();
  require(checkpoint_every >= 0, "trainer.checkpoint_every must be >= 0");
  eval.validate();
  require(eval_split == "train" || eval_split == "heldout", "eval.split must be train or heldout");
  require(oracle.samples >= 1, "oracle.samples must be >= 1");
  require(oracle.min_agree >= 1 && oracle.min_agree <= oracle.samples,
          "oracle.min_agree must satisfy 1 <= min_agree <= oracle.samples");
  require(oracle.temperature >= 0.0, "oracle.temperature must be >= 0");

  require(!gate.probs.empty(), "gate.probs must not be empty");
  double total = gate.invalid_prob;
  for (double p : gate.probs) {
    require(p >= 0.0, "gate.probs entries must be >= 0");
    total += p;
  }
  require(gate.invalid_prob >= 0.0, "gate.invalid_prob must be >= 0");
  require(std::abs(total - 1.0) <= 1e-9, "gate.probs plus gate.invalid_prob must sum to 1");
  require(gate.correct_index >= 0 && gate.correct_index < static_cast<int>(gate.probs.size()),
          "gate.correct_index must index gate.probs");
  require(gate.k >= 1, "gate.k must be >= 1");
  require(gate.tau_min >= 1 && gate.tau_min <= gate.tau_max && gate.tau_max <= gate.k,
          "gate thresholds must satisfy 1 <= tau_min <= tau_max <= gate.k");
  require(gate.trials >= 0, "gate.trials must be >= 0");
}

RunConfig load_config(const std::optional<std::filesystem::path>& path, const std::vector<std::string>& overrides) {
  RunConfig config;
  const Registry& reg = registry();
  if (path) {
    std::ifstream in(*path);
    if (!in) throw ConfigError("cannot open config file " + path->string());
    std::string line, section;
    int number = 0;
    while (std::getline(in, line)) {
      ++number;
      const std::string where = path->string() + ":" + std::to_string(number);
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const std::string body = trim(line);
      if (body.empty()) continue;
      if (body.front() == '[') {
        if (body.back() != ']') throw ConfigError(where + ": malformed section header '" + body + "'");
        section = trim(std::string_view(body).substr(1, body.size() - 2));
        continue;
      }
      const auto eq = body.find('=');
      if (eq == std::string::npos) throw ConfigError(where + ": expected key = value, got '" + body + "'");
      std::string key = trim(std::string_view(body).substr(0, eq));
      if (!section.empty()) key = section + "." + key;
      try {
        reg.set(config, key, trim(std::string_view(body).substr(eq + 1)));
      } catch (const ConfigError& e) {
        throw ConfigError(where + ": " + e.what());
      }
    }
  }
  for (const std::string& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not key=value");
    reg.set(config, trim(std::string_view(o).substr(0, eq)), trim(std::string_view(o).substr(eq + 1)));
  }
  config.finalize();
  return config;
}

std::string dump_config(const RunConfig& config) {
  std::string out;
  for (const auto& [key, spec] : registry().keys()) out += key + " = " + spec.get(config) + "\n";
  return out;
}

std::vector<ConfigKeyDoc> config_reference() {
  const RunConfig defaults;
  std::vector<ConfigKeyDoc> out;
  for (const auto& [key, spec] : registry().keys()) out.push_back({key, spec.get(defaults), spec.doc});
  return out;
}

}  // namespace gates
