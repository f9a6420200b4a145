#include "flaky/config.hpp"

#include "flaky/error.hpp"
#include "flaky/io.hpp"
#include "flaky/rng.hpp"

namespace flaky {

namespace {

using ojson = nlohmann::ordered_json;

std::string_view render(SymbolicMode m) { return m == SymbolicMode::adaptive ? "adaptive" : "hardcoded"; }

SymbolicMode parse_symbolic_mode(std::string_view s) {
  if (s == "adaptive") return SymbolicMode::adaptive;
  if (s == "hardcoded") return SymbolicMode::hardcoded;
  throw InputError("unknown symbolic mode '" + std::string(s) + "'");
}

// Reads obj[key] into `out` when present and removes it, so leftovers can be
// reported as unknown.
template <typename T>
void take(nlohmann::json& obj, const char* key, T& out, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->template get<T>();
  } catch (const nlohmann::json::exception&) {
    throw InputError("config: bad type for " + where + key);
  }
  obj.erase(it);
}

void reject_unknown(const nlohmann::json& obj, const std::string& where) {
  if (!obj.empty()) throw InputError("config: unknown key " + where + obj.begin().key());
}

nlohmann::json section(nlohmann::json& root, const char* key) {
  auto it = root.find(key);
  if (it == root.end()) return nlohmann::json::object();
  if (!it->is_object()) throw InputError(std::string("config: '") + key + "' must be an object");
  auto out = *it;
  root.erase(it);
  return out;
}

}  // namespace

RunConfig RunConfig::with_preset(std::string_view preset) {
  RunConfig c;
  c.preset = std::string(preset);
  if (preset == "finetune") {
    c.model = ModelConfig{};
    c.training = TrainingConfig::fine_tuning();
  } else if (preset == "desk") {
    c.model.d_neural = 64;
    c.model.vocab_cap = 2048;
    c.model.max_seq = 256;
    c.training = TrainingConfig::from_scratch();
  } else {
    throw InputError("unknown preset '" + std::string(preset) + "' (expected finetune or desk)");
  }
  return c;
}

RunConfig RunConfig::from_json(std::string_view text) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("config: malformed JSON (") + e.what() + ")");
  }
  if (!root.is_object()) throw InputError("config: expected a JSON object");
  std::string preset = "desk";
  take(root, "preset", preset, "");
  RunConfig c = with_preset(preset);
  take(root, "seed", c.seed, "");
  take(root, "folds", c.folds, "");

  auto m = section(root, "mining");
  take(m, "top_k", c.mining.top_k, "mining.");
  take(m, "n_min", c.mining.n_min, "mining.");
  take(m, "p_max", c.mining.p_max, "mining.");
  take(m, "positive_only", c.mining.positive_only, "mining.");
  reject_unknown(m, "mining.");

  auto md = section(root, "model");
  take(md, "d_neural", c.model.d_neural, "model.");
  take(md, "vocab_cap", c.model.vocab_cap, "model.");
  take(md, "max_seq", c.model.max_seq, "model.");
  take(md, "attention_blocks", c.model.n_attention_blocks, "model.");
  take(md, "dropout", c.model.dropout_rate, "model.");
  take(md, "positional", c.model.positional, "model.");
  reject_unknown(md, "model.");

  auto s = section(root, "symbolic");
  take(s, "enabled", c.model.use_symbolic, "symbolic.");
  std::string mode(render(c.symbolic.mode));
  take(s, "mode", mode, "symbolic.");
  c.symbolic.mode = parse_symbolic_mode(mode);
  take(s, "non_flaky_slot", c.symbolic.non_flaky_slot, "symbolic.");
  reject_unknown(s, "symbolic.");

  auto t = section(root, "training");
  auto& tr = c.training;
  take(t, "learning_rate", tr.learning_rate, "training.");
  take(t, "weight_decay", tr.weight_decay, "training.");
  take(t, "epochs", tr.epochs, "training.");
  take(t, "batch_size", tr.batch_size, "training.");
  take(t, "beta_ens", tr.beta_ens, "training.");
  take(t, "focal_alpha", tr.focal.alpha, "training.");
  take(t, "focal_gamma", tr.focal.gamma, "training.");
  take(t, "lambda_bin", tr.mix.lambda_bin, "training.");
  take(t, "lambda_cat", tr.mix.lambda_cat, "training.");
  take(t, "beta1", tr.beta1, "training.");
  take(t, "beta2", tr.beta2, "training.");
  take(t, "epsilon", tr.epsilon, "training.");
  reject_unknown(t, "training.");

  auto a = section(root, "augment");
  take(a, "enabled", c.augment, "augment.");
  take(a, "p_base", c.augment_p_base, "augment.");
  take(a, "p_rare", c.augment_p_rare, "augment.");
  reject_unknown(a, "augment.");

  auto st = section(root, "stress");
  std::vector<std::string> modes;
  take(st, "modes", modes, "stress.");
  reject_unknown(st, "stress.");
  if (!modes.empty()) {
    c.stress_modes.clear();
    for (const auto& x : modes) c.stress_modes.push_back(parse_stress_mode(x));
  }
  reject_unknown(root, "");
  c.validate();
  return c;
}

ojson RunConfig::to_json() const {
  ojson j;
  j["preset"] = preset;
  j["seed"] = seed;
  j["folds"] = folds;
  j["mining"] = {{"top_k", mining.top_k},
                 {"n_min", mining.n_min},
                 {"p_max", mining.p_max},
                 {"positive_only", mining.positive_only}};
  j["model"] = {{"d_neural", model.d_neural},
                {"vocab_cap", model.vocab_cap},
                {"max_seq", model.max_seq},
                {"attention_blocks", model.n_attention_blocks},
                {"dropout", model.dropout_rate},
                {"positional", model.positional}};
  j["symbolic"] = {{"enabled", model.use_symbolic},
                   {"mode", std::string(render(symbolic.mode))},
                   {"non_flaky_slot", symbolic.non_flaky_slot}};
  j["training"] = {{"learning_rate", training.learning_rate},
                   {"weight_decay", training.weight_decay},
                   {"epochs", training.epochs},
                   {"batch_size", training.batch_size},
                   {"beta_ens", training.beta_ens},
                   {"focal_alpha", training.focal.alpha},
                   {"focal_gamma", training.focal.gamma},
                   {"lambda_bin", training.mix.lambda_bin},
                   {"lambda_cat", training.mix.lambda_cat},
                   {"beta1", training.beta1},
                   {"beta2", training.beta2},
                   {"epsilon", training.epsilon}};
  j["augment"] = {{"enabled", augment}, {"p_base", augment_p_base}, {"p_rare", augment_p_rare}};
  auto modes = ojson::array();
  for (auto m : stress_modes) modes.push_back(std::string(flaky::render(m)));
  j["stress"] = {{"modes", modes}};
  return j;
}

std::string RunConfig::hash() const { return hex64(fnv1a(to_json().dump())); }

void RunConfig::validate() const {
  if (folds < 2) throw InputError("folds must be at least 2");
  if (mining.top_k < 1) throw InputError("top_k must be at least 1");
  if (!(mining.p_max > 0.0 && mining.p_max <= 1.0)) throw InputError("p_max must be in (0, 1]");
  model.validate();
  training.validate();
  if (!(augment_p_base >= 0.0 && augment_p_base <= 1.0) || !(augment_p_rare >= 0.0 && augment_p_rare <= 1.0))
    throw InputError("augmentation probabilities must be in [0, 1]");
  if (stress_modes.empty()) throw InputError("at least one stress mode is required");
}

Seeds RunConfig::seeds() const {
  return {seed, derive_seed(seed, "init"), derive_seed(seed, "train"), derive_seed(seed, "augment"),
          derive_seed(seed, "stress")};
}

std::string RunConfig::variant() const {
  if (!model.use_symbolic) return "no-symbolic";
  if (symbolic.mode == SymbolicMode::hardcoded) return "hardcoded-symbols";
  return "full";
}

CvSettings RunConfig::settings(kernels::Exec exec) const {
  validate();
  const auto s = seeds();
  CvSettings cv;
  cv.mining = mining;
  cv.model = model;
  cv.model.seed = s.init;
  cv.symbolic = symbolic;
  cv.training = training;
  cv.training.seed = s.training;
  cv.training.exec = exec;
  AugmentationPolicy policy;
  policy.p_base = augment_p_base;
  policy.p_rare = augment_p_rare;
  if (augment) {
    policy.seed = s.augment;
    cv.training.augmentation = policy;
  }
  cv.stress_policy = policy;
  cv.stress_policy.seed = s.stress;
  cv.stress_modes = stress_modes;
  return cv;
}

ojson seeds_to_json(const Seeds& s) {
  return {{"split", s.split}, {"init", s.init}, {"training", s.training}, {"augment", s.augment}, {"stress", s.stress}};
}

ojson make_manifest(std::string_view command, const RunConfig& config, std::string_view corpus_hash) {
  ojson j;
  j["tool"] = "flaky";
  j["tool_version"] = std::string(kToolVersion);
  j["command"] = std::string(command);
  j["config_hash"] = config.hash();
  j["config"] = config.to_json();
  j["seeds"] = seeds_to_json(config.seeds());
  j["corpus_hash"] = std::string(corpus_hash);
  return j;
}

std::string corpus_hash(const Corpus& corpus) { return hex64(fnv1a(serialize_corpus(corpus))); }

}  // namespace flaky
