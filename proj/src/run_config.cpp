#include "wmgen/run_config.hpp"

namespace wmgen {

std::string to_string(TriggerPolicy::Mode m) {
  switch (m) {
    case TriggerPolicy::Mode::off: return "off";
    case TriggerPolicy::Mode::fixed: return "fixed";
    case TriggerPolicy::Mode::entropy: return "entropy";
    default: return "min_prob";
  }
}

TriggerPolicy::Mode trigger_mode_from_string(const std::string& s) {
  if (s == "off") return TriggerPolicy::Mode::off;
  if (s == "fixed") return TriggerPolicy::Mode::fixed;
  if (s == "entropy") return TriggerPolicy::Mode::entropy;
  if (s == "min_prob") return TriggerPolicy::Mode::min_prob;
  throw ConfigError("unknown trigger mode: " + s);
}

nlohmann::json config_to_json(const GenerationConfig& cfg) {
  nlohmann::json j;
  j["retrieval.mode"] = to_string(cfg.retrieval.mode);
  j["retrieval.interval"] = cfg.retrieval.interval;
  j["retrieval.threshold"] = cfg.retrieval.threshold;
  j["verification.mode"] = to_string(cfg.verification.mode);
  j["verification.interval"] = cfg.verification.interval;
  j["verification.threshold"] = cfg.verification.threshold;
  j["memory.k_r"] = cfg.k_r;
  j["memory.k_v"] = cfg.k_v;
  j["memory.unit_tokens"] = cfg.unit_tokens;
  j["memory.context_base"] = cfg.context_base;
  j["memory.context_branch"] = cfg.include_context_branch;
  j["memory.precompute"] = cfg.use_precompute;
  j["retrieval.at_start_only"] = cfg.retrieval_at_start_only;
  j["memory.snug_context_base"] = cfg.snug_context_base;
  j["retrieval.tau"] = cfg.tau;
  j["retrieval.top_n"] = cfg.top_n;
  j["retrieval.datastore_fraction"] = cfg.datastore_fraction;
  j["feedback.refuting"] = cfg.form.include_refuting;
  j["feedback.supporting"] = cfg.form.include_supporting;
  j["feedback.instruction"] = cfg.form.include_instruction;
  j["sampling.mode"] =
      cfg.sampling.mode == SamplePolicy::Mode::greedy ? "greedy" : "temperature";
  j["sampling.temperature"] = cfg.sampling.temperature;
  j["sampling.seed"] = cfg.seed;
  j["limits.max_steps"] = cfg.max_steps;
  j["limits.r_max"] = cfg.r_max;
  j["limits.fail_open"] = cfg.fail_open;
  return j;
}

GenerationConfig config_from_json(const nlohmann::json& j) {
  GenerationConfig cfg;
  auto get = [&j](const char* key, auto& into) {
    if (j.contains(key)) into = j.at(key).get<std::decay_t<decltype(into)>>();
  };
  std::string mode;
  if (j.contains("retrieval.mode")) {
    mode = j.at("retrieval.mode").get<std::string>();
    cfg.retrieval.mode = trigger_mode_from_string(mode);
  }
  get("retrieval.interval", cfg.retrieval.interval);
  get("retrieval.threshold", cfg.retrieval.threshold);
  if (j.contains("verification.mode")) {
    mode = j.at("verification.mode").get<std::string>();
    cfg.verification.mode = trigger_mode_from_string(mode);
  }
  get("verification.interval", cfg.verification.interval);
  get("verification.threshold", cfg.verification.threshold);
  get("memory.k_r", cfg.k_r);
  get("memory.k_v", cfg.k_v);
  get("memory.unit_tokens", cfg.unit_tokens);
  get("memory.context_base", cfg.context_base);
  get("memory.context_branch", cfg.include_context_branch);
  get("memory.precompute", cfg.use_precompute);
  get("retrieval.at_start_only", cfg.retrieval_at_start_only);
  get("memory.snug_context_base", cfg.snug_context_base);
  get("retrieval.tau", cfg.tau);
  get("retrieval.top_n", cfg.top_n);
  get("retrieval.datastore_fraction", cfg.datastore_fraction);
  get("feedback.refuting", cfg.form.include_refuting);
  get("feedback.supporting", cfg.form.include_supporting);
  get("feedback.instruction", cfg.form.include_instruction);
  if (j.contains("sampling.mode")) {
    const auto s = j.at("sampling.mode").get<std::string>();
    if (s == "greedy") {
      cfg.sampling.mode = SamplePolicy::Mode::greedy;
    } else if (s == "temperature") {
      cfg.sampling.mode = SamplePolicy::Mode::temperature;
    } else {
      throw ConfigError("unknown sampling.mode: " + s);
    }
  }
  get("sampling.temperature", cfg.sampling.temperature);
  get("sampling.seed", cfg.seed);
  get("limits.max_steps", cfg.max_steps);
  get("limits.r_max", cfg.r_max);
  get("limits.fail_open", cfg.fail_open);
  return cfg;
}

std::vector<std::string> config_diff(const GenerationConfig& a,
                                     const GenerationConfig& b) {
  const auto ja = config_to_json(a);
  const auto jb = config_to_json(b);
  std::vector<std::string> keys;
  for (auto it = ja.begin(); it != ja.end(); ++it) {
    if (jb.at(it.key()) != it.value()) keys.push_back(it.key());
  }
  return keys;
}

}  // namespace wmgen
