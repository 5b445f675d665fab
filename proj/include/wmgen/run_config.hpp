// Generation-time configuration: trigger policies, memory geometry,
// retrieval and feedback settings, sampling. Round-trips losslessly through
// a flat dotted-key JSON object (the config-file format; CLI flags override
// file values).
#pragma once

#include <cstdint>
#include <string>

#include "wmgen/config.hpp"
#include "wmgen/errors.hpp"
#include "wmgen/factcheck.hpp"
#include "json.hpp"

namespace wmgen {

struct TriggerPolicy {
  enum class Mode { off, fixed, entropy, min_prob };
  Mode mode = Mode::off;
  int interval = 1;        // fixed
  double threshold = 0.0;  // entropy / min_prob

  void validate() const {
    if (mode == Mode::fixed && interval < 1) {
      throw ConfigError("trigger interval must be >= 1");
    }
    if (mode == Mode::entropy && threshold < 0.0) {
      throw ConfigError("entropy threshold must be >= 0");
    }
    if (mode == Mode::min_prob && (threshold <= 0.0 || threshold >= 1.0)) {
      throw ConfigError("min-prob threshold must be in (0, 1)");
    }
  }

  static TriggerPolicy off() { return TriggerPolicy{}; }
  static TriggerPolicy fixed(int t) {
    return TriggerPolicy{Mode::fixed, t, 0.0};
  }
  static TriggerPolicy entropy(double th) {
    return TriggerPolicy{Mode::entropy, 1, th};
  }
  static TriggerPolicy min_prob(double th) {
    return TriggerPolicy{Mode::min_prob, 1, th};
  }
};

std::string to_string(TriggerPolicy::Mode m);
TriggerPolicy::Mode trigger_mode_from_string(const std::string& s);

struct GenerationConfig {
  TriggerPolicy retrieval = TriggerPolicy::fixed(1);
  TriggerPolicy verification = TriggerPolicy::fixed(8);
  int k_r = 4;
  int k_v = 2;
  int unit_tokens = 128;  // memory-unit token cap
  // Position where the prompt starts; -1 means "same as unit_tokens". Units
  // always occupy positions 0..token_count-1 below it.
  int context_base = -1;
  bool include_context_branch = true;
  bool retrieval_at_start_only = false;
  // Degeneration support: place the prompt immediately after the first
  // retrieved unit instead of at the fixed offset.
  bool snug_context_base = false;
  double tau = 0.25;
  int top_n = 4;
  double datastore_fraction = 1.0;
  FeedbackForm form{};
  SamplePolicy sampling{};
  uint64_t seed = 1;
  int max_steps = 1024;
  int r_max = 2;  // regeneration attempts per boundary before accept-best
  bool fail_open = true;
  bool use_precompute = true;

  int effective_context_base() const {
    return context_base >= 0 ? context_base : unit_tokens;
  }

  void validate() const {
    retrieval.validate();
    verification.validate();
    sampling.validate();
    if (k_r < 0 || k_v < 0) throw ConfigError("memory capacities must be >= 0");
    if (unit_tokens < 1) throw ConfigError("unit_tokens must be >= 1");
    if (!snug_context_base && unit_tokens > effective_context_base()) {
      throw ConfigError("unit_tokens must not exceed context_base");
    }
    if (tau < 0.0 || tau > 1.0) throw ConfigError("tau must be in [0, 1]");
    if (top_n < 1) throw ConfigError("top_n must be >= 1");
    if (datastore_fraction < 0.0 || datastore_fraction > 1.0) {
      throw ConfigError("datastore_fraction must be in [0, 1]");
    }
    if (max_steps < 1) throw ConfigError("max_steps must be >= 1");
    if (r_max < 0) throw ConfigError("r_max must be >= 0");
  }
};

// Flat dotted-key JSON ("retrieval.mode", "memory.k_r", ...).
nlohmann::json config_to_json(const GenerationConfig& cfg);
GenerationConfig config_from_json(const nlohmann::json& j);
// Keys whose values differ between the two configs.
std::vector<std::string> config_diff(const GenerationConfig& a,
                                     const GenerationConfig& b);

}  // namespace wmgen
