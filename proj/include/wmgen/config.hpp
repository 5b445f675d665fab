#pragma once

#include <cstdint>
#include <string>

#include "wmgen/errors.hpp"

namespace wmgen {

struct ModelConfig {
  int64_t vocab_size = 0;
  int64_t d_model = 0;
  int64_t n_heads = 0;
  int64_t n_layers = 0;
  int64_t d_ff = 0;
  int64_t max_positions = 0;
  uint64_t seed = 0;

  int64_t head_dim() const { return d_model / n_heads; }

  void validate() const {
    if (vocab_size <= 0) throw ConfigError("vocab_size must be positive");
    if (d_model <= 0) throw ConfigError("d_model must be positive");
    if (n_heads <= 0) throw ConfigError("n_heads must be positive");
    if (n_layers <= 0) throw ConfigError("n_layers must be positive");
    if (d_ff <= 0) throw ConfigError("d_ff must be positive");
    if (max_positions <= 0) throw ConfigError("max_positions must be positive");
    if (d_model % n_heads != 0) {
      throw ConfigError("d_model (" + std::to_string(d_model) +
                        ") not divisible by n_heads (" +
                        std::to_string(n_heads) + ")");
    }
  }
};

// Sampling policy. Greedy breaks ties toward the lowest token ID.
struct SamplePolicy {
  enum class Mode { greedy, temperature };
  Mode mode = Mode::greedy;
  double temperature = 1.0;

  void validate() const {
    if (mode == Mode::temperature && temperature <= 0.0) {
      throw ConfigError("sampling temperature must be > 0");
    }
  }
};

}  // namespace wmgen
