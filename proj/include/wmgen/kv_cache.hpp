// Per-layer key/value cache for a span of tokens, plus the positional IDs
// they were encoded with. Layout per layer: [token][head][head_dim], so
// appending a token appends n_heads*head_dim doubles and never disturbs
// existing entries.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wmgen/errors.hpp"

namespace wmgen {

struct LayerKV {
  std::vector<double> k;
  std::vector<double> v;
};

struct KVCache {
  int64_t n_layers = 0;
  int64_t n_heads = 0;
  int64_t head_dim = 0;
  std::vector<int> positions;  // one per cached token, strictly increasing
  std::vector<LayerKV> layers;

  KVCache() = default;
  KVCache(int64_t layers_count, int64_t heads, int64_t hd)
      : n_layers(layers_count), n_heads(heads), head_dim(hd),
        layers(static_cast<size_t>(layers_count)) {}

  int64_t span() const { return static_cast<int64_t>(positions.size()); }
  int64_t token_width() const { return n_heads * head_dim; }

  void append_position(int pos) {
    if (!positions.empty() && pos <= positions.back()) {
      throw ContractViolation("KV cache positions must be strictly increasing");
    }
    positions.push_back(pos);
  }

  // Drops all cached entries beyond the first `new_span` tokens.
  void truncate(int64_t new_span) {
    if (new_span > span()) {
      throw ContractViolation("KV cache truncate beyond span");
    }
    positions.resize(static_cast<size_t>(new_span));
    const size_t keep = static_cast<size_t>(new_span * token_width());
    for (auto& l : layers) {
      l.k.resize(keep);
      l.v.resize(keep);
    }
  }

  bool consistent() const {
    for (const auto& l : layers) {
      if (static_cast<int64_t>(l.k.size()) != span() * token_width()) return false;
      if (l.v.size() != l.k.size()) return false;
    }
    return true;
  }

  bool operator==(const KVCache& other) const {
    if (n_layers != other.n_layers || n_heads != other.n_heads ||
        head_dim != other.head_dim || positions != other.positions) {
      return false;
    }
    for (size_t l = 0; l < layers.size(); ++l) {
      if (layers[l].k != other.layers[l].k) return false;
      if (layers[l].v != other.layers[l].v) return false;
    }
    return true;
  }

  void save_binary(const std::string& path) const;
  static KVCache load_binary(const std::string& path);
  std::vector<unsigned char> serialize() const;
};

}  // namespace wmgen
