// Working-memory units and FIFO pools. Every unit is encoded standalone at
// positions 0..token_count-1 (all units share the same positional IDs), so a
// refresh never touches the context cache or any other unit.
#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wmgen/kv_cache.hpp"
#include "wmgen/tokenizer.hpp"
#include "wmgen/weights.hpp"

namespace wmgen {

enum class MemoryKind { retrieval, factcheck };

const char* to_string(MemoryKind kind);

struct MemoryUnit {
  int id = 0;
  MemoryKind kind = MemoryKind::retrieval;
  std::string source_text;
  std::vector<int> tokens;  // <= max_unit_tokens, tail-truncated
  KVCache kv;               // positions 0..token_count-1
  int inserted_at_step = 0;

  int token_count() const { return static_cast<int>(tokens.size()); }
};

struct MemoryPool {
  MemoryKind kind = MemoryKind::retrieval;
  int capacity = 0;
  std::deque<MemoryUnit> units;  // oldest first

  bool contains_source(const std::string& text) const;
};

struct MemoryPools {
  MemoryPool retrieval;
  MemoryPool factcheck;

  MemoryPool& of(MemoryKind kind) {
    return kind == MemoryKind::retrieval ? retrieval : factcheck;
  }
  const MemoryPool& of(MemoryKind kind) const {
    return kind == MemoryKind::retrieval ? retrieval : factcheck;
  }
  // Unit caches in branch order: retrieval units oldest-first, then
  // factcheck units oldest-first.
  std::vector<const KVCache*> unit_caches() const;
  int total_units() const {
    return static_cast<int>(retrieval.units.size() + factcheck.units.size());
  }
};

// Tokenizes `text`, keeps the first `max_unit_tokens` tokens, and encodes
// them standalone with causal masking. Throws EmptyFeedbackError when the
// text tokenizes to nothing.
MemoryUnit encode_unit(const TransformerWeights& w, const Tokenizer& tok,
                       const std::string& text, MemoryKind kind,
                       int max_unit_tokens, int id, int step);

// Appends `unit`; if the pool exceeds capacity the oldest unit is evicted
// and returned. Capacity 0 evicts the pushed unit immediately.
std::optional<MemoryUnit> push_fifo(MemoryPool& pool, MemoryUnit unit);

struct PoolsSnapshot {
  MemoryPool retrieval;
  MemoryPool factcheck;
};

PoolsSnapshot snapshot(const MemoryPools& pools);
void restore(MemoryPools& pools, const PoolsSnapshot& snap);

// Cache of standalone passage encodings keyed by (passage id, weights
// fingerprint). Optionally persists as a directory of KV blobs plus a JSON
// index.
class PrecomputeStore {
 public:
  PrecomputeStore() = default;
  explicit PrecomputeStore(std::filesystem::path dir);

  // Returns the cached KV (hit=true) or encodes, stores, and returns it. A
  // fingerprint mismatch for the same passage id replaces the stale entry.
  std::pair<const KVCache*, bool> lookup_or_encode(
      const TransformerWeights& w, const Tokenizer& tok,
      const std::string& passage_id, const std::string& text,
      int max_unit_tokens);

  size_t size() const { return entries_.size(); }
  void flush() const;  // writes blobs + index when a directory is set

 private:
  struct Entry {
    uint64_t fingerprint;
    KVCache kv;
  };
  std::map<std::string, Entry> entries_;
  std::optional<std::filesystem::path> dir_;
};

}  // namespace wmgen
