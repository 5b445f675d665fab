#include "wmgen/memory.hpp"

#include <fstream>

#include "wmgen/errors.hpp"
#include "wmgen/model.hpp"
#include "json.hpp"

namespace wmgen {

const char* to_string(MemoryKind kind) {
  return kind == MemoryKind::retrieval ? "retrieval" : "factcheck";
}

bool MemoryPool::contains_source(const std::string& text) const {
  for (const auto& u : units) {
    if (u.source_text == text) return true;
  }
  return false;
}

std::vector<const KVCache*> MemoryPools::unit_caches() const {
  std::vector<const KVCache*> out;
  out.reserve(retrieval.units.size() + factcheck.units.size());
  for (const auto& u : retrieval.units) out.push_back(&u.kv);
  for (const auto& u : factcheck.units) out.push_back(&u.kv);
  return out;
}

MemoryUnit encode_unit(const TransformerWeights& w, const Tokenizer& tok,
                       const std::string& text, MemoryKind kind,
                       int max_unit_tokens, int id, int step) {
  if (text.empty()) throw EmptyFeedbackError("feedback text is empty");
  auto tokens = tok.tokenize(text);
  if (tokens.empty()) throw EmptyFeedbackError("feedback tokenizes to zero tokens");
  if (static_cast<int>(tokens.size()) > max_unit_tokens) {
    tokens.resize(static_cast<size_t>(max_unit_tokens));
  }
  MemoryUnit unit;
  unit.id = id;
  unit.kind = kind;
  unit.source_text = text;
  unit.tokens = std::move(tokens);
  unit.kv = encode_tokens(w, unit.tokens);
  unit.inserted_at_step = step;
  return unit;
}

std::optional<MemoryUnit> push_fifo(MemoryPool& pool, MemoryUnit unit) {
  if (unit.kind != pool.kind) {
    throw ContractViolation("unit kind does not match pool kind");
  }
  pool.units.push_back(std::move(unit));
  if (static_cast<int>(pool.units.size()) > pool.capacity) {
    MemoryUnit evicted = std::move(pool.units.front());
    pool.units.pop_front();
    return evicted;
  }
  return std::nullopt;
}

PoolsSnapshot snapshot(const MemoryPools& pools) {
  return PoolsSnapshot{pools.retrieval, pools.factcheck};
}

void restore(MemoryPools& pools, const PoolsSnapshot& snap) {
  pools.retrieval = snap.retrieval;
  pools.factcheck = snap.factcheck;
}

PrecomputeStore::PrecomputeStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(*dir_);
  const auto index_path = *dir_ / "index.json";
  if (!std::filesystem::exists(index_path)) return;
  std::ifstream in(index_path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw IoError("malformed precompute index: " + std::string(e.what()));
  }
  for (const auto& e : j.at("entries")) {
    Entry entry;
    entry.fingerprint = e.at("fingerprint").get<uint64_t>();
    entry.kv = KVCache::load_binary((*dir_ / e.at("file").get<std::string>()).string());
    entries_.emplace(e.at("passage_id").get<std::string>(), std::move(entry));
  }
}

std::pair<const KVCache*, bool> PrecomputeStore::lookup_or_encode(
    const TransformerWeights& w, const Tokenizer& tok,
    const std::string& passage_id, const std::string& text,
    int max_unit_tokens) {
  const uint64_t fp = weights_fingerprint(w);
  auto it = entries_.find(passage_id);
  if (it != entries_.end() && it->second.fingerprint == fp) {
    return {&it->second.kv, true};
  }
  auto tokens = tok.tokenize(text);
  if (tokens.empty()) throw EmptyFeedbackError("passage tokenizes to zero tokens");
  if (static_cast<int>(tokens.size()) > max_unit_tokens) {
    tokens.resize(static_cast<size_t>(max_unit_tokens));
  }
  Entry entry{fp, encode_tokens(w, tokens)};
  auto [pos, _] = entries_.insert_or_assign(passage_id, std::move(entry));
  return {&pos->second.kv, false};
}

void PrecomputeStore::flush() const {
  if (!dir_) return;
  nlohmann::json index;
  index["entries"] = nlohmann::json::array();
  int i = 0;
  for (const auto& [id, entry] : entries_) {
    const std::string file = "kv_" + std::to_string(i++) + ".bin";
    entry.kv.save_binary((*dir_ / file).string());
    index["entries"].push_back({{"passage_id", id},
                                {"fingerprint", entry.fingerprint},
                                {"file", file}});
  }
  std::ofstream out(*dir_ / "index.json");
  if (!out) throw IoError("cannot write precompute index");
  out << index.dump(2) << "\n";
}

}  // namespace wmgen
