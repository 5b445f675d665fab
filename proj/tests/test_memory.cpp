#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>

#include "wmgen/errors.hpp"
#include "wmgen/memory.hpp"
#include "wmgen/model.hpp"
#include "wmgen/rng.hpp"
#include "wmgen/tokenizer.hpp"
#include "wmgen/weights.hpp"

using namespace wmgen;

namespace {

struct Fixture {
  ModelConfig cfg{0, 8, 2, 2, 16, 64, 11};
  Tokenizer tok = Tokenizer::build(
      {"verona", "was", "founded", "in", "1203", "blue", "sky", "tall",
       "tower", "a", "b", "c", "d", "e", "f", "g", "h", "i", "j", "k"});
  TransformerWeights w;
  Fixture() {
    cfg.vocab_size = tok.size();
    w = init_weights(cfg);
  }
};

}  // namespace

TEST_CASE("encode_unit: positions are exactly 0..token_count-1") {
  Fixture f;
  const auto u1 = encode_unit(f.w, f.tok, "verona was founded in 1203.",
                              MemoryKind::retrieval, 16, 0, 0);
  const auto u2 = encode_unit(f.w, f.tok, "blue sky.", MemoryKind::factcheck, 16, 1, 3);
  for (const auto* u : {&u1, &u2}) {
    REQUIRE(u->kv.span() == u->token_count());
    for (int i = 0; i < u->token_count(); ++i) {
      CHECK(u->kv.positions[static_cast<size_t>(i)] == i);
    }
    CHECK(u->kv.consistent());
  }
}

TEST_CASE("encode_unit: determinism up to id and step") {
  Fixture f;
  const auto a = encode_unit(f.w, f.tok, "tall tower.", MemoryKind::retrieval, 16, 0, 0);
  const auto b = encode_unit(f.w, f.tok, "tall tower.", MemoryKind::retrieval, 7, 9, 4);
  CHECK(a.kv == b.kv);
  CHECK(a.tokens == b.tokens);
  CHECK(a.id != b.id);
}

TEST_CASE("encode_unit: overlong text keeps the first M tokens") {
  Fixture f;
  std::string text;
  for (int i = 0; i < 32; ++i) text += "a b ";
  const int M = 16;
  const auto u = encode_unit(f.w, f.tok, text, MemoryKind::retrieval, M, 0, 0);
  CHECK(u.token_count() == M);
  const auto all = f.tok.tokenize(text);
  for (int i = 0; i < M; ++i) CHECK(u.tokens[static_cast<size_t>(i)] == all[static_cast<size_t>(i)]);
}

TEST_CASE("encode_unit: empty feedback is an error") {
  Fixture f;
  CHECK_THROWS_AS(encode_unit(f.w, f.tok, "", MemoryKind::retrieval, 16, 0, 0),
                  EmptyFeedbackError);
  CHECK_THROWS_AS(encode_unit(f.w, f.tok, "   ", MemoryKind::retrieval, 16, 0, 0),
                  EmptyFeedbackError);
}

TEST_CASE("push_fifo laws") {
  Fixture f;
  auto unit = [&f](int id) {
    return encode_unit(f.w, f.tok, "a b c.", MemoryKind::retrieval, 8, id, id);
  };

  MemoryPool pool{MemoryKind::retrieval, 3, {}};
  CHECK(!push_fifo(pool, unit(1)).has_value());
  CHECK(!push_fifo(pool, unit(2)).has_value());
  CHECK(!push_fifo(pool, unit(3)).has_value());
  const auto evicted = push_fifo(pool, unit(4));
  REQUIRE(evicted.has_value());
  CHECK(evicted->id == 1);
  REQUIRE(pool.units.size() == 3);
  CHECK(pool.units[0].id == 2);
  CHECK(pool.units[1].id == 3);
  CHECK(pool.units[2].id == 4);

  MemoryPool one{MemoryKind::retrieval, 1, {}};
  CHECK(!push_fifo(one, unit(10)).has_value());
  const auto out = push_fifo(one, unit(11));
  REQUIRE(out.has_value());
  CHECK(out->id == 10);
  CHECK(one.units.front().id == 11);

  MemoryPool other{MemoryKind::factcheck, 2, {}};
  CHECK_THROWS_AS(push_fifo(other, unit(1)), ContractViolation);
}

TEST_CASE("FIFO properties under random interleavings + refresh locality") {
  Fixture f;
  Rng rng(101);
  MemoryPools pools;
  pools.retrieval = MemoryPool{MemoryKind::retrieval, 3, {}};
  pools.factcheck = MemoryPool{MemoryKind::factcheck, 2, {}};
  std::vector<int> retr_order, fact_order;

  const std::vector<std::string> texts = {"a b.", "c d.", "e f.", "g h.", "i j."};
  for (int op = 0; op < 120; ++op) {
    const bool to_retrieval = rng.below(2) == 0;
    auto& pool = to_retrieval ? pools.retrieval : pools.factcheck;
    auto& order = to_retrieval ? retr_order : fact_order;

    // Snapshot the other pool's bytes before the push.
    const auto& other = to_retrieval ? pools.factcheck : pools.retrieval;
    std::vector<std::vector<unsigned char>> other_bytes;
    for (const auto& u : other.units) other_bytes.push_back(u.kv.serialize());

    const auto unit =
        encode_unit(f.w, f.tok, texts[rng.below(texts.size())],
                    to_retrieval ? MemoryKind::retrieval : MemoryKind::factcheck,
                    8, op, op);
    order.push_back(op);
    const auto evicted = push_fifo(pool, unit);

    // Capacity bound.
    CHECK(static_cast<int>(pool.units.size()) <= pool.capacity);
    // Eviction order equals insertion order.
    if (evicted) {
      CHECK(evicted->id == order.front());
      order.erase(order.begin());
    }
    for (size_t i = 0; i < pool.units.size(); ++i) {
      CHECK(pool.units[i].id == order[i]);
      CHECK(pool.units[i].kv.positions.front() == 0);
      CHECK(pool.units[i].kv.span() == pool.units[i].token_count());
    }
    // Refresh locality: untouched pool is bit-identical.
    REQUIRE(other.units.size() == other_bytes.size());
    for (size_t i = 0; i < other.units.size(); ++i) {
      CHECK(other.units[i].kv.serialize() == other_bytes[i]);
    }
  }
}

TEST_CASE("snapshot/restore round trip") {
  Fixture f;
  MemoryPools pools;
  pools.retrieval = MemoryPool{MemoryKind::retrieval, 2, {}};
  pools.factcheck = MemoryPool{MemoryKind::factcheck, 2, {}};

  const auto empty_snap = snapshot(pools);
  CHECK(empty_snap.retrieval.units.empty());

  push_fifo(pools.retrieval,
            encode_unit(f.w, f.tok, "a b.", MemoryKind::retrieval, 8, 0, 0));
  const auto snap = snapshot(pools);
  push_fifo(pools.retrieval,
            encode_unit(f.w, f.tok, "c d.", MemoryKind::retrieval, 8, 1, 1));
  CHECK(pools.retrieval.units.size() == 2);
  restore(pools, snap);
  REQUIRE(pools.retrieval.units.size() == 1);
  CHECK(pools.retrieval.units[0].id == 0);

  // Snapshots differ iff a push happened in between.
  const auto snap2 = snapshot(pools);
  CHECK(snap2.retrieval.units.size() == snap.retrieval.units.size());
}

TEST_CASE("precompute store: hit/miss semantics and identical downstream logits") {
  Fixture f;
  PrecomputeStore store;
  const std::string text = "verona was founded in 1203.";
  auto [kv1, hit1] = store.lookup_or_encode(f.w, f.tok, "p0", text, 16);
  CHECK(!hit1);
  auto [kv2, hit2] = store.lookup_or_encode(f.w, f.tok, "p0", text, 16);
  CHECK(hit2);
  CHECK(*kv1 == *kv2);

  // Hit path and miss path give identical logits downstream.
  const auto fresh = encode_tokens(f.w, f.tok.tokenize(text));
  std::vector<int> ctx_tokens = f.tok.tokenize("blue sky.");
  std::vector<int> positions = {16, 17, 18};
  KVCache c1, c2;
  const KVCache* u1[1] = {kv2};
  const KVCache* u2[1] = {&fresh};
  const auto l1 = forward_step(f.w, c1, u1, ctx_tokens, positions, AggregationConfig{true});
  const auto l2 = forward_step(f.w, c2, u2, ctx_tokens, positions, AggregationConfig{true});
  CHECK(l1 == l2);

  // Changed weights fingerprint is a miss and replaces the entry.
  ModelConfig cfg2 = f.cfg;
  cfg2.seed = 999;
  const TransformerWeights w2 = init_weights(cfg2);
  auto [kv3, hit3] = store.lookup_or_encode(w2, f.tok, "p0", text, 16);
  CHECK(!hit3);
  CHECK(!(*kv3 == fresh));
  auto [kv4, hit4] = store.lookup_or_encode(w2, f.tok, "p0", text, 16);
  CHECK(hit4);
  (void)kv4;
}

TEST_CASE("precompute store persists as KV blobs plus JSON index") {
  Fixture f;
  const auto dir = std::filesystem::temp_directory_path() / "wmgen_store_test";
  std::filesystem::remove_all(dir);
  {
    PrecomputeStore store(dir);
    store.lookup_or_encode(f.w, f.tok, "p0", "a b c.", 16);
    store.lookup_or_encode(f.w, f.tok, "p1", "e f.", 16);
    store.flush();
  }
  CHECK(std::filesystem::exists(dir / "index.json"));
  PrecomputeStore reloaded(dir);
  CHECK(reloaded.size() == 2);
  auto [kv, hit] = reloaded.lookup_or_encode(f.w, f.tok, "p0", "a b c.", 16);
  CHECK(hit);
  CHECK(*kv == encode_tokens(f.w, f.tok.tokenize("a b c.")));
  std::filesystem::remove_all(dir);
}
