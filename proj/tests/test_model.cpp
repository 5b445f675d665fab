#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "wmgen/errors.hpp"
#include "wmgen/model.hpp"
#include "wmgen/ref.hpp"
#include "wmgen/rng.hpp"
#include "wmgen/weights.hpp"

using namespace wmgen;

namespace {

bool close_rel(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

std::vector<int> random_tokens(Rng& rng, int n, int vocab) {
  std::vector<int> t(static_cast<size_t>(n));
  for (auto& x : t) x = static_cast<int>(rng.below(static_cast<uint64_t>(vocab)));
  return t;
}

}  // namespace

TEST_CASE("init_weights determinism and distinct streams") {
  ModelConfig cfg{16, 8, 2, 2, 16, 32, 42};
  TransformerWeights a = init_weights(cfg);
  TransformerWeights b = init_weights(cfg);
  bool identical = true;
  for_each_tensor(a, [&](const std::string&, const Tensor& t) {
    static size_t idx = 0;
    (void)idx;
    if (!t.all_finite()) identical = false;
  });
  // Compare via fingerprint: same seed bit-identical, different seed differs.
  CHECK(weights_fingerprint(a) == weights_fingerprint(b));
  cfg.seed = 43;
  TransformerWeights c = init_weights(cfg);
  CHECK(weights_fingerprint(a) != weights_fingerprint(c));
  CHECK(identical);

  ModelConfig bad{16, 6, 4, 2, 16, 32, 1};
  CHECK_THROWS_AS(init_weights(bad), ConfigError);
}

TEST_CASE("k=0 reduction: empty memory equals a plain causal forward pass") {
  ModelConfig cfg{20, 12, 3, 2, 24, 48, 9};
  const TransformerWeights w = init_weights(cfg);
  Rng rng(4);
  const auto tokens = random_tokens(rng, 11, 20);
  std::vector<int> positions(tokens.size());
  for (size_t i = 0; i < tokens.size(); ++i) positions[i] = static_cast<int>(i) + 7;

  KVCache ctx;
  const auto got = forward_step(w, ctx, {}, tokens, positions, AggregationConfig{true});
  const auto want_all = ref::plain_logits(w, tokens, positions);
  const size_t off = (tokens.size() - 1) * static_cast<size_t>(cfg.vocab_size);
  for (size_t i = 0; i < got.size(); ++i) {
    CHECK(close_rel(got[i], want_all[off + i], 1e-9));
  }
}

TEST_CASE("identical calls produce identical logits") {
  ModelConfig cfg{16, 8, 2, 1, 16, 32, 2};
  const TransformerWeights w = init_weights(cfg);
  std::vector<int> tokens = {3, 1, 4, 1, 5};
  std::vector<int> positions = {0, 1, 2, 3, 4};
  KVCache a, b;
  const auto la = forward_step(w, a, {}, tokens, positions, AggregationConfig{true});
  const auto lb = forward_step(w, b, {}, tokens, positions, AggregationConfig{true});
  CHECK(la == lb);
}

TEST_CASE("one memory unit matches the prepended baseline under degeneration") {
  ModelConfig cfg{18, 8, 2, 2, 16, 48, 12};
  const TransformerWeights w = init_weights(cfg);
  Rng rng(8);
  const auto unit_tokens = random_tokens(rng, 4, 18);
  const auto ctx_tokens = random_tokens(rng, 7, 18);
  const KVCache unit = encode_tokens(w, unit_tokens);
  const KVCache* units[1] = {&unit};
  const auto got = degeneration_forward(w, units, ctx_tokens);

  std::vector<int> all = unit_tokens;
  all.insert(all.end(), ctx_tokens.begin(), ctx_tokens.end());
  std::vector<int> positions(all.size());
  for (size_t i = 0; i < all.size(); ++i) positions[i] = static_cast<int>(i);
  const auto want = ref::plain_logits(w, all, positions);
  const size_t off = (all.size() - 1) * static_cast<size_t>(cfg.vocab_size);
  for (size_t i = 0; i < got.size(); ++i) {
    CHECK(close_rel(got[i], want[off + i], 1e-9));
  }
}

TEST_CASE("cache consistency: incremental decoding equals full recompute") {
  ModelConfig cfg{20, 8, 2, 2, 16, 64, 17};
  const TransformerWeights w = init_weights(cfg);
  Rng rng(13);
  const auto tokens = random_tokens(rng, 9, 20);
  std::vector<int> positions(tokens.size());
  for (size_t i = 0; i < tokens.size(); ++i) positions[i] = static_cast<int>(i);

  // Incremental: one token at a time through the same cache.
  KVCache inc;
  std::vector<double> last;
  for (size_t i = 0; i < tokens.size(); ++i) {
    const int t[1] = {tokens[i]};
    const int p[1] = {positions[i]};
    last = forward_step(w, inc, {}, std::span<const int>(t, 1),
                        std::span<const int>(p, 1), AggregationConfig{true});
  }
  // Block prefill.
  KVCache block;
  const auto block_logits =
      forward_step(w, block, {}, tokens, positions, AggregationConfig{true});
  CHECK(last == block_logits);  // same op order, bitwise

  // From-scratch serial reference.
  const auto scratch = ref::plain_logits(w, tokens, positions);
  const size_t off = (tokens.size() - 1) * static_cast<size_t>(cfg.vocab_size);
  for (size_t i = 0; i < last.size(); ++i) {
    CHECK(close_rel(last[i], scratch[off + i], 1e-9));
  }
  // Cache contents agree between incremental and block paths.
  CHECK(inc == block);
}

TEST_CASE("position overflow raises a capacity error") {
  ModelConfig cfg{16, 8, 2, 1, 16, 8, 3};
  const TransformerWeights w = init_weights(cfg);
  KVCache ctx;
  std::vector<int> tokens = {1, 2, 3};
  std::vector<int> positions = {6, 7, 8};  // 8 == max_positions
  CHECK_THROWS_AS(
      forward_step(w, ctx, {}, tokens, positions, AggregationConfig{true}),
      CapacityError);
}

TEST_CASE("sample_next rules") {
  Rng rng(5);
  SamplePolicy greedy{SamplePolicy::Mode::greedy, 1.0};
  std::vector<double> logits = {0.1, 2.0, 2.0};
  CHECK(sample_next(logits, greedy, rng) == 1);  // lowest-ID tie break

  std::vector<double> onehot = {-30.0, -30.0, 12.0, -30.0};
  CHECK(sample_next(onehot, greedy, rng) == 2);
  SamplePolicy cold{SamplePolicy::Mode::temperature, 0.05};
  for (int i = 0; i < 10; ++i) CHECK(sample_next(onehot, cold, rng) == 2);

  SamplePolicy warm{SamplePolicy::Mode::temperature, 1.0};
  Rng r1(77), r2(77);
  std::vector<double> flat = {0.3, 0.1, 0.2, 0.4};
  for (int i = 0; i < 20; ++i) {
    CHECK(sample_next(flat, warm, r1) == sample_next(flat, warm, r2));
  }

  SamplePolicy bad{SamplePolicy::Mode::temperature, 0.0};
  CHECK_THROWS_AS(sample_next(flat, bad, rng), ConfigError);
}

TEST_CASE("encode_tokens uses positions 0..n-1") {
  ModelConfig cfg{16, 8, 2, 2, 16, 32, 3};
  const TransformerWeights w = init_weights(cfg);
  const std::vector<int> tokens = {5, 9, 2, 7};
  const KVCache kv = encode_tokens(w, tokens);
  REQUIRE(kv.span() == 4);
  for (int i = 0; i < 4; ++i) CHECK(kv.positions[static_cast<size_t>(i)] == i);
  CHECK(kv.consistent());
}
