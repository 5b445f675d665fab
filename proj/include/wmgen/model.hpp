// Decoder forward pass with working-memory attention, incremental KV cache,
// and next-token sampling. Tokens in a call are processed as one block;
// per-(query, head) arithmetic matches single-token decoding exactly, so
// incremental and from-scratch evaluation agree.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "wmgen/attention.hpp"
#include "wmgen/config.hpp"
#include "wmgen/kv_cache.hpp"
#include "wmgen/rng.hpp"
#include "wmgen/weights.hpp"

namespace wmgen {

// Extends `ctx` with the new tokens' keys/values and returns next-token
// logits for the last input token. `units` are memory-unit caches encoded
// with the same weights; each forms one attention branch together with the
// context.
std::vector<double> forward_step(const TransformerWeights& w, KVCache& ctx,
                                 std::span<const KVCache* const> units,
                                 std::span<const int> tokens,
                                 std::span<const int> positions,
                                 const AggregationConfig& agg);

// Runs tokens at positions 0..n-1 with no memory branches and returns the
// resulting KV cache (the encoding path for memory units).
KVCache encode_tokens(const TransformerWeights& w, std::span<const int> tokens);

// k=1 degeneration: a single unit, no context branch, context positions
// following the unit contiguously. Logits equal a plain forward pass over
// [unit tokens; context tokens].
std::vector<double> degeneration_forward(const TransformerWeights& w,
                                         std::span<const KVCache* const> units,
                                         std::span<const int> ctx_tokens);

// Greedy argmax (lowest token ID wins ties) or seeded temperature sampling.
int sample_next(std::span<const double> logits, const SamplePolicy& policy,
                Rng& rng);

// Stream tag for deriving the sampling RNG of a generation from its seed.
inline constexpr uint64_t kSampleStream = 0x53414d50ULL;

}  // namespace wmgen
