// Naive serial reference implementations, kept independent of the kernel and
// attention code paths. These are the oracles the production paths are
// tested against and the baselines the benchmark tool compares with.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "wmgen/config.hpp"
#include "wmgen/weights.hpp"

namespace wmgen::ref {

// Full plain causal forward pass; returns logits for every position,
// [T x vocab]. Positions may be non-contiguous.
std::vector<double> plain_logits(const TransformerWeights& w,
                                 std::span<const int> tokens,
                                 std::span<const int> positions);

// Brute-force softmax attention of one query over an explicit token list.
// q: [heads][head_dim]; keys/values token-major [n][heads][head_dim].
// Returns [heads][head_dim].
std::vector<double> union_attention(std::span<const double> q,
                                    std::span<const double> keys,
                                    std::span<const double> values,
                                    int64_t n_tokens, int64_t n_heads,
                                    int64_t head_dim, double scale);

// Serial reference decoder: recomputes the full sequence every step, no
// memory machinery, same sampling rules as the engine.
std::vector<int> decode(const TransformerWeights& w,
                        std::span<const int> prompt, int base_position,
                        int max_steps, int eot_token,
                        const SamplePolicy& policy, uint64_t seed);

}  // namespace wmgen::ref
