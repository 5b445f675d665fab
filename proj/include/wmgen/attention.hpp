// Memory-augmented self-attention. Each branch is one memory unit's KV
// concatenated with the context KV (or the context alone); branches are
// attended independently and their outputs combined with the softmax
// normalization masses:
//
//   out = sum_i alpha_i * hidden_i / sum_j alpha_j
//
// All branches of one aggregation share a single max-shift constant per
// (query, head), which makes the combination exactly equal to one softmax
// attention over the union of branch tokens with the context replicated once
// per branch.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "wmgen/kv_cache.hpp"

namespace wmgen {

struct AggregationConfig {
  // Whether the context-only branch participates (the "+1" branch). With it
  // disabled and no memory units, attention is undefined.
  bool include_context_branch = true;
};

// Queries laid out [query][head][head_dim].
struct AttnQueries {
  int64_t n_queries = 0;
  int64_t n_heads = 0;
  int64_t head_dim = 0;
  const double* q = nullptr;
};

// One attention branch: an optional unit segment followed by the context
// segment. Unit tokens are visible to every query; context token j is
// visible to query qi iff j < ctx_len - n_queries + qi + 1 (the trailing
// n_queries context entries are the in-flight block itself).
struct BranchView {
  const LayerKV* unit = nullptr;
  int64_t unit_len = 0;
  const LayerKV* ctx = nullptr;
  int64_t ctx_len = 0;

  int64_t visible_ctx(int64_t qi, int64_t n_queries) const {
    return ctx_len - n_queries + qi + 1;
  }
};

struct AttentionBranchResult {
  int64_t n_queries = 0;
  int64_t n_heads = 0;
  int64_t head_dim = 0;
  std::vector<double> hidden;  // [query][head][head_dim]
  std::vector<double> alpha;   // [query][head]
};

// Accumulates the max attention logit per (query, head) into `mx` (callers
// initialize mx with -inf). Used to compute the shared shift.
void branch_max_logits(const AttnQueries& queries, const BranchView& branch,
                       double scale, double* mx);

// Scaled dot-product attention over one branch. `shift` is the shared
// max-shift constant per (query, head); alpha is the exp-sum under that
// shift and hidden the convex combination of the branch's values.
AttentionBranchResult branch_attention(const AttnQueries& queries,
                                       const BranchView& branch, double scale,
                                       const double* shift);

// alpha-weighted combination of branch hiddens, [query][head][head_dim].
std::vector<double> aggregate(std::span<const AttentionBranchResult> branches);

// Two-pass helper: shared shift, per-branch attention, aggregation.
std::vector<double> memory_attention(const AttnQueries& queries,
                                     std::span<const BranchView> branches,
                                     double scale);

}  // namespace wmgen
