#include "wmgen/model.hpp"

#include <cmath>

#include "wmgen/errors.hpp"
#include "wmgen/kernels.hpp"
#include "wmgen/tensor.hpp"

namespace wmgen {

std::vector<double> forward_step(const TransformerWeights& w, KVCache& ctx,
                                 std::span<const KVCache* const> units,
                                 std::span<const int> tokens,
                                 std::span<const int> positions,
                                 const AggregationConfig& agg) {
  const auto& cfg = w.config;
  if (tokens.empty()) throw ContractViolation("forward_step: no input tokens");
  if (tokens.size() != positions.size()) {
    throw ContractViolation("forward_step: tokens/positions length mismatch");
  }
  if (ctx.n_layers == 0) {
    ctx = KVCache(cfg.n_layers, cfg.n_heads, cfg.head_dim());
  }
  for (const KVCache* u : units) {
    if (u->n_layers != cfg.n_layers || u->n_heads != cfg.n_heads ||
        u->head_dim != cfg.head_dim()) {
      throw ContractViolation("memory unit KV shape does not match the model");
    }
  }
  for (int p : positions) {
    if (p >= cfg.max_positions) {
      throw CapacityError("position " + std::to_string(p) +
                          " exceeds max_positions " +
                          std::to_string(cfg.max_positions));
    }
  }

  const int64_t T = static_cast<int64_t>(tokens.size());
  const int64_t d = cfg.d_model;
  const int64_t H = cfg.n_heads;
  const int64_t hd = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  std::vector<double> x(static_cast<size_t>(T * d));
  for (int64_t t = 0; t < T; ++t) {
    const int tok = tokens[static_cast<size_t>(t)];
    if (tok < 0 || tok >= cfg.vocab_size) {
      throw ContractViolation("token id out of range");
    }
    const double* te = w.tok_emb.ptr() + tok * d;
    const double* pe = w.pos_emb.ptr() + positions[static_cast<size_t>(t)] * d;
    for (int64_t j = 0; j < d; ++j) x[t * d + j] = te[j] + pe[j];
  }
  for (int p : positions) ctx.append_position(p);

  std::vector<double> a(static_cast<size_t>(T * d));
  std::vector<double> qkv(static_cast<size_t>(T * d));
  std::vector<double> ff(static_cast<size_t>(T * cfg.d_ff));
  std::vector<double> proj(static_cast<size_t>(T * d));

  for (int64_t l = 0; l < cfg.n_layers; ++l) {
    const auto& lw = w.layers[static_cast<size_t>(l)];
    auto& layer_kv = ctx.layers[static_cast<size_t>(l)];

    kernels::layernorm(x.data(), lw.ln1_gain.ptr(), lw.ln1_bias.ptr(), a.data(),
                       nullptr, nullptr, T, d);
    std::vector<double> q(static_cast<size_t>(T * d));
    kernels::matmul(a.data(), lw.w_q.ptr(), q.data(), T, d, d);
    kernels::matmul(a.data(), lw.w_k.ptr(), qkv.data(), T, d, d);
    layer_kv.k.insert(layer_kv.k.end(), qkv.begin(), qkv.begin() + T * d);
    kernels::matmul(a.data(), lw.w_v.ptr(), qkv.data(), T, d, d);
    layer_kv.v.insert(layer_kv.v.end(), qkv.begin(), qkv.begin() + T * d);

    AttnQueries queries{T, H, hd, q.data()};
    std::vector<BranchView> branches;
    branches.reserve(units.size() + 1);
    for (const KVCache* u : units) {
      branches.push_back(BranchView{&u->layers[static_cast<size_t>(l)],
                                    u->span(), &layer_kv, ctx.span()});
    }
    if (agg.include_context_branch) {
      branches.push_back(BranchView{nullptr, 0, &layer_kv, ctx.span()});
    }
    auto att = memory_attention(queries, branches, scale);

    kernels::matmul(att.data(), lw.w_o.ptr(), proj.data(), T, d, d);
    for (int64_t i = 0; i < T * d; ++i) x[static_cast<size_t>(i)] += proj[static_cast<size_t>(i)];

    kernels::layernorm(x.data(), lw.ln2_gain.ptr(), lw.ln2_bias.ptr(), a.data(),
                       nullptr, nullptr, T, d);
    kernels::matmul(a.data(), lw.w_ff1.ptr(), ff.data(), T, d, cfg.d_ff);
    kernels::add_bias(ff.data(), lw.b_ff1.ptr(), T, cfg.d_ff);
    kernels::gelu_forward(ff.data(), ff.data(), T * cfg.d_ff);
    kernels::matmul(ff.data(), lw.w_ff2.ptr(), proj.data(), T, cfg.d_ff, d);
    kernels::add_bias(proj.data(), lw.b_ff2.ptr(), T, d);
    for (int64_t i = 0; i < T * d; ++i) x[static_cast<size_t>(i)] += proj[static_cast<size_t>(i)];
  }

  // Final norm + head for the last token only.
  std::vector<double> last_ln(static_cast<size_t>(d));
  kernels::layernorm(x.data() + (T - 1) * d, w.lnf_gain.ptr(), w.lnf_bias.ptr(),
                     last_ln.data(), nullptr, nullptr, 1, d);
  std::vector<double> logits(static_cast<size_t>(cfg.vocab_size));
  kernels::matmul_nt(last_ln.data(), w.tok_emb.ptr(), logits.data(), 1, d,
                     cfg.vocab_size);
  ensure_finite(logits, "next-token logits");
  return logits;
}

KVCache encode_tokens(const TransformerWeights& w,
                      std::span<const int> tokens) {
  KVCache kv(w.config.n_layers, w.config.n_heads, w.config.head_dim());
  std::vector<int> positions(tokens.size());
  for (size_t i = 0; i < tokens.size(); ++i) positions[i] = static_cast<int>(i);
  forward_step(w, kv, {}, tokens, positions, AggregationConfig{true});
  return kv;
}

std::vector<double> degeneration_forward(const TransformerWeights& w,
                                         std::span<const KVCache* const> units,
                                         std::span<const int> ctx_tokens) {
  if (units.size() != 1) {
    throw ContractViolation("degeneration requires exactly one memory unit");
  }
  if (ctx_tokens.empty()) {
    throw ContractViolation("degeneration requires context tokens");
  }
  const int base = static_cast<int>(units.front()->span());
  KVCache ctx(w.config.n_layers, w.config.n_heads, w.config.head_dim());
  std::vector<int> positions(ctx_tokens.size());
  for (size_t i = 0; i < ctx_tokens.size(); ++i) {
    positions[i] = base + static_cast<int>(i);
  }
  return forward_step(w, ctx, units, ctx_tokens, positions,
                      AggregationConfig{false});
}

int sample_next(std::span<const double> logits, const SamplePolicy& policy,
                Rng& rng) {
  policy.validate();
  ensure_finite(logits, "sampling logits");
  if (policy.mode == SamplePolicy::Mode::greedy) {
    int best = 0;
    for (size_t i = 1; i < logits.size(); ++i) {
      if (logits[i] > logits[static_cast<size_t>(best)]) best = static_cast<int>(i);
    }
    return best;
  }
  auto probs = kernels::softmax_with_temperature(logits, policy.temperature);
  const double u = rng.uniform01();
  double cum = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) {
    cum += probs[i];
    if (u < cum) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

}  // namespace wmgen
