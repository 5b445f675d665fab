// Transformer parameters. Pre-LN decoder blocks: x + attn(ln1(x)) followed by
// x + mlp(ln2(x)), learned absolute position embeddings, output head tied to
// the token embedding. Initialization is a seeded scaled-uniform scheme and
// is bit-reproducible for a fixed (config, seed).
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wmgen/config.hpp"
#include "wmgen/tensor.hpp"

namespace wmgen {

struct LayerWeights {
  Tensor w_q, w_k, w_v, w_o;        // [d_model x d_model]
  Tensor ln1_gain, ln1_bias;        // [d_model]
  Tensor ln2_gain, ln2_bias;        // [d_model]
  Tensor w_ff1, b_ff1;              // [d_model x d_ff], [d_ff]
  Tensor w_ff2, b_ff2;              // [d_ff x d_model], [d_model]
};

struct TransformerWeights {
  ModelConfig config;
  Tensor tok_emb;                   // [vocab x d_model]
  Tensor pos_emb;                   // [max_positions x d_model]
  std::vector<LayerWeights> layers;
  Tensor lnf_gain, lnf_bias;        // [d_model]
};

TransformerWeights init_weights(const ModelConfig& config);

// Same shapes, all zeros; used for gradients and momentum buffers.
TransformerWeights zeros_like(const TransformerWeights& w);

// Visits every parameter tensor in a fixed declaration order.
template <typename W, typename F>
void for_each_tensor(W& w, F&& fn) {
  fn("tok_emb", w.tok_emb);
  fn("pos_emb", w.pos_emb);
  for (size_t l = 0; l < w.layers.size(); ++l) {
    auto& lw = w.layers[l];
    const std::string p = "layer" + std::to_string(l) + ".";
    fn(p + "ln1_gain", lw.ln1_gain);
    fn(p + "ln1_bias", lw.ln1_bias);
    fn(p + "w_q", lw.w_q);
    fn(p + "w_k", lw.w_k);
    fn(p + "w_v", lw.w_v);
    fn(p + "w_o", lw.w_o);
    fn(p + "ln2_gain", lw.ln2_gain);
    fn(p + "ln2_bias", lw.ln2_bias);
    fn(p + "w_ff1", lw.w_ff1);
    fn(p + "b_ff1", lw.b_ff1);
    fn(p + "w_ff2", lw.w_ff2);
    fn(p + "b_ff2", lw.b_ff2);
  }
  fn("lnf_gain", w.lnf_gain);
  fn("lnf_bias", w.lnf_bias);
}

// Self-describing binary checkpoint: magic, config block, f64 tensors in
// declaration order (little-endian), FNV-1a trailer.
void save_checkpoint(const std::string& path, const TransformerWeights& w);
TransformerWeights load_checkpoint(const std::string& path);

// Hash over the serialized form; identifies the weights for the KV
// precompute store.
uint64_t weights_fingerprint(const TransformerWeights& w);

}  // namespace wmgen
